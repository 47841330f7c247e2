"""Built-in and file-based workloads: named lists of labelled layers."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .design_space import LayerShape


@dataclass(frozen=True)
class WorkloadLayer:
    label: str
    shape: LayerShape


@dataclass(frozen=True)
class Workload:
    name: str
    layers: tuple

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a workload needs at least one layer")
        labels = [l.label for l in self.layers]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate layer labels in workload {self.name!r}")

    def layer(self, label: str) -> WorkloadLayer:
        for l in self.layers:
            if l.label == label:
                return l
        raise KeyError(f"no layer labelled {label!r} in workload {self.name!r}")


def matmul_layer(m: int, n_out: int, k_in: int) -> LayerShape:
    """An m x k_in by k_in x n_out matmul as a 7-dim layer: rows map to P,
    output columns to K, the contraction to C."""
    return LayerShape(n=1, k=n_out, c=k_in, r=1, s=1, p=m, q=1)


def _conv(n, k, c, r, s, p, q):
    return LayerShape(n=n, k=k, c=c, r=r, s=s, p=p, q=q)


def _builtin_catalog() -> dict:
    resnet = Workload("resnet18-mini", (
        WorkloadLayer("conv1", _conv(1, 64, 3, 7, 7, 112, 112)),
        WorkloadLayer("conv2_x", _conv(1, 64, 64, 3, 3, 56, 56)),
        WorkloadLayer("conv3_x", _conv(1, 128, 128, 3, 3, 28, 28)),
        WorkloadLayer("conv4_x", _conv(1, 256, 256, 3, 3, 14, 14)),
        WorkloadLayer("conv5_x", _conv(1, 512, 512, 3, 3, 7, 7)),
    ))
    # Atari-style control net: two small convs feeding fully connected layers.
    dqn = Workload("dqn", (
        WorkloadLayer("conv1", _conv(1, 16, 4, 8, 8, 20, 20)),
        WorkloadLayer("conv2", _conv(1, 32, 16, 4, 4, 9, 9)),
        WorkloadLayer("fc1", matmul_layer(1, 256, 2592)),
        WorkloadLayer("fc2", matmul_layer(1, 18, 256)),
    ))
    mlp = Workload("mlp", (
        WorkloadLayer("fc1", matmul_layer(64, 512, 784)),
        WorkloadLayer("fc2", matmul_layer(64, 512, 512)),
        WorkloadLayer("fc3", matmul_layer(64, 10, 512)),
    ))
    transformer = Workload("transformer-mini", (
        WorkloadLayer("qkv_proj", matmul_layer(64, 1536, 512)),
        WorkloadLayer("attn_out", matmul_layer(64, 512, 512)),
        WorkloadLayer("ffn_up", matmul_layer(64, 2048, 512)),
        WorkloadLayer("ffn_down", matmul_layer(64, 512, 2048)),
    ))
    toy = Workload("toy1d", (
        WorkloadLayer("conv1d", _conv(1, 1, 4, 3, 1, 4, 1)),
    ))
    return {w.name: w for w in (resnet, dqn, mlp, transformer, toy)}


BUILTIN = _builtin_catalog()


def builtin_names() -> tuple:
    return tuple(sorted(BUILTIN))


def get_builtin(name: str) -> Workload:
    try:
        return BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown workload {name!r}; built-ins: {', '.join(builtin_names())}")


_LAYER_FIELDS = ("n", "k", "c", "r", "s", "p", "q")


def workload_to_dict(w: Workload) -> dict:
    layers = []
    for l in w.layers:
        entry = {"label": l.label}
        for f in _LAYER_FIELDS:
            entry[f] = getattr(l.shape, f)
        layers.append(entry)
    return {"name": w.name, "layers": layers}


def workload_from_dict(data: dict) -> Workload:
    if not isinstance(data, dict) or "name" not in data or "layers" not in data:
        raise ValueError("workload JSON must be an object with 'name' and 'layers'")
    layers = []
    for i, entry in enumerate(data["layers"]):
        if not isinstance(entry, dict) or "label" not in entry:
            raise ValueError(f"layer {i}: expected an object with a 'label'")
        missing = [f for f in _LAYER_FIELDS if f not in entry]
        if missing:
            raise ValueError(f"layer {entry['label']!r}: missing bounds {missing}")
        try:
            shape = LayerShape(**{f: entry[f] for f in _LAYER_FIELDS})
        except ValueError as exc:
            raise ValueError(f"layer {entry['label']!r}: {exc}")
        layers.append(WorkloadLayer(str(entry["label"]), shape))
    return Workload(str(data["name"]), tuple(layers))


def load_workload(path: str) -> Workload:
    """Read a workload JSON file; raises ValueError with a diagnostic for
    malformed content (including duplicate labels)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})")
    return workload_from_dict(data)


def save_workload(w: Workload, path: str):
    with open(path, "w") as fh:
        json.dump(workload_to_dict(w), fh, indent=2, sort_keys=True)
        fh.write("\n")
