"""Analytical energy-delay cost model for mapped layers.

Word-count accounting over a three-level storage hierarchy: L0 per-PE
register files, L1 shared global buffer, L2 DRAM.  Three tensors move
through the hierarchy; each touches a subset of the seven loop dims:

    Weights  W : K, C, R, S
    Inputs   I : N, C, P, Q, R, S   (sliding window, so P/Q tiles overlap
                                     by R-1 / S-1 along the halo)
    Outputs  O : N, K, P, Q         (read-modify-write, counted twice)

Accesses at a level are counted with a refetch rule over the loop nest
above that level, and can be cross-checked bit-exactly against
trace_oracle, which literally walks the loop nest with one cached tile id
per (level, tensor).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from operator import itemgetter

from .design_space import DIMS, LEVELS, HardwareConfig, LayerShape, Mapping, validate_mapping

TENSORS = ("W", "I", "O")
RELEVANT = {
    "W": frozenset(("K", "C", "R", "S")),
    "I": frozenset(("N", "C", "P", "Q", "R", "S")),
    "O": frozenset(("N", "K", "P", "Q")),
}

TRACE_MACS_LIMIT = 10 ** 7


def _cum_factors(m: Mapping) -> dict:
    """Cumulative tile extents per dim at each level.  L0 extents are per PE
    (spatial factors excluded); L1 extents cover the whole array."""
    cum = {lv: {} for lv in LEVELS}
    for d in DIMS:
        t = m.temporal[d]
        c0 = t["L0"]
        c1 = c0 * m.spatial[d] * t["L1"]
        cum["L0"][d] = c0
        cum["L1"][d] = c1
        cum["L2"][d] = c1 * t["L2"]
    return cum


def _footprints_at(ext: dict) -> dict:
    w = ext["K"] * ext["C"] * ext["R"] * ext["S"]
    i = ext["N"] * ext["C"] * (ext["P"] + ext["R"] - 1) * (ext["Q"] + ext["S"] - 1)
    o = ext["N"] * ext["K"] * ext["P"] * ext["Q"]
    return {"W": w, "I": i, "O": o}


def tile_footprints(m: Mapping, layer: LayerShape) -> dict:
    """Words held per tensor at each level.  At L2 this reproduces the full
    tensor sizes of the layer.  Raises ValueError if any dimension factor
    product disagrees with the layer bounds."""
    bounds = layer.bounds()
    for d in DIMS:
        if m.factor_product(d) != bounds[d]:
            raise ValueError(
                f"mapping factors for {d} multiply to {m.factor_product(d)}, "
                f"layer bound is {bounds[d]}")
    cum = _cum_factors(m)
    return {lv: _footprints_at(cum[lv]) for lv in LEVELS}


def _listing(m: Mapping, level: str) -> list:
    """Loops at levels >= `level` as (dim, factor), innermost first, with
    factor-1 loops dropped.  Spatial loops sit innermost at L1 in fixed
    N..Q nest order, so they list Q-first."""
    loops = []
    if level == "L1":
        for d in reversed(DIMS):
            if m.spatial[d] > 1:
                loops.append((d, m.spatial[d]))
        for d in reversed(m.perms["L1"]):
            if m.temporal[d]["L1"] > 1:
                loops.append((d, m.temporal[d]["L1"]))
    for d in reversed(m.perms["L2"]):
        if m.temporal[d]["L2"] > 1:
            loops.append((d, m.temporal[d]["L2"]))
    return loops


def _check_feasible(m: Mapping, hw: HardwareConfig, layer: LayerShape):
    report = validate_mapping(m, hw, layer)
    if not report.feasible:
        raise ValueError(f"infeasible mapping: {report.violations}")


def access_counts(m: Mapping, hw: HardwareConfig, layer: LayerShape) -> dict:
    """Words moved per level and tensor.

    At L0 every MAC reads one weight and one input word and updates one
    output word (two register accesses).  At L1 and L2 a child tile is
    refetched once per iteration of every loop from the innermost one
    relevant to the tensor outward; tiles survive iterations of deeper
    irrelevant loops.  Output words count twice for read-modify-write.
    """
    _check_feasible(m, hw, layer)
    fps = tile_footprints(m, layer)
    macs = layer.macs
    counts = {"L0": {"W": macs, "I": macs, "O": 2 * macs}}
    child = {"L1": fps["L0"], "L2": fps["L1"]}
    for level in ("L1", "L2"):
        listed = _listing(m, level)
        out = {}
        for t in TENSORS:
            refetch = 1
            j = None
            for k, (d, _) in enumerate(listed):
                if d in RELEVANT[t]:
                    j = k
                    break
            if j is not None:
                for _, f in listed[j:]:
                    refetch *= f
            out[t] = child[level][t] * refetch * (2 if t == "O" else 1)
        counts[level] = out
    return counts


@dataclass(frozen=True)
class EdpResult:
    """Cost summary of one feasible (mapping, hardware, layer) triple.
    cycles * (product of spatial factors) always equals the MAC count."""

    edp: float
    energy: float
    cycles: int
    macs: int
    accesses: dict


def evaluate_edp(m: Mapping, hw: HardwareConfig, layer: LayerShape) -> EdpResult:
    """Energy-delay product: total access plus MAC energy, times the cycle
    count of a fully parallel PE array (MACs divided by spatial factors)."""
    counts = access_counts(m, hw, layer)
    e = hw.energy
    energy = (sum(counts["L0"].values()) * e.e_rf
              + sum(counts["L1"].values()) * e.e_gb
              + sum(counts["L2"].values()) * e.e_dram
              + layer.macs * e.e_mac)
    cycles = layer.macs // m.spatial_product()
    return EdpResult(edp=energy * float(cycles), energy=energy, cycles=cycles,
                     macs=layer.macs, accesses=counts)


def trace_oracle(m: Mapping, hw: HardwareConfig, layer: LayerShape) -> dict:
    """Reference access counter: literally iterate the loops above L0.

    The nest runs L2 loops (outermost, in perm order), then L1 loops, then
    the spatial loops in fixed N..Q order.  Each of the register file and
    the global buffer holds one tile id per tensor, the tuple of loop
    indices over the tensor's relevant dims visible at that level; whenever
    the id changes (including the first touch) the full child footprint is
    fetched.  Only usable when the layer has at most 10^7 MACs.
    """
    if layer.macs > TRACE_MACS_LIMIT:
        raise ValueError(f"trace oracle limited to {TRACE_MACS_LIMIT} MACs")
    _check_feasible(m, hw, layer)
    fps = tile_footprints(m, layer)
    macs = layer.macs

    loops = []  # outermost -> innermost, factor-1 loops never change an id
    for d in m.perms["L2"]:
        if m.temporal[d]["L2"] > 1:
            loops.append(("L2", d, m.temporal[d]["L2"]))
    for d in m.perms["L1"]:
        if m.temporal[d]["L1"] > 1:
            loops.append(("L1", d, m.temporal[d]["L1"]))
    for d in DIMS:
        if m.spatial[d] > 1:
            loops.append(("SP", d, m.spatial[d]))

    counts = {lv: {t: 0 for t in TENSORS} for lv in LEVELS}
    counts["L0"] = {"W": macs, "I": macs, "O": 2 * macs}

    def tracked(pred):
        out = {}
        for t in TENSORS:
            pos = [i for i, (lv, d, _) in enumerate(loops)
                   if d in RELEVANT[t] and pred(lv)]
            if len(pos) == 0:
                out[t] = None
            elif len(pos) == 1:
                p = pos[0]
                out[t] = lambda idx, p=p: (idx[p],)
            else:
                out[t] = itemgetter(*pos)
        return out

    rf_id_of = tracked(lambda lv: True)
    gb_id_of = tracked(lambda lv: lv == "L2")
    rf_cached = {t: object() for t in TENSORS}
    gb_cached = {t: object() for t in TENSORS}
    rf_fetches = {t: 0 for t in TENSORS}
    gb_fetches = {t: 0 for t in TENSORS}

    ranges = [range(f) for (_, _, f) in loops]
    for idx in itertools.product(*ranges):
        for t in TENSORS:
            get = rf_id_of[t]
            tid = get(idx) if get is not None else ()
            if tid != rf_cached[t]:
                rf_cached[t] = tid
                rf_fetches[t] += 1
            get = gb_id_of[t]
            gid = get(idx) if get is not None else ()
            if gid != gb_cached[t]:
                gb_cached[t] = gid
                gb_fetches[t] += 1

    for t in TENSORS:
        mult = 2 if t == "O" else 1
        counts["L1"][t] = rf_fetches[t] * fps["L0"][t] * mult
        counts["L2"][t] = gb_fetches[t] * fps["L1"][t] * mult
    return counts
