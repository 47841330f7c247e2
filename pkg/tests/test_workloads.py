import pytest

from accelbo.design_space import LayerShape
from accelbo.workloads import (Workload, WorkloadLayer, builtin_names, get_builtin,
                               load_workload, matmul_layer, save_workload,
                               workload_from_dict, workload_to_dict)


def test_builtin_catalog():
    names = builtin_names()
    for expected in ("resnet18-mini", "dqn", "mlp", "transformer-mini", "toy1d"):
        assert expected in names
    for name in names:
        wl = get_builtin(name)
        assert len(wl.layers) >= 1
        assert wl.name == name


def test_builtin_shapes():
    conv2 = get_builtin("resnet18-mini").layer("conv2_x").shape
    assert conv2 == LayerShape(1, 64, 64, 3, 3, 56, 56)
    toy = get_builtin("toy1d").layer("conv1d").shape
    assert toy == LayerShape(1, 1, 4, 3, 1, 4, 1)
    dqn = get_builtin("dqn")
    assert dqn.layer("conv1").shape.r == 8


def test_get_builtin_unknown():
    with pytest.raises(KeyError):
        get_builtin("resnet-152")


def test_matmul_layer_embedding():
    layer = matmul_layer(64, 512, 784)
    # an (M x K) @ (K x N) product becomes a 1x1 convolution
    assert layer == LayerShape(1, 512, 784, 1, 1, 64, 1)
    assert layer.macs == 64 * 512 * 784


def test_duplicate_labels_rejected():
    a = WorkloadLayer("fc", matmul_layer(4, 4, 4))
    with pytest.raises(ValueError):
        Workload("bad", (a, a))


def test_layer_lookup_error():
    wl = get_builtin("mlp")
    with pytest.raises(KeyError):
        wl.layer("conv9")


def test_round_trip(tmp_path):
    wl = get_builtin("dqn")
    path = tmp_path / "dqn.json"
    save_workload(wl, path)
    back = load_workload(path)
    assert back == wl
    # saved form is stable
    save_workload(back, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == path.read_text()


def test_from_dict_validation():
    good = workload_to_dict(get_builtin("toy1d"))
    assert workload_from_dict(good) == get_builtin("toy1d")
    with pytest.raises(ValueError):
        workload_from_dict({"layers": []})
    with pytest.raises(ValueError):
        workload_from_dict({"name": "x", "layers": []})
    bad = workload_to_dict(get_builtin("toy1d"))
    bad["layers"][0]["c"] = 0
    with pytest.raises(ValueError):
        workload_from_dict(bad)


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ValueError):
        load_workload(path)
