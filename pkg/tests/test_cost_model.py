import numpy as np
import pytest

from accelbo.cost_model import access_counts, evaluate_edp, tile_footprints, trace_oracle
from accelbo.design_space import (DEFAULT_HARDWARE, DIMS, LEVELS, EnergyTable,
                                  HardwareConfig, LayerShape, Mapping,
                                  SamplingExhausted, sample_mapping)

TOY = LayerShape(1, 1, 4, 3, 1, 4, 1)


def toy_example_mapping():
    """C spatial over 4 PEs, R and P tiled into the register file."""
    t = {d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS}
    t["R"]["L0"] = 3
    t["P"]["L0"] = 4
    s = {d: 1 for d in DIMS}
    s["C"] = 4
    perms = {lv: tuple(DIMS) for lv in LEVELS}
    return Mapping(temporal=t, spatial=s, perms=perms)


class TestWorkedExample:
    """Every number here was derived by stepping the loop nest by hand."""

    def setup_method(self):
        self.m = toy_example_mapping()
        self.hw = DEFAULT_HARDWARE

    def test_footprints(self):
        fps = tile_footprints(self.m, TOY)
        assert fps["L0"] == {"W": 3, "I": 6, "O": 4}
        assert fps["L1"] == {"W": 12, "I": 24, "O": 4}
        assert fps["L2"] == {"W": 12, "I": 24, "O": 4}

    def test_access_counts(self):
        acc = access_counts(self.m, self.hw, TOY)
        assert acc["L0"] == {"W": 48, "I": 48, "O": 96}
        assert acc["L1"] == {"W": 12, "I": 24, "O": 8}
        assert acc["L2"] == {"W": 12, "I": 24, "O": 8}

    def test_edp(self):
        res = evaluate_edp(self.m, self.hw, TOY)
        assert res.macs == 48
        assert res.cycles == 12
        assert res.energy == 9304.0
        assert res.edp == 111648.0

    def test_trace_agrees(self):
        assert trace_oracle(self.m, self.hw, TOY) == access_counts(self.m, self.hw, TOY)


def test_invalid_mapping_rejected():
    m = toy_example_mapping()
    m.temporal["C"]["L2"] = 2  # dimension product now 8, bound 4
    with pytest.raises(ValueError):
        access_counts(m, DEFAULT_HARDWARE, TOY)
    with pytest.raises(ValueError):
        evaluate_edp(m, DEFAULT_HARDWARE, TOY)
    with pytest.raises(ValueError):
        tile_footprints(m, TOY)


def test_l2_footprint_is_whole_layer():
    rng = np.random.default_rng(0)
    layer = LayerShape(2, 8, 4, 3, 3, 10, 10)
    for _ in range(20):
        m = sample_mapping(layer, DEFAULT_HARDWARE, rng)
        fps = tile_footprints(m, layer)
        assert fps["L2"]["W"] == 8 * 4 * 3 * 3
        assert fps["L2"]["I"] == 2 * 4 * (10 + 2) * (10 + 2)
        assert fps["L2"]["O"] == 2 * 8 * 10 * 10


def test_cycles_and_energy_identities():
    rng = np.random.default_rng(1)
    layer = LayerShape(1, 16, 8, 3, 3, 14, 14)
    for _ in range(20):
        m = sample_mapping(layer, DEFAULT_HARDWARE, rng)
        res = evaluate_edp(m, DEFAULT_HARDWARE, layer)
        assert res.cycles * m.spatial_product() == res.macs
        assert res.edp == res.energy * res.cycles
        acc = res.accesses
        e = (sum(acc["L0"].values()) * 1 + sum(acc["L1"].values()) * 6
             + sum(acc["L2"].values()) * 200 + res.macs * 1)
        assert res.energy == e


def test_energy_table_scaling():
    m = toy_example_mapping()
    hw2 = HardwareConfig(12, 14, 128, 65536, EnergyTable(2, 12, 400, 2))
    res1 = evaluate_edp(m, DEFAULT_HARDWARE, TOY)
    res2 = evaluate_edp(m, hw2, TOY)
    assert res2.energy == 2 * res1.energy
    assert res2.cycles == res1.cycles


def test_l0_accesses_are_mac_counts():
    rng = np.random.default_rng(3)
    layer = LayerShape(2, 4, 4, 3, 1, 6, 6)
    for _ in range(20):
        m = sample_mapping(layer, DEFAULT_HARDWARE, rng)
        acc = access_counts(m, DEFAULT_HARDWARE, layer)
        assert acc["L0"]["W"] == layer.macs
        assert acc["L0"]["I"] == layer.macs
        assert acc["L0"]["O"] == 2 * layer.macs


def test_unit_factor_perm_moves_do_not_matter():
    # dims whose factor is 1 at a level can sit anywhere in that level's order
    m = toy_example_mapping()
    base = access_counts(m, DEFAULT_HARDWARE, TOY)
    shuffled = Mapping(temporal=m.temporal, spatial=m.spatial,
                       perms={"L0": tuple(reversed(DIMS)),
                              "L1": ("Q", "P", "S", "R", "C", "K", "N"),
                              "L2": ("K", "N", "Q", "S", "C", "P", "R")})
    assert access_counts(shuffled, DEFAULT_HARDWARE, TOY) == base


def test_permutation_changes_refetch():
    # two L2 loops over K and C: W is K,C-relevant but O only K-relevant,
    # so which loop sits innermost changes the O refetch at L2
    layer = LayerShape(1, 4, 4, 1, 1, 2, 2)
    t = {d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS}
    t["K"]["L2"] = 4
    t["C"]["L2"] = 4
    t["P"]["L0"] = 2
    t["Q"]["L0"] = 2
    base = dict(temporal=t, spatial={d: 1 for d in DIMS})
    k_inner = Mapping(**base, perms={"L0": tuple(DIMS), "L1": tuple(DIMS),
                                     "L2": ("N", "R", "S", "P", "Q", "C", "K")})
    c_inner = Mapping(**base, perms={"L0": tuple(DIMS), "L1": tuple(DIMS),
                                     "L2": ("N", "R", "S", "P", "Q", "K", "C")})
    acc_k = access_counts(k_inner, DEFAULT_HARDWARE, layer)
    acc_c = access_counts(c_inner, DEFAULT_HARDWARE, layer)
    # K innermost: O tile changes every iteration; C innermost: O reused 4x
    assert acc_k["L2"]["O"] == 4 * acc_c["L2"]["O"]
    assert acc_k["L2"]["W"] == acc_c["L2"]["W"]
    for variant in (k_inner, c_inner):
        assert trace_oracle(variant, DEFAULT_HARDWARE, layer) == \
            access_counts(variant, DEFAULT_HARDWARE, layer)


def test_trace_oracle_matches_on_random_mappings():
    rng = np.random.default_rng(42)
    hw = HardwareConfig(4, 4, 64, 4096)
    layers = [
        LayerShape(1, 1, 4, 3, 1, 4, 1),
        LayerShape(2, 3, 5, 1, 1, 7, 2),
        LayerShape(1, 8, 8, 3, 3, 6, 6),
        LayerShape(4, 2, 6, 2, 2, 5, 5),
        LayerShape(1, 12, 1, 1, 1, 9, 9),
    ]
    checked = 0
    for layer in layers:
        for _ in range(40):
            try:
                m = sample_mapping(layer, hw, rng, max_attempts=5000)
            except SamplingExhausted:
                continue
            assert trace_oracle(m, hw, layer) == access_counts(m, hw, layer), (layer, m)
            checked += 1
    assert checked >= 150


def test_trace_oracle_mac_guard():
    layer = LayerShape(8, 64, 64, 3, 3, 56, 56)  # far above the iteration cap
    t = {d: {"L0": 1, "L1": 1, "L2": layer.bounds()[d]} for d in DIMS}
    m = Mapping(temporal=t, spatial={d: 1 for d in DIMS},
                perms={lv: tuple(DIMS) for lv in LEVELS})
    big_hw = HardwareConfig(32, 32, 2 ** 20, 2 ** 30)
    with pytest.raises(ValueError):
        trace_oracle(m, big_hw, layer)
