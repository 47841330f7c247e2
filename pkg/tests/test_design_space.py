import itertools

import numpy as np
import pytest

from accelbo import design_space as ds
from accelbo.design_space import (DEFAULT_BUDGET, DEFAULT_HARDWARE, DIMS, LEVELS,
                                  EnergyTable, HardwareConfig,
                                  LayerShape, Mapping, SamplingExhausted,
                                  factorizations, hardware_pool_sampler, hw_features,
                                  mapping_pool_sampler, sample_hardware, sample_mapping,
                                  sw_features, validate_hardware, validate_mapping)

TOY = LayerShape(1, 1, 4, 3, 1, 4, 1)
CONV2X = LayerShape(1, 64, 64, 3, 3, 56, 56)


def brute_force_factorizations(value, slots):
    out = []
    for combo in itertools.product(range(1, value + 1), repeat=slots):
        prod = 1
        for f in combo:
            prod *= f
        if prod == value:
            out.append(combo)
    return tuple(sorted(out))


def test_factorizations_against_brute_force():
    for value in list(range(1, 37)) + [48, 60]:
        for slots in (1, 2, 3, 4):
            got = factorizations(value, slots)
            assert got == brute_force_factorizations(value, slots), (value, slots)
            assert len(set(got)) == len(got)


def test_factorizations_known_values():
    assert factorizations(4, 2) == ((1, 4), (2, 2), (4, 1))
    assert factorizations(7, 3) == ((1, 1, 7), (1, 7, 1), (7, 1, 1))
    assert len(factorizations(12, 2)) == 6  # 1,2,3,4,6,12
    assert factorizations(1, 4) == ((1, 1, 1, 1),)


def test_factorization_count_is_multiplicative_over_prime_powers():
    # ordered factorizations of p^a into k slots = C(a+k-1, k-1)
    from math import comb
    assert len(factorizations(64, 4)) == comb(6 + 3, 3)
    assert len(factorizations(56, 4)) == comb(3 + 3, 3) * comb(1 + 3, 3)


def test_layer_shape_validation():
    layer = CONV2X
    assert layer.macs == 64 * 64 * 3 * 3 * 56 * 56
    assert layer.bounds() == {"N": 1, "K": 64, "C": 64, "R": 3, "S": 3, "P": 56, "Q": 56}
    with pytest.raises(ValueError):
        LayerShape(0, 1, 1, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        LayerShape(1, 1, 1, 1, 1, 1, -3)


def test_energy_table_validation():
    EnergyTable(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        EnergyTable(e_dram=-1.0)
    with pytest.raises(ValueError):
        EnergyTable(e_rf=float("nan"))


def test_hardware_config_derived_quantities():
    hw = DEFAULT_HARDWARE
    assert hw.num_pes == 168
    assert hw.storage_words == 168 * 128 + 65536
    # the default config exactly saturates the default storage budget
    assert hw.storage_words == DEFAULT_BUDGET.max_storage_words
    with pytest.raises(ValueError):
        HardwareConfig(0, 4, 16, 4096)


def _uniform_mapping(layer):
    """All factors at L2, identity perms; always dimension-consistent."""
    t = {d: {"L0": 1, "L1": 1, "L2": layer.bounds()[d]} for d in DIMS}
    s = {d: 1 for d in DIMS}
    perms = {lv: tuple(DIMS) for lv in LEVELS}
    return Mapping(temporal=t, spatial=s, perms=perms)


def test_mapping_structure_validation():
    m = _uniform_mapping(TOY)
    assert m.factor_product("C") == 4
    assert m.spatial_product() == 1
    with pytest.raises(ValueError):
        Mapping(temporal={d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS[:-1]},
                spatial={d: 1 for d in DIMS}, perms=m.perms)
    bad_t = {d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS}
    bad_t["K"] = {"L0": 0, "L1": 1, "L2": 1}
    with pytest.raises(ValueError):
        Mapping(temporal=bad_t, spatial={d: 1 for d in DIMS}, perms=m.perms)
    with pytest.raises(ValueError):
        Mapping(temporal=m.temporal, spatial=m.spatial,
                perms={"L0": tuple(DIMS), "L1": tuple(DIMS), "L2": ("N",) * 7})


def test_validate_mapping_dimension_violation():
    m = _uniform_mapping(CONV2X)
    m.temporal["C"]["L2"] = 128  # product becomes 128, bound is 64
    report = validate_mapping(m, DEFAULT_HARDWARE, CONV2X)
    assert not report.feasible
    kinds = {(v.kind, v.where) for v in report.violations}
    assert ("Dimension", "C") in kinds
    v = [v for v in report.violations if v.where == "C"][0]
    assert v.measured == 128 and v.limit == 64


def test_validate_mapping_capacity_violation():
    # L0 tile W=3*1 I=2*... pick factors giving footprint 18 on a 16-word RF
    layer = TOY
    t = {d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS}
    t["C"] = {"L0": 1, "L1": 4, "L2": 1}
    t["R"] = {"L0": 3, "L1": 1, "L2": 1}
    t["P"] = {"L0": 4, "L1": 1, "L2": 1}
    m = Mapping(temporal=t, spatial={d: 1 for d in DIMS},
                perms={lv: tuple(DIMS) for lv in LEVELS})
    # L0 footprint: W=3, I=(4+3-1)=6, O=4 -> 13 words
    hw_ok = HardwareConfig(1, 1, 13, 4096)
    assert validate_mapping(m, hw_ok, layer).feasible
    hw_tight = HardwareConfig(1, 1, 12, 4096)
    report = validate_mapping(m, hw_tight, layer)
    assert not report.feasible
    v = [v for v in report.violations if v.kind == "Capacity"][0]
    assert v.where == "L0" and v.measured == 13 and v.limit == 12


def test_validate_mapping_parallelism_violation():
    layer = LayerShape(1, 200, 1, 1, 1, 1, 1)
    t = {d: {"L0": 1, "L1": 1, "L2": 1} for d in DIMS}
    s = {d: 1 for d in DIMS}
    s["K"] = 200
    m = Mapping(temporal=t, spatial=s, perms={lv: tuple(DIMS) for lv in LEVELS})
    report = validate_mapping(m, DEFAULT_HARDWARE, layer)
    v = [v for v in report.violations if v.kind == "Parallelism"][0]
    assert v.measured == 200 and v.limit == 168


def test_validate_hardware_budget():
    assert validate_hardware(DEFAULT_HARDWARE, DEFAULT_BUDGET).feasible
    report = validate_hardware(HardwareConfig(33, 14, 128, 65536), DEFAULT_BUDGET)
    assert any(v.kind == "Budget" and v.where == "pe_x" for v in report.violations)
    report = validate_hardware(HardwareConfig(13, 14, 128, 65536), DEFAULT_BUDGET)
    assert any(v.where == "pe_count" and v.measured == 182 for v in report.violations)
    report = validate_hardware(HardwareConfig(12, 14, 100, 65536), DEFAULT_BUDGET)
    assert any(v.where == "rf_words" for v in report.violations)
    report = validate_hardware(HardwareConfig(12, 14, 1024, 2 ** 20), DEFAULT_BUDGET)
    assert any(v.where == "storage_words" for v in report.violations)


def test_sample_mapping_is_feasible_and_deterministic():
    hw = DEFAULT_HARDWARE
    for layer in (TOY, CONV2X):
        a = [sample_mapping(layer, hw, np.random.default_rng(5)) for _ in range(3)]
        b = [sample_mapping(layer, hw, np.random.default_rng(5)) for _ in range(3)]
        assert a == b
        rng = np.random.default_rng(7)
        for _ in range(25):
            m = sample_mapping(layer, hw, rng)
            assert validate_mapping(m, hw, layer).feasible


def test_sample_mapping_exhaustion():
    # 2-word RF cannot hold even a 1x1x1 tile of all three tensors
    hw = HardwareConfig(2, 2, 2, 4096)
    with pytest.raises(SamplingExhausted) as exc:
        sample_mapping(TOY, hw, np.random.default_rng(0), max_attempts=500)
    assert exc.value.attempts == 500


def test_mapping_pool_sampler_contract():
    sampler = mapping_pool_sampler(CONV2X, DEFAULT_HARDWARE)
    pool, attempts = sampler(np.random.default_rng(3), 40, 100_000)
    assert len(pool) == 40
    assert attempts >= 40
    for m in pool:
        assert validate_mapping(m, DEFAULT_HARDWARE, CONV2X).feasible
    # attempt budget respected when it cuts the pool short
    pool2, attempts2 = sampler(np.random.default_rng(3), 40, 10)
    assert attempts2 <= 10
    assert len(pool2) <= 40


def test_sample_hardware_within_budget():
    rng = np.random.default_rng(11)
    for _ in range(50):
        hw = sample_hardware(DEFAULT_BUDGET, rng)
        assert validate_hardware(hw, DEFAULT_BUDGET).feasible
    pool, _ = hardware_pool_sampler(DEFAULT_BUDGET, EnergyTable())(
        np.random.default_rng(1), 20, 100_000)
    assert len(pool) == 20


def test_hardware_features():
    f = hw_features(DEFAULT_HARDWARE)
    assert f.schema == ds.HW_SCHEMA
    assert len(f.values) == 7
    vals = dict(zip(f.schema, f.values))
    assert vals["log2_rf_words"] == 7.0
    assert vals["log2_gb_words"] == 16.0
    assert vals["pe_aspect"] == pytest.approx(12 / 14)


def test_mapping_features():
    rng = np.random.default_rng(2)
    m = sample_mapping(CONV2X, DEFAULT_HARDWARE, rng)
    f = sw_features(m, DEFAULT_HARDWARE, CONV2X)
    assert f.schema == ds.SW_SCHEMA
    assert len(f.values) == 52
    vals = dict(zip(f.schema, f.values))
    # log2 factors reconstruct the dimension product
    for d in DIMS:
        total = (vals[f"log2_{d}_spatial"] + vals[f"log2_{d}_L0"]
                 + vals[f"log2_{d}_L1"] + vals[f"log2_{d}_L2"])
        assert 2 ** total == pytest.approx(CONV2X.bounds()[d])
    assert 0 < vals["util_L0"] <= 1.0
    assert 0 < vals["util_L1"] <= 1.0
    assert 0 < vals["util_spatial"] <= 1.0
    for lv in LEVELS:
        depths = sorted(vals[f"depth_{lv}_{d}"] for d in DIMS)
        assert depths == pytest.approx([i / 6 for i in range(7)])
