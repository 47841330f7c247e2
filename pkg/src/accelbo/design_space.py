"""Search spaces for accelerator configs and loop-nest mappings.

Defines the seven-dimensional layer shapes, hardware configurations, and
per-layer mappings (spatial factors plus three temporal tiling levels with
per-level loop orders), together with validity checking, rejection sampling,
and the feature encodings consumed by the surrogate models.

Level vocabulary: L0 is the per-PE register file, L1 the shared global
buffer, L2 is DRAM (unbounded).  Spatial factors spread a dimension across
the PE array and sit logically at the innermost position of L1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

DIMS = ("N", "K", "C", "R", "S", "P", "Q")
LEVELS = ("L0", "L1", "L2")

# Mappings with huge bound products fall back to exact-int validation in the
# batched sampler; see _MappingTables.
_FAST_MACS_LIMIT = 2 ** 60


class SamplingExhausted(RuntimeError):
    """Rejection sampling found no feasible point within the attempt budget."""

    def __init__(self, attempts: int, what: str = "point"):
        super().__init__(f"no feasible {what} in {attempts} attempts")
        self.attempts = attempts


@dataclass(frozen=True)
class LayerShape:
    """Loop bounds of one layer: batch n, output channels k, input channels c,
    filter height/width r and s, output height/width p and q.

    A matmul is expressed with r = s = q = 1.  All bounds are >= 1 and the
    total MAC count must fit in an unsigned 64-bit integer.
    """

    n: int
    k: int
    c: int
    r: int
    s: int
    p: int
    q: int

    def __post_init__(self):
        for name in ("n", "k", "c", "r", "s", "p", "q"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"layer bound {name} must be a positive int, got {v!r}")
        if self.macs >= 2 ** 64:
            raise ValueError("layer MAC count does not fit in 64 bits")

    @property
    def macs(self) -> int:
        return self.n * self.k * self.c * self.r * self.s * self.p * self.q

    def bounds(self) -> dict:
        return {
            "N": self.n, "K": self.k, "C": self.c, "R": self.r,
            "S": self.s, "P": self.p, "Q": self.q,
        }


@dataclass(frozen=True)
class EnergyTable:
    """Per-access energies (register file, global buffer, DRAM) and per-MAC energy."""

    e_rf: float = 1.0
    e_gb: float = 6.0
    e_dram: float = 200.0
    e_mac: float = 1.0

    def __post_init__(self):
        for name in ("e_rf", "e_gb", "e_dram", "e_mac"):
            v = getattr(self, name)
            if not (v >= 0.0) or not math.isfinite(v):
                raise ValueError(f"energy {name} must be a finite nonnegative number")


@dataclass(frozen=True)
class HardwareConfig:
    """One point in the hardware space: PE array shape, per-PE register file
    words, global buffer words, and the energy table used for costing."""

    pe_x: int
    pe_y: int
    rf_words: int
    gb_words: int
    energy: EnergyTable = EnergyTable()

    def __post_init__(self):
        for name in ("pe_x", "pe_y", "rf_words", "gb_words"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"hardware field {name} must be a positive int, got {v!r}")

    @property
    def num_pes(self) -> int:
        return self.pe_x * self.pe_y

    @property
    def storage_words(self) -> int:
        return self.pe_x * self.pe_y * self.rf_words + self.gb_words


@dataclass(frozen=True)
class HardwareBudget:
    """Candidate sets and aggregate limits for the hardware search."""

    max_pes: int = 168
    max_storage_words: int = 87040  # 168 PEs * 128 words + 65536-word buffer
    pe_x_range: tuple = tuple(range(1, 33))
    pe_y_range: tuple = tuple(range(1, 33))
    rf_choices: tuple = (16, 32, 64, 128, 256, 512, 1024)
    gb_choices: tuple = (4096, 8192, 16384, 32768, 65536, 131072, 262144, 524288, 1048576)

    def __post_init__(self):
        if self.max_pes < 1 or self.max_storage_words < 1:
            raise ValueError("budget limits must be positive")
        for name in ("pe_x_range", "pe_y_range", "rf_choices", "gb_choices"):
            vals = getattr(self, name)
            if not vals or any((not isinstance(v, int)) or v < 1 for v in vals):
                raise ValueError(f"{name} must be a nonempty tuple of positive ints")


DEFAULT_BUDGET = HardwareBudget()
# Eyeriss-like default: 12x14 array, 128-word register files, 64Ki-word buffer.
DEFAULT_HARDWARE = HardwareConfig(pe_x=12, pe_y=14, rf_words=128, gb_words=65536)


@dataclass
class Mapping:
    """A software mapping for one layer.

    temporal[d][level] and spatial[d] hold the loop factors of dimension d;
    their product over the four slots must equal the layer bound (checked by
    validate_mapping, not here).  perms[level] orders the seven dims from
    outermost to innermost at that temporal level.  Spatial loops carry no
    permutation: they always nest at the innermost position of L1 in the
    fixed order N outermost .. Q innermost.
    """

    temporal: dict
    spatial: dict
    perms: dict

    def __post_init__(self):
        if set(self.temporal) != set(DIMS) or set(self.spatial) != set(DIMS):
            raise ValueError("temporal and spatial must cover exactly the seven dims")
        for d in DIMS:
            levels = self.temporal[d]
            if set(levels) != set(LEVELS):
                raise ValueError(f"temporal[{d}] must cover exactly levels {LEVELS}")
            for lv in LEVELS:
                f = levels[lv]
                if not isinstance(f, int) or isinstance(f, bool) or f < 1:
                    raise ValueError(f"temporal[{d}][{lv}] must be a positive int")
            s = self.spatial[d]
            if not isinstance(s, int) or isinstance(s, bool) or s < 1:
                raise ValueError(f"spatial[{d}] must be a positive int")
        if set(self.perms) != set(LEVELS):
            raise ValueError(f"perms must cover exactly levels {LEVELS}")
        for lv in LEVELS:
            if tuple(sorted(self.perms[lv])) != tuple(sorted(DIMS)):
                raise ValueError(f"perms[{lv}] must be a permutation of the seven dims")
            if not isinstance(self.perms[lv], tuple):
                self.perms[lv] = tuple(self.perms[lv])

    def factor_product(self, d: str) -> int:
        t = self.temporal[d]
        return self.spatial[d] * t["L0"] * t["L1"] * t["L2"]

    def spatial_product(self) -> int:
        out = 1
        for d in DIMS:
            out *= self.spatial[d]
        return out


@dataclass(frozen=True)
class Violation:
    """One constraint violation: kind is Dimension, Capacity, Parallelism or
    Budget; where names the dim, level or parameter; measured vs limit."""

    kind: str
    where: str
    measured: float
    limit: float


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple = ()

    @property
    def feasible(self) -> bool:
        return not self.violations


@dataclass(eq=False)
class FeatureVector:
    """A finite float vector plus the names of its entries."""

    values: np.ndarray
    schema: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) != len(self.schema):
            raise ValueError("feature values and schema lengths differ")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


def _divisors(value: int) -> list:
    small, large = [], []
    d = 1
    while d * d <= value:
        if value % d == 0:
            small.append(d)
            if d != value // d:
                large.append(value // d)
        d += 1
    return small + large[::-1]


@lru_cache(maxsize=None)
def factorizations(value: int, slots: int) -> tuple:
    """All ordered `slots`-tuples of positive ints with the given product,
    in lexicographic order, e.g. factorizations(4, 2) -> (1,4),(2,2),(4,1)."""
    if not isinstance(value, int) or value < 1:
        raise ValueError(f"value must be a positive int, got {value!r}")
    if not isinstance(slots, int) or not 1 <= slots <= 4:
        raise ValueError(f"slots must be in 1..4, got {slots!r}")
    if slots == 1:
        return ((value,),)
    out = []
    for d in _divisors(value):
        for rest in factorizations(value // d, slots - 1):
            out.append((d,) + rest)
    return tuple(out)


def validate_mapping(m: Mapping, hw: HardwareConfig, layer: LayerShape) -> ConstraintReport:
    """Check a mapping against the dimension products of `layer` and the
    capacity and parallelism limits of `hw`.

    Capacity is only checked when every dimension product matches, since tile
    sizes of a mis-factored mapping are not meaningful.
    """
    from . import cost_model  # deferred; cost_model imports this module

    violations = []
    bounds = layer.bounds()
    dims_ok = True
    for d in DIMS:
        prod = m.factor_product(d)
        if prod != bounds[d]:
            violations.append(Violation("Dimension", d, prod, bounds[d]))
            dims_ok = False
    if dims_ok:
        fps = cost_model.tile_footprints(m, layer)
        used_l0 = sum(fps["L0"].values())
        if used_l0 > hw.rf_words:
            violations.append(Violation("Capacity", "L0", used_l0, hw.rf_words))
        used_l1 = sum(fps["L1"].values())
        if used_l1 > hw.gb_words:
            violations.append(Violation("Capacity", "L1", used_l1, hw.gb_words))
    par = m.spatial_product()
    if par > hw.num_pes:
        violations.append(Violation("Parallelism", "array", par, hw.num_pes))
    return ConstraintReport(tuple(violations))


def validate_hardware(hw: HardwareConfig, budget: HardwareBudget) -> ConstraintReport:
    """Check candidate-set membership and the aggregate PE and storage limits."""
    violations = []
    for name, choices in (
        ("pe_x", budget.pe_x_range),
        ("pe_y", budget.pe_y_range),
        ("rf_words", budget.rf_choices),
        ("gb_words", budget.gb_choices),
    ):
        v = getattr(hw, name)
        if v not in choices:
            violations.append(Violation("Budget", name, v, -1))
    if hw.num_pes > budget.max_pes:
        violations.append(Violation("Budget", "pe_count", hw.num_pes, budget.max_pes))
    if hw.storage_words > budget.max_storage_words:
        violations.append(Violation("Budget", "storage_words", hw.storage_words,
                                    budget.max_storage_words))
    return ConstraintReport(tuple(violations))


class _MappingTables:
    """Per-layer tables for the batched rejection sampler.

    For each dim the ordered (spatial, L0, L1, L2) factorizations of its
    bound; the feasibility mask over a batch of drawn index rows is computed
    with vectorized int64 arithmetic (exact Python ints for absurdly large
    layers where intermediate products could overflow).
    """

    def __init__(self, layer: LayerShape):
        self.layer = layer
        bounds = layer.bounds()
        self.options = [factorizations(bounds[d], 4) for d in DIMS]
        self.counts = np.array([len(o) for o in self.options], dtype=np.int64)
        self.arrays = [np.array(o, dtype=np.int64) for o in self.options]
        self.exact = layer.macs >= _FAST_MACS_LIMIT

    def feasible_rows(self, idx: np.ndarray, hw: HardwareConfig) -> np.ndarray:
        if self.exact:
            ok = np.zeros(len(idx), dtype=bool)
            for r in range(len(idx)):
                ok[r] = self._feasible_exact(idx[r], hw)
            return ok
        cols = [self.arrays[i][idx[:, i]] for i in range(len(DIMS))]
        s = {d: cols[i][:, 0] for i, d in enumerate(DIMS)}
        t0 = {d: cols[i][:, 1] for i, d in enumerate(DIMS)}
        t1 = {d: cols[i][:, 2] for i, d in enumerate(DIMS)}
        par = s["N"] * s["K"] * s["C"] * s["R"] * s["S"] * s["P"] * s["Q"]
        ok = par <= hw.num_pes
        w0 = t0["K"] * t0["C"] * t0["R"] * t0["S"]
        i0 = t0["N"] * t0["C"] * (t0["P"] + t0["R"] - 1) * (t0["Q"] + t0["S"] - 1)
        o0 = t0["N"] * t0["K"] * t0["P"] * t0["Q"]
        ok &= (w0 + i0 + o0) <= hw.rf_words
        c1 = {d: t0[d] * s[d] * t1[d] for d in DIMS}
        w1 = c1["K"] * c1["C"] * c1["R"] * c1["S"]
        i1 = c1["N"] * c1["C"] * (c1["P"] + c1["R"] - 1) * (c1["Q"] + c1["S"] - 1)
        o1 = c1["N"] * c1["K"] * c1["P"] * c1["Q"]
        ok &= (w1 + i1 + o1) <= hw.gb_words
        return ok

    def _feasible_exact(self, row, hw: HardwareConfig) -> bool:
        fac = {d: self.options[i][row[i]] for i, d in enumerate(DIMS)}
        par = 1
        for d in DIMS:
            par *= fac[d][0]
        if par > hw.num_pes:
            return False
        t0 = {d: fac[d][1] for d in DIMS}
        l0 = (t0["K"] * t0["C"] * t0["R"] * t0["S"]
              + t0["N"] * t0["C"] * (t0["P"] + t0["R"] - 1) * (t0["Q"] + t0["S"] - 1)
              + t0["N"] * t0["K"] * t0["P"] * t0["Q"])
        if l0 > hw.rf_words:
            return False
        c1 = {d: fac[d][0] * fac[d][1] * fac[d][2] for d in DIMS}
        l1 = (c1["K"] * c1["C"] * c1["R"] * c1["S"]
              + c1["N"] * c1["C"] * (c1["P"] + c1["R"] - 1) * (c1["Q"] + c1["S"] - 1)
              + c1["N"] * c1["K"] * c1["P"] * c1["Q"])
        return l1 <= hw.gb_words

    def build(self, row, rng: np.random.Generator) -> Mapping:
        temporal, spatial = {}, {}
        for i, d in enumerate(DIMS):
            s, t0, t1, t2 = self.options[i][row[i]]
            spatial[d] = s
            temporal[d] = {"L0": t0, "L1": t1, "L2": t2}
        perms = {lv: tuple(DIMS[j] for j in rng.permutation(len(DIMS)))
                 for lv in LEVELS}
        return Mapping(temporal, spatial, perms)


@lru_cache(maxsize=64)
def _mapping_tables(layer: LayerShape) -> _MappingTables:
    return _MappingTables(layer)


_BATCH = 1024


def mapping_pool_sampler(layer: LayerShape, hw: HardwareConfig) -> Callable:
    """Return sampler(rng, count, attempt_budget) -> (mappings, attempts).

    Draws factor-index rows in batches of 1024, keeps rows passing the
    capacity and parallelism checks (dimension products hold by
    construction), and draws the three level permutations only for returned
    mappings, in acceptance order.  Attempts count examined rows up to and
    including the one that filled the request.
    """
    tables = _mapping_tables(layer)

    def sampler(rng: np.random.Generator, count: int, attempt_budget: int):
        out = []
        attempts = 0
        while len(out) < count and attempts < attempt_budget:
            batch = min(_BATCH, attempt_budget - attempts)
            idx = rng.integers(0, tables.counts, size=(batch, len(DIMS)))
            ok = tables.feasible_rows(idx, hw)
            filled_at = None
            for r in np.flatnonzero(ok):
                out.append(tables.build(idx[r], rng))
                if len(out) == count:
                    filled_at = int(r)
                    break
            attempts += batch if filled_at is None else filled_at + 1
        return out, attempts

    return sampler


def sample_mapping(layer: LayerShape, hw: HardwareConfig, rng: np.random.Generator,
                   max_attempts: int = 100_000) -> Mapping:
    """Draw one mapping satisfying all dimension, capacity and parallelism
    constraints, or raise SamplingExhausted after max_attempts rejections."""
    pts, attempts = mapping_pool_sampler(layer, hw)(rng, 1, max_attempts)
    if not pts:
        raise SamplingExhausted(attempts, "mapping")
    return pts[0]


def hardware_pool_sampler(budget: HardwareBudget,
                          energy: EnergyTable = EnergyTable()) -> Callable:
    """Return sampler(rng, count, attempt_budget) -> (configs, attempts).

    Each attempt draws one value per parameter uniformly from its candidate
    set and keeps the config when the PE and storage limits hold.
    """
    pe_x = np.array(budget.pe_x_range, dtype=np.int64)
    pe_y = np.array(budget.pe_y_range, dtype=np.int64)
    rf = np.array(budget.rf_choices, dtype=np.int64)
    gb = np.array(budget.gb_choices, dtype=np.int64)
    counts = np.array([len(pe_x), len(pe_y), len(rf), len(gb)], dtype=np.int64)

    def sampler(rng: np.random.Generator, count: int, attempt_budget: int):
        out = []
        attempts = 0
        while len(out) < count and attempts < attempt_budget:
            batch = min(_BATCH, attempt_budget - attempts)
            idx = rng.integers(0, counts, size=(batch, 4))
            x, y = pe_x[idx[:, 0]], pe_y[idx[:, 1]]
            r, g = rf[idx[:, 2]], gb[idx[:, 3]]
            ok = (x * y <= budget.max_pes) & (x * y * r + g <= budget.max_storage_words)
            filled_at = None
            for i in np.flatnonzero(ok):
                out.append(HardwareConfig(int(x[i]), int(y[i]), int(r[i]), int(g[i]), energy))
                if len(out) == count:
                    filled_at = int(i)
                    break
            attempts += batch if filled_at is None else filled_at + 1
        return out, attempts

    return sampler


def sample_hardware(budget: HardwareBudget, rng: np.random.Generator,
                    max_attempts: int = 10_000,
                    energy: EnergyTable = EnergyTable()) -> HardwareConfig:
    """Draw one budget-feasible hardware config, or raise SamplingExhausted."""
    pts, attempts = hardware_pool_sampler(budget, energy)(rng, 1, max_attempts)
    if not pts:
        raise SamplingExhausted(attempts, "hardware config")
    return pts[0]


HW_SCHEMA = (
    "log2_pe_x", "log2_pe_y", "log2_rf_words", "log2_gb_words",
    "pe_aspect", "gb_to_rf_ratio", "log2_pe_count",
)


def hw_features(hw: HardwareConfig) -> FeatureVector:
    """Encode a hardware config for the surrogate models."""
    vals = (
        math.log2(hw.pe_x),
        math.log2(hw.pe_y),
        math.log2(hw.rf_words),
        math.log2(hw.gb_words),
        hw.pe_x / hw.pe_y,
        hw.gb_words / (hw.pe_x * hw.pe_y * hw.rf_words),
        math.log2(hw.num_pes),
    )
    return FeatureVector(np.array(vals), HW_SCHEMA)


def _sw_schema() -> tuple:
    names = []
    for d in DIMS:
        for slot in ("spatial", "L0", "L1", "L2"):
            names.append(f"log2_{d}_{slot}")
    names += ["util_L0", "util_L1", "util_spatial"]
    for lv in LEVELS:
        for d in DIMS:
            names.append(f"depth_{lv}_{d}")
    return tuple(names)


SW_SCHEMA = _sw_schema()


def sw_features(m: Mapping, hw: HardwareConfig, layer: LayerShape) -> FeatureVector:
    """Encode a mapping for the surrogate models: log2 of the 28 loop
    factors, L0/L1 buffer and spatial utilization, and the normalized depth
    of each dim in each level's loop order.

    The mapping is assumed to have passed validate_mapping for (hw, layer).
    """
    from . import cost_model

    vals = np.empty(len(SW_SCHEMA))
    i = 0
    for d in DIMS:
        t = m.temporal[d]
        vals[i] = math.log2(m.spatial[d])
        vals[i + 1] = math.log2(t["L0"])
        vals[i + 2] = math.log2(t["L1"])
        vals[i + 3] = math.log2(t["L2"])
        i += 4
    fps = cost_model.tile_footprints(m, layer)
    vals[i] = sum(fps["L0"].values()) / hw.rf_words
    vals[i + 1] = sum(fps["L1"].values()) / hw.gb_words
    vals[i + 2] = m.spatial_product() / hw.num_pes
    i += 3
    denom = len(DIMS) - 1
    for lv in LEVELS:
        perm = m.perms[lv]
        depth = {d: j / denom for j, d in enumerate(perm)}
        for d in DIMS:
            vals[i] = depth[d]
            i += 1
    return FeatureVector(vals, SW_SCHEMA)
