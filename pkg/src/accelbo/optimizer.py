"""Nested Bayesian optimization of hardware configs and per-layer mappings.

The outer loop searches hardware; each evaluated config runs one software
search per layer and sums the best energy-delay products.  Both loops start
from a constrained random sample and then propose through surrogate models:

  * software: noise-free GP, linear kernel over mapping features; the
    mapping sampler enforces all input constraints, so no classifiers.
  * hardware: linear-kernel GP with a fitted noise variance (the inner
    searches are stochastic) trained on feasible trials only, plus a
    squared-exponential feasibility classifier trained on +1/-1 labels of
    every trial; acquisition values are feasibility-weighted.

Searches maximize -log EDP.  Only evaluated points consume trial budget;
rejected sampler draws are reported separately in the trace.

Seed discipline: every derived stream comes from numpy SeedSequence
entropy.  Per-trial seeds extend the run seed with the trial index, and
per-layer seeds extend that with the seven layer bounds, so identical
layer shapes under the same hardware trial search identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import acquisition, cost_model, gp
from .acquisition import AcquisitionSpec, ProposerConfig
from .design_space import (DEFAULT_BUDGET, EnergyTable, HardwareBudget, HardwareConfig,
                           LayerShape, Mapping, SamplingExhausted, hardware_pool_sampler,
                           hw_features, mapping_pool_sampler, sw_features)
from .workloads import Workload

DEFAULT_HW_TRIALS = 50
DEFAULT_SW_BUDGET = 250


def derive_seed(*parts) -> int:
    """Fold integer parts into a fresh 64-bit seed via SeedSequence."""
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts])
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])


def _layer_seed(seed: int, shape: LayerShape) -> int:
    return derive_seed(seed, shape.n, shape.k, shape.c, shape.r, shape.s, shape.p, shape.q)


@dataclass
class Observation:
    """One evaluated point: a Mapping in software traces, a HardwareConfig
    in hardware traces.  Infeasible points carry edp = objective = None."""

    trial: int
    point: object
    feasible: bool
    edp: Optional[float]
    objective: Optional[float]


@dataclass
class OptimizationTrace:
    observations: list = field(default_factory=list)
    sample_attempts: list = field(default_factory=list)  # rejected draws included

    def add(self, obs: Observation, attempts: int):
        self.observations.append(obs)
        self.sample_attempts.append(attempts)

    def best(self) -> Optional[Observation]:
        out = None
        for obs in self.observations:
            if obs.feasible and (out is None or obs.edp < out.edp):
                out = obs  # strict <: ties keep the earlier trial
        return out

    def best_so_far(self) -> list:
        out, cur = [], math.inf
        for obs in self.observations:
            if obs.feasible and obs.edp < cur:
                cur = obs.edp
            out.append(cur)
        return out


def normalize_trace(trace: OptimizationTrace) -> list:
    """Best EDP of the whole trace divided by the best-so-far at each trial:
    nondecreasing, 0.0 before the first feasible trial, final value 1.0."""
    best = trace.best()
    if best is None:
        raise ValueError("normalize_trace needs at least one feasible observation")
    return [best.edp / v for v in trace.best_so_far()]


@dataclass
class MappingSearchResult:
    best_mapping: Optional[Mapping]
    best_edp: Optional[float]
    trace: OptimizationTrace

    @property
    def feasible(self) -> bool:
        return self.best_mapping is not None


def software_search(hw: HardwareConfig, layer: LayerShape, budget: int = DEFAULT_SW_BUDGET,
                    seed: int = 0, acq: AcquisitionSpec = AcquisitionSpec(),
                    cfg: ProposerConfig = ProposerConfig()) -> MappingSearchResult:
    """Search the mapping space of one layer on fixed hardware.

    Trial 1 evaluates a constrained random sample; later trials fit the
    linear-kernel GP to the trials so far and evaluate the proposer's pick.
    If sampling exhausts (no feasible mapping within the attempt cap) the
    search stops early and reports infeasibility via best_mapping None.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    sampler = mapping_pool_sampler(layer, hw)
    trace = OptimizationTrace()
    feats, objs = [], []
    for trial in range(1, budget + 1):
        if not objs:
            pool, attempts = sampler(rng, 1, cfg.attempt_cap)
            if not pool:
                break
            m = pool[0]
        else:
            model = gp.fit(feats, objs, gp.Linear(), fit_noise=False)
            try:
                prop = acquisition.propose(model, (), lambda p: sw_features(p, hw, layer),
                                           sampler, acq, cfg, rng)
            except SamplingExhausted:
                break
            m, attempts = prop.point, prop.attempts
        edp = cost_model.evaluate_edp(m, hw, layer).edp
        obj = -math.log(edp)
        trace.add(Observation(trial, m, True, edp, obj), attempts)
        feats.append(sw_features(m, hw, layer))
        objs.append(obj)
    best = trace.best()
    if best is None:
        return MappingSearchResult(None, None, trace)
    return MappingSearchResult(best.point, best.edp, trace)


def random_search_sw(hw: HardwareConfig, layer: LayerShape, budget: int = DEFAULT_SW_BUDGET,
                     seed: int = 0, cfg: ProposerConfig = ProposerConfig()) -> MappingSearchResult:
    """Baseline: every trial evaluates the first feasible random draw."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    sampler = mapping_pool_sampler(layer, hw)
    trace = OptimizationTrace()
    for trial in range(1, budget + 1):
        pool, attempts = sampler(rng, 1, cfg.attempt_cap)
        if not pool:
            break
        m = pool[0]
        edp = cost_model.evaluate_edp(m, hw, layer).edp
        trace.add(Observation(trial, m, True, edp, -math.log(edp)), attempts)
    best = trace.best()
    if best is None:
        return MappingSearchResult(None, None, trace)
    return MappingSearchResult(best.point, best.edp, trace)


def _evaluate_hardware(hw: HardwareConfig, workload: Workload, sw_budget: int, seed: int,
                       acq: AcquisitionSpec, cfg: ProposerConfig):
    """Run one software search per layer; returns (total_edp or None,
    per-label MappingSearchResult dict).  Stops at the first layer with no
    feasible mapping."""
    results = {}
    total = 0.0
    for entry in workload.layers:
        res = software_search(hw, entry.shape, sw_budget, _layer_seed(seed, entry.shape),
                              acq=acq, cfg=cfg)
        results[entry.label] = res
        if not res.feasible:
            return None, results
        total += res.best_edp
    return total, results


def hardware_objective(hw: HardwareConfig, workload: Workload, sw_budget: int = DEFAULT_SW_BUDGET,
                       seed: int = 0, acq: AcquisitionSpec = AcquisitionSpec(),
                       cfg: ProposerConfig = ProposerConfig(), trial: int = 0) -> Observation:
    """Score one hardware config: the sum over layers of the best EDP found
    by per-layer software searches, or an infeasible observation when any
    layer admits no feasible mapping."""
    total, _ = _evaluate_hardware(hw, workload, sw_budget, seed, acq, cfg)
    if total is None:
        return Observation(trial, hw, False, None, None)
    return Observation(trial, hw, True, total, -math.log(total))


@dataclass
class CodesignResult:
    """best_* fields are None/empty when no hardware trial was feasible.
    sw_traces[i] maps layer labels to the MappingSearchResult of hardware
    trial i+1 (layers after an infeasible one are absent)."""

    best_hardware: Optional[HardwareConfig]
    best_mappings: dict
    best_total_edp: Optional[float]
    hw_trace: OptimizationTrace
    sw_traces: list


def _codesign_loop(workload: Workload, budget: HardwareBudget, hw_trials: int,
                   sw_budget: int, seed: int, acq: AcquisitionSpec, cfg: ProposerConfig,
                   energy: EnergyTable, use_model: bool) -> CodesignResult:
    if hw_trials < 1:
        raise ValueError("hw_trials must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, 0x48575250))
    sampler = hardware_pool_sampler(budget, energy)
    trace = OptimizationTrace()
    sw_traces = []
    obj_feats, objs = [], []  # feasible trials only
    cls_feats, labels = [], []  # every trial
    for trial in range(1, hw_trials + 1):
        if use_model and objs:
            obj_model = gp.fit(obj_feats, objs, gp.Linear(), fit_noise=True)
            cls_model = gp.fit(cls_feats, labels, gp.SquaredExponential(), fit_noise=False)
            try:
                prop = acquisition.propose(obj_model, (cls_model,), hw_features,
                                           sampler, acq, cfg, rng)
            except SamplingExhausted:
                break
            hw, attempts = prop.point, prop.attempts
        else:
            pool, attempts = sampler(rng, 1, cfg.attempt_cap)
            if not pool:
                break
            hw = pool[0]
        total, layer_results = _evaluate_hardware(hw, workload, sw_budget,
                                                  derive_seed(seed, trial), acq, cfg)
        feasible = total is not None
        obs = Observation(trial, hw, feasible, total,
                          -math.log(total) if feasible else None)
        trace.add(obs, attempts)
        sw_traces.append(layer_results)
        f = hw_features(hw)
        cls_feats.append(f)
        labels.append(1.0 if feasible else -1.0)
        if feasible:
            obj_feats.append(f)
            objs.append(obs.objective)
    best = trace.best()
    if best is None:
        return CodesignResult(None, {}, None, trace, sw_traces)
    layer_results = sw_traces[best.trial - 1]
    mappings = {label: res.best_mapping for label, res in layer_results.items()}
    return CodesignResult(best.point, mappings, best.edp, trace, sw_traces)


def codesign(workload: Workload, budget: HardwareBudget = DEFAULT_BUDGET,
             hw_trials: int = DEFAULT_HW_TRIALS, sw_budget: int = DEFAULT_SW_BUDGET,
             seed: int = 0, acq: AcquisitionSpec = AcquisitionSpec(),
             cfg: ProposerConfig = ProposerConfig(),
             energy: EnergyTable = EnergyTable()) -> CodesignResult:
    """Joint hardware and mapping search.  Trial 1 samples hardware at
    random; later trials propose through the feasibility-weighted
    acquisition (falling back to random sampling until the first feasible
    trial exists, since the objective model needs data)."""
    return _codesign_loop(workload, budget, hw_trials, sw_budget, seed, acq, cfg,
                          energy, use_model=True)


def random_search_hw(workload: Workload, budget: HardwareBudget = DEFAULT_BUDGET,
                     hw_trials: int = DEFAULT_HW_TRIALS, sw_budget: int = DEFAULT_SW_BUDGET,
                     seed: int = 0, acq: AcquisitionSpec = AcquisitionSpec(),
                     cfg: ProposerConfig = ProposerConfig(),
                     energy: EnergyTable = EnergyTable()) -> CodesignResult:
    """Baseline: every hardware trial is a first-feasible random draw; the
    per-layer software searches are unchanged."""
    return _codesign_loop(workload, budget, hw_trials, sw_budget, seed, acq, cfg,
                          energy, use_model=False)
