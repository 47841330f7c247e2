"""Acquisition functions and the rejection-sampled proposer.

Objectives are maximized (the optimizer feeds -log EDP).  Expected
improvement over the incumbent y* = max of observed targets:

    EI = (mu - y*) Phi(z) + sigma phi(z),  z = (mu - y*) / sigma

with the sigma -> 0 limit max(mu - y*, 0).  The confidence-bound
acquisition keeps its conventional name and is mu + lambda * sigma, i.e.
optimistic for maximization.

propose() draws a pool of input-feasible candidates by rejection sampling,
scores the pool under the acquisition, multiplies in the feasibility
probability of every constraint classifier, and returns the argmax (ties go
to the earliest draw).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import gp
from .design_space import SamplingExhausted


@dataclass(frozen=True)
class AcquisitionSpec:
    """kind is "ei" or "lcb"; lam scales the optimism bonus of lcb."""

    kind: str = "lcb"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ei", "lcb"):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if not math.isfinite(self.lam) or self.lam < 0.0:
            raise ValueError("lambda must be finite and >= 0")


@dataclass(frozen=True)
class ProposerConfig:
    pool_size: int = 150
    attempt_cap: int = 1_000_000

    def __post_init__(self):
        if self.pool_size < 1 or self.attempt_cap < 1:
            raise ValueError("pool_size and attempt_cap must be positive")


def expected_improvement(mu, sigma, best):
    """EI of a Gaussian belief over the incumbent `best` (maximization)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    delta = mu - best
    out = np.maximum(delta, 0.0)
    pos = sigma > 0.0
    if np.any(pos):
        z = np.where(pos, delta / np.where(pos, sigma, 1.0), 0.0)
        out = np.where(pos, delta * norm.cdf(z) + sigma * norm.pdf(z), out)
    if out.ndim == 0:
        return float(out)
    return out


def lcb(mu, sigma, lam: float = 1.0):
    """Optimistic confidence bound mu + lam * sigma for maximization."""
    out = np.asarray(mu, dtype=float) + lam * np.asarray(sigma, dtype=float)
    if out.ndim == 0:
        return float(out)
    return out


def feasibility_weight(value, probs: Sequence):
    """Scale acquisition values by the product of feasibility probabilities.

    Accepts scalars or arrays for both arguments.
    """
    out = np.asarray(value, dtype=float)
    for p in probs:
        out = out * np.asarray(p, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass
class Proposal:
    point: object
    attempts: int
    pool_size: int


def propose(objective_model: gp.GPModel, constraint_models: Sequence[gp.GPModel],
            feature_fn: Callable, sampler: Callable, acq: AcquisitionSpec,
            cfg: ProposerConfig, rng: np.random.Generator) -> Proposal:
    """Pick the next point to evaluate.

    sampler(rng, count, attempt_budget) must return (points, attempts) with
    every point satisfying the input constraints.  Raises SamplingExhausted
    when not a single candidate appears within cfg.attempt_cap.  With
    constraint models present, lcb scores are shifted to be nonnegative
    within the pool before weighting so that the feasibility product cannot
    flip their sign.
    """
    pool, attempts = sampler(rng, cfg.pool_size, cfg.attempt_cap)
    if not pool:
        raise SamplingExhausted(attempts, "candidate")
    feats = [feature_fn(p) for p in pool]
    mu, var = gp.posterior_batch(objective_model, feats)
    sigma = np.sqrt(var)
    if acq.kind == "ei":
        if len(objective_model.y) == 0:
            raise ValueError("expected improvement needs an observed incumbent")
        best = float(np.max(objective_model.y))
        scores = expected_improvement(mu, sigma, best)
    else:
        scores = lcb(mu, sigma, acq.lam)
    scores = np.atleast_1d(np.asarray(scores, dtype=float))
    if constraint_models:
        if acq.kind == "lcb":
            scores = scores - scores.min()
        for model in constraint_models:
            scores = scores * gp.classify_batch(model, feats)
    best_i = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best_i]:
            best_i = i
    return Proposal(point=pool[best_i], attempts=attempts, pool_size=len(pool))
