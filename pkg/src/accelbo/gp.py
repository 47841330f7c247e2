"""Gaussian process surrogates with a constant mean.

Kernels: squared exponential a^2 exp(-||x-x'||^2 / l^2) with one shared
lengthscale, a linear kernel a^2 x.x' over feature vectors, sums of these,
plus an independent noise variance tau^2 on the diagonal.  Features are
z-scored with training-set statistics before any kernel evaluation
(constant features keep unit scale).

Hyperparameters are chosen by coordinate ascent of the log marginal
likelihood over log-spaced grids.  For a pure linear kernel the Gram matrix
has rank at most d, so models with more than 64 observations solve in the
d x d feature space instead of the n x n function space; the two routes are
algebraically identical including the diagonal jitter.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import norm

from .design_space import FeatureVector

JITTER = 1e-8
AMPLITUDE_GRID = np.logspace(-2, 4, 13)
LENGTHSCALE_GRID = np.logspace(-2, 4, 13)
NOISE_GRID = np.logspace(-8, 2, 11)
_RIDGE_MIN_N = 65  # below this the plain Cholesky is at least as cheap


@dataclass(frozen=True)
class SquaredExponential:
    amplitude: float = 1.0
    lengthscale: float = 1.0


@dataclass(frozen=True)
class Linear:
    amplitude: float = 1.0
    schema: Optional[tuple] = None


@dataclass(frozen=True)
class Sum:
    parts: tuple


Kernel = Union[SquaredExponential, Linear, Sum]


@dataclass(frozen=True)
class KernelSpec:
    """A covariance function plus the independent noise variance tau^2."""

    kernel: Kernel
    noise: float = 0.0

    def __post_init__(self):
        if not (self.noise >= 0.0) or not math.isfinite(self.noise):
            raise ValueError("noise variance must be finite and >= 0")


def _check_schema(kernel: Kernel, schema: tuple):
    if isinstance(kernel, Linear) and kernel.schema is not None and tuple(kernel.schema) != tuple(schema):
        raise ValueError("feature schema does not match the kernel's schema")
    if isinstance(kernel, Sum):
        for part in kernel.parts:
            _check_schema(part, schema)


def kernel_eval(kernel: Kernel, a: FeatureVector, b: FeatureVector) -> float:
    """Covariance between two raw feature vectors (no standardization here)."""
    if a.schema != b.schema:
        raise ValueError("feature vectors have different schemas")
    _check_schema(kernel, a.schema)
    return float(_kernel_matrix(kernel, a.values[None, :], b.values[None, :])[0, 0])


def _kernel_matrix(kernel: Kernel, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if isinstance(kernel, SquaredExponential):
        d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
        np.maximum(d2, 0.0, out=d2)
        return kernel.amplitude ** 2 * np.exp(-d2 / kernel.lengthscale ** 2)
    if isinstance(kernel, Linear):
        return kernel.amplitude ** 2 * (A @ B.T)
    if isinstance(kernel, Sum):
        out = _kernel_matrix(kernel.parts[0], A, B)
        for part in kernel.parts[1:]:
            out = out + _kernel_matrix(part, A, B)
        return out
    raise TypeError(f"unknown kernel {kernel!r}")


class _EmptySolver:
    lml = None

    def posterior(self, model, Xq):
        m = np.full(len(Xq), model.mean_const)
        v = np.array([_kernel_matrix(model.spec.kernel, x[None, :], x[None, :])[0, 0]
                      for x in Xq])
        return m, v


class _CholSolver:
    """Posterior through a Cholesky factor of K_XX + (tau^2 + jitter) I."""

    def __init__(self, model, Xs, resid):
        n = len(Xs)
        s = model.spec.noise + JITTER
        K = _kernel_matrix(model.spec.kernel, Xs, Xs)
        K[np.diag_indices(n)] += s
        self.L = np.linalg.cholesky(K)
        self.Xs = Xs
        self.alpha = cho_solve((self.L, True), resid)
        self.lml = (-0.5 * float(resid @ self.alpha)
                    - float(np.sum(np.log(np.diag(self.L))))
                    - 0.5 * n * math.log(2.0 * math.pi))

    def posterior(self, model, Xq):
        Kx = _kernel_matrix(model.spec.kernel, Xq, self.Xs)
        mu = model.mean_const + Kx @ self.alpha
        v = solve_triangular(self.L, Kx.T, lower=True)
        prior = np.array([_kernel_matrix(model.spec.kernel, x[None, :], x[None, :])[0, 0]
                          for x in Xq])
        var = prior - np.sum(v * v, axis=0)
        return mu, np.maximum(var, 0.0)


class _RidgeSolver:
    """Weight-space route for a pure linear kernel: factor a^2 X'X + s I_d."""

    def __init__(self, model, Xs, resid):
        n, d = Xs.shape
        amp2 = model.spec.kernel.amplitude ** 2
        s = model.spec.noise + JITTER
        B = amp2 * (Xs.T @ Xs)
        B[np.diag_indices(d)] += s
        self.Lb = np.linalg.cholesky(B)
        b = Xs.T @ resid
        self.z = cho_solve((self.Lb, True), b)
        self.amp2 = amp2
        self.s = s
        quad = (float(resid @ resid) - amp2 * float(b @ self.z)) / s
        logdet = (n - d) * math.log(s) + 2.0 * float(np.sum(np.log(np.diag(self.Lb))))
        self.lml = -0.5 * quad - 0.5 * logdet - 0.5 * n * math.log(2.0 * math.pi)

    def posterior(self, model, Xq):
        mu = model.mean_const + self.amp2 * (Xq @ self.z)
        u = cho_solve((self.Lb, True), Xq.T)
        var = self.s * self.amp2 * np.sum(Xq.T * u, axis=0)
        return mu, np.maximum(var, 0.0)


@dataclass(eq=False)
class GPModel:
    """Immutable fitted state: raw inputs, targets, kernel spec, constant
    mean, standardization statistics, and a cached SPD factorization."""

    schema: Optional[tuple]
    X: np.ndarray
    y: np.ndarray
    spec: KernelSpec
    mean_const: float
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    solver: object


def _stack(xs: Sequence[FeatureVector]):
    if len(xs) == 0:
        return None, np.zeros((0, 0))
    schema = xs[0].schema
    for x in xs:
        if x.schema != schema:
            raise ValueError("feature vectors have mixed schemas")
    return schema, np.stack([x.values for x in xs])


def _standardize_stats(X: np.ndarray):
    if len(X) == 0:
        return np.zeros(X.shape[1]), np.ones(X.shape[1])
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0.0, sd, 1.0)
    return mu, sd


def build_model(xs: Sequence[FeatureVector], ys: Sequence[float], spec: KernelSpec,
                mean_const: Optional[float] = None) -> GPModel:
    """Assemble a GPModel with the given hyperparameters.  The mean constant
    defaults to mean(y) (0 for an empty dataset)."""
    schema, X = _stack(xs)
    y = np.asarray(list(ys), dtype=float)
    if len(X) != len(y):
        raise ValueError("inputs and targets differ in length")
    if schema is not None:
        _check_schema(spec.kernel, schema)
    if mean_const is None:
        mean_const = float(np.mean(y)) if len(y) else 0.0
    mu, sd = _standardize_stats(X)
    model = GPModel(schema=schema, X=X, y=y, spec=spec, mean_const=float(mean_const),
                    feat_mean=mu, feat_scale=sd, solver=None)
    if len(y) == 0:
        model.solver = _EmptySolver()
    else:
        Xs = (X - mu) / sd
        resid = y - model.mean_const
        if isinstance(spec.kernel, Linear) and len(y) >= _RIDGE_MIN_N:
            model.solver = _RidgeSolver(model, Xs, resid)
        else:
            model.solver = _CholSolver(model, Xs, resid)
    return model


def _query_matrix(model: GPModel, xs: Sequence[FeatureVector]) -> np.ndarray:
    X = []
    for x in xs:
        if model.schema is not None and x.schema != model.schema:
            raise ValueError("query schema does not match the model")
        X.append(x.values)
    Xq = np.stack(X)
    if model.schema is None:  # empty model: no stats, evaluate raw
        return Xq
    return (Xq - model.feat_mean) / model.feat_scale


def posterior(model: GPModel, x: FeatureVector):
    """Posterior mean and variance of the latent function at x.  An empty
    model returns the prior (mean constant, k(x, x))."""
    mu, var = model.solver.posterior(model, _query_matrix(model, [x]))
    return float(mu[0]), float(var[0])


def posterior_batch(model: GPModel, xs: Sequence[FeatureVector]):
    if len(xs) == 0:
        return np.zeros(0), np.zeros(0)
    return model.solver.posterior(model, _query_matrix(model, xs))


def log_marginal_likelihood(model: GPModel) -> float:
    """Gaussian log evidence of the targets under N(mean, K + tau^2 I)."""
    if model.solver.lml is None:
        raise ValueError("log marginal likelihood needs at least one observation")
    return float(model.solver.lml)


def classify(model: GPModel, x: FeatureVector) -> float:
    """Probability that the +1/-1 labelled latent is positive at x, with the
    posterior squashed as Phi(mu / sqrt(1 + var))."""
    mu, var = posterior(model, x)
    return float(norm.cdf(mu / math.sqrt(1.0 + var)))


def classify_batch(model: GPModel, xs: Sequence[FeatureVector]) -> np.ndarray:
    mu, var = posterior_batch(model, xs)
    return norm.cdf(mu / np.sqrt(1.0 + var))


def _param_slots(kernel: Kernel, path=()):
    if isinstance(kernel, SquaredExponential):
        return [(path, "amplitude"), (path, "lengthscale")]
    if isinstance(kernel, Linear):
        return [(path, "amplitude")]
    if isinstance(kernel, Sum):
        out = []
        for i, part in enumerate(kernel.parts):
            out += _param_slots(part, path + (i,))
        return out
    raise TypeError(f"unknown kernel {kernel!r}")


def _replace_param(kernel: Kernel, path, name, value):
    if path:
        parts = list(kernel.parts)
        parts[path[0]] = _replace_param(parts[path[0]], path[1:], name, value)
        return Sum(tuple(parts))
    return dataclasses.replace(kernel, **{name: value})


class _LinearLML:
    """O(d) likelihood evaluations for amp/noise grids of a linear kernel."""

    def __init__(self, Xs, resid):
        self.n, d = Xs.shape
        A = Xs.T @ Xs
        lam, Q = np.linalg.eigh(A)
        self.lam = np.maximum(lam, 0.0)
        self.bt = Q.T @ (Xs.T @ resid)
        self.rr = float(resid @ resid)
        self.d = d

    def __call__(self, amp: float, s: float) -> float:
        denom = amp * amp * self.lam + s
        quad = (self.rr - amp * amp * float(np.sum(self.bt ** 2 / denom))) / s
        logdet = (self.n - self.d) * math.log(s) + float(np.sum(np.log(denom)))
        return -0.5 * quad - 0.5 * logdet - 0.5 * self.n * math.log(2.0 * math.pi)


class _SELML:
    """O(n) likelihood evaluations per (amp, noise) with one
    eigendecomposition cached per lengthscale."""

    def __init__(self, Xs, resid):
        self.n = len(Xs)
        self.D2 = (np.sum(Xs * Xs, axis=1)[:, None] + np.sum(Xs * Xs, axis=1)[None, :]
                   - 2.0 * (Xs @ Xs.T))
        np.maximum(self.D2, 0.0, out=self.D2)
        self.resid = resid
        self.cache = {}

    def __call__(self, amp: float, lengthscale: float, s: float) -> float:
        key = float(lengthscale)
        if key not in self.cache:
            B = np.exp(-self.D2 / (lengthscale * lengthscale))
            lam, Q = np.linalg.eigh(B)
            self.cache[key] = (np.maximum(lam, 0.0), Q.T @ self.resid)
        lam, yt = self.cache[key]
        denom = amp * amp * lam + s
        quad = float(np.sum(yt ** 2 / denom))
        logdet = float(np.sum(np.log(denom)))
        return -0.5 * quad - 0.5 * logdet - 0.5 * self.n * math.log(2.0 * math.pi)


def fit(xs: Sequence[FeatureVector], ys: Sequence[float], kernel: Optional[Kernel] = None,
        *, fit_noise: bool = False, noise: float = 0.0, sweeps: int = 3) -> GPModel:
    """Choose kernel hyperparameters by coordinate ascent of the log
    marginal likelihood.

    Amplitudes and lengthscales scan 13 log-spaced points over 1e-2..1e4;
    with fit_noise the noise variance scans 11 log-spaced points over
    1e-8..1e2, otherwise it stays at `noise`.  Three sweeps, ties broken
    toward the smaller value.  The mean constant is mean(y).
    """
    if len(xs) == 0:
        raise ValueError("fit needs at least one observation")
    if kernel is None:
        kernel = SquaredExponential()
    schema, X = _stack(xs)
    y = np.asarray(list(ys), dtype=float)
    if len(X) != len(y):
        raise ValueError("inputs and targets differ in length")
    _check_schema(kernel, schema)
    c = float(np.mean(y))
    mu, sd = _standardize_stats(X)
    Xs = (X - mu) / sd
    resid = y - c

    slots = _param_slots(kernel)
    state = {slot: float(getattr(_subkernel(kernel, slot[0]), slot[1])) for slot in slots}
    noise_slot = ("noise", "noise")
    if fit_noise:
        state[noise_slot] = float(NOISE_GRID[0])
        order = slots + [noise_slot]
    else:
        state[noise_slot] = float(noise)
        order = slots

    if isinstance(kernel, Linear):
        core = _LinearLML(Xs, resid)
        evaluate = lambda st: core(st[slots[0]], st[noise_slot] + JITTER)
    elif isinstance(kernel, SquaredExponential):
        core = _SELML(Xs, resid)
        evaluate = lambda st: core(st[((), "amplitude")], st[((), "lengthscale")],
                                   st[noise_slot] + JITTER)
    else:
        def evaluate(st):
            k = kernel
            for slot in slots:
                k = _replace_param(k, slot[0], slot[1], st[slot])
            n = len(y)
            K = _kernel_matrix(k, Xs, Xs)
            K[np.diag_indices(n)] += st[noise_slot] + JITTER
            try:
                L = np.linalg.cholesky(K)
            except np.linalg.LinAlgError:
                return -math.inf
            a = cho_solve((L, True), resid)
            return (-0.5 * float(resid @ a) - float(np.sum(np.log(np.diag(L))))
                    - 0.5 * n * math.log(2.0 * math.pi))

    memo = {}

    def lml_at(st):
        key = tuple(st[k] for k in order) + (st[noise_slot],)
        if key not in memo:
            memo[key] = evaluate(st)
        return memo[key]

    for _ in range(sweeps):
        for slot in order:
            grid = NOISE_GRID if slot == noise_slot else (
                AMPLITUDE_GRID if slot[1] == "amplitude" else LENGTHSCALE_GRID)
            best_v, best_l = None, -math.inf
            for v in grid:
                trial = dict(state)
                trial[slot] = float(v)
                l = lml_at(trial)
                if l > best_l:
                    best_v, best_l = float(v), l
            state[slot] = best_v

    for slot in slots:
        kernel = _replace_param(kernel, slot[0], slot[1], state[slot])
    spec = KernelSpec(kernel, state[noise_slot])
    return build_model(xs, ys, spec, mean_const=c)


def _subkernel(kernel: Kernel, path):
    for i in path:
        kernel = kernel.parts[i]
    return kernel
