"""Gaussian process regression for state-transition data.

One independent zero-mean GP is fitted per output dimension.  The fitted
model keeps, for every dimension ``i``, the weight vector

    h(i) = (K_i(X, X) + noise_i * I)^-1  Y[:, i]

so that the posterior mean is the weighted kernel sum
``mean_i(x) = sum_j k_i(x, X[:, j]) * h_j(i)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError, UsageError
from .kernels import Hyperparameters, Kernel, gram_matrix
from .optim import OptimConfig, minimize_cg

log = logging.getLogger(__name__)

JITTER_LEVELS = (0.0, 1e-10, 1e-8, 1e-6)

__all__ = [
    "TrainingData",
    "DimModel",
    "GpSsmModel",
    "factorize",
    "fit",
    "predict_mean",
    "predict_variance",
    "log_marginal_likelihood",
    "optimize_hyperparameters",
    "fit_optimized",
]


@dataclass(frozen=True)
class TrainingData:
    """State-transition pairs.

    ``X`` has shape ``(n, m)``: column ``j`` is the j-th training input.
    ``Y`` has shape ``(m, n)``: row ``j`` is the successor of that input.
    """

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        Y = np.array(self.Y, dtype=float, ndmin=2)
        if X.ndim != 2 or Y.ndim != 2:
            raise UsageError("X and Y must be 2-D arrays")
        n, m = X.shape
        if n < 1 or m < 1:
            raise UsageError(f"need n >= 1 and m >= 1, got X of shape {X.shape}")
        if Y.shape != (m, n):
            raise UsageError(f"Y must have shape (m, n) = {(m, n)}, got {Y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise UsageError("training data contains non-finite values")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_pairs(cls, inputs, outputs) -> "TrainingData":
        """Build from row-per-pair arrays of shape ``(m, n)`` each."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        return cls(inputs.T, outputs)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def permuted(self, perm) -> "TrainingData":
        perm = np.asarray(perm)
        return TrainingData(self.X[:, perm], self.Y[perm])


def factorize(K, noise_variance):
    """Cholesky factor of ``K + noise*I``, escalating diagonal jitter on failure.

    Jitter levels are relative to ``max(1, mean(diag K))``.  Returns the lower
    factor and the absolute jitter that was added.
    """
    K = np.asarray(K, dtype=float)
    scale = max(1.0, float(np.mean(np.diag(K))))
    base = K + noise_variance * np.eye(K.shape[0])
    for level in JITTER_LEVELS:
        jitter = level * scale
        try:
            L = scipy.linalg.cholesky(base + jitter * np.eye(K.shape[0]), lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            continue
        if jitter:
            log.debug("cholesky needed jitter %.3g", jitter)
        return L, jitter
    raise NumericalError(
        f"Cholesky factorization failed even with jitter {JITTER_LEVELS[-1] * scale:.3g} "
        f"(noise variance {noise_variance:.3g}, m={K.shape[0]})"
    )


@dataclass(frozen=True)
class DimModel:
    hyper: Hyperparameters
    weights: np.ndarray
    chol: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @property
    def kernel(self) -> Kernel:
        return self.hyper.kernel

    @property
    def noise_variance(self) -> float:
        return self.hyper.noise_variance

    def solve(self, b):
        return scipy.linalg.cho_solve((self.chol, True), b)


@dataclass(frozen=True)
class GpSsmModel:
    """Fitted deterministic GP-SSM: the mean map ``x -> f(x)``."""

    training: TrainingData
    dims: tuple[DimModel, ...]

    @property
    def n(self) -> int:
        return self.training.n

    @property
    def m(self) -> int:
        return self.training.m

    @property
    def X(self) -> np.ndarray:
        return self.training.X

    @property
    def kernels(self) -> list[Kernel]:
        return [d.kernel for d in self.dims]

    @property
    def hypers(self) -> list[Hyperparameters]:
        return [d.hyper for d in self.dims]

    @property
    def weights(self) -> np.ndarray:
        """``(n, m)`` array whose row ``i`` is h(i)."""
        return np.array([d.weights for d in self.dims])


def _as_hyper_list(hyper, n) -> list[Hyperparameters]:
    if isinstance(hyper, Hyperparameters):
        return [hyper] * n
    hyper = list(hyper)
    if len(hyper) != n:
        raise UsageError(f"need one Hyperparameters per output dimension ({n}), got {len(hyper)}")
    for h in hyper:
        if not isinstance(h, Hyperparameters):
            raise UsageError(f"expected Hyperparameters, got {type(h).__name__}")
    return hyper


def _fit_dim(X, y, hyper: Hyperparameters, weights=None) -> DimModel:
    K = gram_matrix(hyper.kernel, X)
    L, jitter = factorize(K, hyper.noise_variance)
    if weights is None:
        w = scipy.linalg.cho_solve((L, True), y)
        if jitter == 0.0:
            # one step of iterative refinement against the exact system
            r = y - (K @ w + hyper.noise_variance * w)
            w = w + scipy.linalg.cho_solve((L, True), r)
    else:
        w = np.array(weights, dtype=float)
    w.setflags(write=False)
    return DimModel(hyper, w, L, jitter)


def fit(data: TrainingData, hyper: Hyperparameters | Sequence[Hyperparameters]) -> GpSsmModel:
    """Fit one GP per output dimension and precompute the weight vectors."""
    hypers = _as_hyper_list(hyper, data.n)
    dims = tuple(_fit_dim(data.X, data.Y[:, i], h) for i, h in enumerate(hypers))
    return GpSsmModel(data, dims)


def _query(model: GpSsmModel, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    P = np.atleast_2d(x)
    if P.ndim != 2 or P.shape[1] != model.n:
        raise UsageError(f"state must have {model.n} coordinates, got shape {x.shape}")
    return P, single


def predict_mean(model: GpSsmModel, x) -> np.ndarray:
    """Posterior mean ``f(x)``; accepts one state ``(n,)`` or a batch ``(N, n)``."""
    P, single = _query(model, x)
    train = model.X.T
    out = np.empty((P.shape[0], model.n))
    for i, d in enumerate(model.dims):
        out[:, i] = d.kernel.pairwise(P, train) @ d.weights
    return out[0] if single else out


def predict_variance(model: GpSsmModel, x, return_clamp: bool = False):
    """Per-dimension predictive variance.

    Uses ``(K + noise*I)^-1`` (the same matrix as the mean), not the noiseless
    ``K^-1``.  Small negative round-off is clamped to zero; with
    ``return_clamp=True`` the largest clamped magnitude is returned as well.
    """
    P, single = _query(model, x)
    train = model.X.T
    var = np.empty((P.shape[0], model.n))
    for i, d in enumerate(model.dims):
        Ks = d.kernel.pairwise(P, train)
        v = scipy.linalg.solve_triangular(d.chol, Ks.T, lower=True)
        var[:, i] = d.kernel.diag(P) - np.einsum("ij,ij->j", v, v)
    clamp = float(max(0.0, -var.min()))
    if clamp > 0:
        log.debug("clamped negative predictive variance of magnitude %.3g", clamp)
    var = np.maximum(var, 0.0)
    var = var[0] if single else var
    return (var, clamp) if return_clamp else var


def log_marginal_likelihood(data: TrainingData, hyper: Hyperparameters, dim: int):
    """Log marginal likelihood of output ``dim`` and its gradient.

    The gradient is taken with respect to ``hyper.log_params()``: the free
    kernel log-parameters followed by ``log sigma_n``.
    """
    if not 0 <= dim < data.n:
        raise UsageError(f"dim must be in [0, {data.n}), got {dim}")
    y = data.Y[:, dim]
    m = data.m
    K = gram_matrix(hyper.kernel, data.X)
    L, jitter = factorize(K, hyper.noise_variance)
    alpha = scipy.linalg.cho_solve((L, True), y)
    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * m * math.log(2 * math.pi)

    Kinv = scipy.linalg.cho_solve((L, True), np.eye(m))
    inner = np.outer(alpha, alpha) - Kinv
    grads = [0.5 * float(np.sum(inner * dK)) for dK in hyper.kernel.param_grads(data.X.T, K)]
    grads.append(hyper.noise_variance * float(np.trace(inner)))
    return value, np.array(grads)


def optimize_hyperparameters(data: TrainingData, init: Hyperparameters, dim: int,
                             config: OptimConfig | None = None) -> Hyperparameters:
    """Maximize the log marginal likelihood of one output dimension.

    Runs nonlinear CG in log-space from ``init`` and from ``config.restarts``
    random points drawn log-uniformly within ``config.restart_span`` decades
    of ``init``.  The polynomial degree is never changed.  If nothing beats
    ``init`` it is returned as is.
    """
    config = config or OptimConfig()
    theta0 = init.log_params()
    lo, hi = config.log_bounds

    def objective(theta):
        value, grad = log_marginal_likelihood(data, init.with_log_params(theta), dim)
        return -value, -grad

    try:
        best_value = -objective(theta0)[0]
    except ArithmeticError:
        best_value = -np.inf
    best = init

    rng = np.random.default_rng([config.seed, dim])
    span = config.restart_span * math.log(10.0)
    starts = [theta0] + [theta0 + rng.uniform(-span, span, size=theta0.size) for _ in range(config.restarts)]
    for k, start in enumerate(starts):
        try:
            res = minimize_cg(objective, start, max_iter=config.max_iter, grad_tol=config.grad_tol,
                              bounds=(lo, hi))
        except ArithmeticError:
            log.debug("restart %d: objective not finite at start", k)
            continue
        if -res.fun > best_value:
            best_value = -res.fun
            best = init.with_log_params(res.x)
    return best


def fit_optimized(data: TrainingData, init: Hyperparameters | Sequence[Hyperparameters],
                  config: OptimConfig | None = None) -> GpSsmModel:
    """Optimize each dimension's hyperparameters independently, then fit."""
    inits = _as_hyper_list(init, data.n)
    hypers = [optimize_hyperparameters(data, h, i, config) for i, h in enumerate(inits)]
    return fit(data, hypers)
