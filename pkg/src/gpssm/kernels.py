"""Covariance functions: linear, polynomial and squared exponential.

Kernels are small frozen dataclasses.  Internally they work on *point
matrices* with one point per row, shape ``(N, n)``.  The module-level helpers
(:func:`gram_matrix`, :func:`cross_covariance`) follow the training-matrix
convention used elsewhere in the package, where the ``m`` training inputs are
the *columns* of an ``(n, m)`` array.

Hyperparameters are optimized in log-space.  A parameter whose value is
exactly zero (``sigma0 = 0`` or ``sigma_f = 0``) has no logarithm and is held
fixed; it is simply left out of the free parameter vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import UsageError

__all__ = [
    "Linear",
    "Polynomial",
    "SquaredExponential",
    "Kernel",
    "Hyperparameters",
    "kernel_eval",
    "gram_matrix",
    "cross_covariance",
    "kernel_gradient_x",
    "kernel_from_dict",
    "family",
]


def _points(a, n=None):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if n is not None and a.shape[1] != n:
        raise UsageError(f"dimension mismatch: expected {n} coordinates, got {a.shape[1]}")
    return a


def _check_nonneg(name, value):
    if not (math.isfinite(value) and value >= 0.0):
        raise UsageError(f"{name} must be a finite non-negative real, got {value!r}")


class _KernelBase:
    # names of the continuous hyperparameters, in log-vector order
    _params: tuple[str, ...] = ()

    def free_params(self) -> tuple[str, ...]:
        """Names of the hyperparameters that take part in optimization."""
        return tuple(p for p in self._params if getattr(self, p) > 0.0)

    def log_params(self) -> np.ndarray:
        return np.array([math.log(getattr(self, p)) for p in self.free_params()])

    def with_log_params(self, theta):
        names = self.free_params()
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(names),):
            raise UsageError(f"expected {len(names)} log-parameters, got shape {theta.shape}")
        changes = {name: float(np.exp(t)) for name, t in zip(names, theta)}
        return type(self)(**{**self.to_kwargs(), **changes})

    def to_kwargs(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    def __call__(self, x, x_prime) -> float:
        return kernel_eval(self, x, x_prime)


@dataclass(frozen=True)
class Linear(_KernelBase):
    """``k(x, x') = x.x' + sigma0**2``."""

    sigma0: float = 1.0

    _params = ("sigma0",)

    def __post_init__(self):
        _check_nonneg("sigma0", self.sigma0)

    def pairwise(self, A, B):
        return A @ B.T + self.sigma0**2

    def diag(self, A):
        return np.einsum("ij,ij->i", A, A) + self.sigma0**2

    def grad_x(self, x, B):
        # rows: d k(x, B_j) / dx
        return np.array(B, dtype=float, copy=True)

    def param_grads(self, A, K):
        return [np.full_like(K, 2.0 * self.sigma0**2)] if self.sigma0 > 0 else []

    def to_dict(self):
        return {"type": "linear", "sigma0": self.sigma0}


@dataclass(frozen=True)
class Polynomial(_KernelBase):
    """``k(x, x') = (x.x' + sigma0**2) ** degree`` with integer ``degree >= 2``."""

    sigma0: float = 1.0
    degree: int = 2

    _params = ("sigma0",)

    def __post_init__(self):
        _check_nonneg("sigma0", self.sigma0)
        if isinstance(self.degree, bool) or int(self.degree) != self.degree or self.degree < 2:
            raise UsageError(f"polynomial degree must be an integer >= 2, got {self.degree!r}")
        object.__setattr__(self, "degree", int(self.degree))

    def pairwise(self, A, B):
        return (A @ B.T + self.sigma0**2) ** self.degree

    def diag(self, A):
        return (np.einsum("ij,ij->i", A, A) + self.sigma0**2) ** self.degree

    def grad_x(self, x, B):
        u = B @ x + self.sigma0**2
        return (self.degree * u ** (self.degree - 1))[:, None] * B

    def param_grads(self, A, K):
        if self.sigma0 == 0:
            return []
        u = A @ A.T + self.sigma0**2
        return [self.degree * u ** (self.degree - 1) * (2.0 * self.sigma0**2)]

    def to_dict(self):
        return {"type": "polynomial", "sigma0": self.sigma0, "degree": self.degree}


@dataclass(frozen=True)
class SquaredExponential(_KernelBase):
    """Isotropic ``k(x, x') = sigma_f**2 * exp(-|x - x'|**2 / (2 length_scale**2))``."""

    sigma_f: float = 1.0
    length_scale: float = 1.0

    _params = ("sigma_f", "length_scale")

    def __post_init__(self):
        _check_nonneg("sigma_f", self.sigma_f)
        if not (math.isfinite(self.length_scale) and self.length_scale > 0):
            raise UsageError(f"length_scale must be positive, got {self.length_scale!r}")

    def pairwise(self, A, B):
        d2 = cdist(A, B, "sqeuclidean")
        return self.sigma_f**2 * np.exp(-0.5 * d2 / self.length_scale**2)

    def diag(self, A):
        return np.full(A.shape[0], self.sigma_f**2)

    def grad_x(self, x, B):
        diff = B - x
        k = self.sigma_f**2 * np.exp(-0.5 * np.einsum("ij,ij->i", diff, diff) / self.length_scale**2)
        return k[:, None] * diff / self.length_scale**2

    def param_grads(self, A, K):
        grads = []
        if self.sigma_f > 0:
            grads.append(2.0 * K)
        d2 = cdist(A, A, "sqeuclidean")
        grads.append(K * d2 / self.length_scale**2)
        return grads

    def to_dict(self):
        return {"type": "squared_exponential", "sigmaF": self.sigma_f, "lengthScale": self.length_scale}


Kernel = Union[Linear, Polynomial, SquaredExponential]


def family(kernel: Kernel) -> str:
    return kernel.to_dict()["type"]


def kernel_from_dict(d: dict) -> Kernel:
    """Inverse of ``kernel.to_dict()``; unknown keys are rejected."""
    d = dict(d)
    kind = d.pop("type", None)
    try:
        if kind == "linear":
            return Linear(sigma0=float(d.pop("sigma0", 1.0)), **_no_extra(d))
        if kind == "polynomial":
            return Polynomial(sigma0=float(d.pop("sigma0", 1.0)), degree=d.pop("degree", 2), **_no_extra(d))
        if kind == "squared_exponential":
            return SquaredExponential(
                sigma_f=float(d.pop("sigmaF", 1.0)),
                length_scale=float(d.pop("lengthScale", 1.0)),
                **_no_extra(d),
            )
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown kernel type {kind!r}")


def _no_extra(d):
    if d:
        raise UsageError(f"unexpected kernel fields: {sorted(d)}")
    return {}


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel plus the observation-noise variance of one output dimension."""

    kernel: Kernel
    noise_variance: float = 1e-2

    def __post_init__(self):
        if not (math.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise UsageError(f"noise_variance must be strictly positive, got {self.noise_variance!r}")

    def log_params(self) -> np.ndarray:
        # kernel log-params followed by log(sigma_n)
        return np.append(self.kernel.log_params(), 0.5 * math.log(self.noise_variance))

    def with_log_params(self, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        return Hyperparameters(self.kernel.with_log_params(theta[:-1]), float(np.exp(2.0 * theta[-1])))

    def to_dict(self):
        return {"kernel": self.kernel.to_dict(), "noiseVariance": self.noise_variance}

    @classmethod
    def from_dict(cls, d):
        return cls(kernel_from_dict(d["kernel"]), float(d["noiseVariance"]))


def kernel_eval(kernel: Kernel, x, x_prime) -> float:
    """Evaluate ``k(x, x')`` for two state vectors of equal dimension."""
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape or x.size == 0:
        raise UsageError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    if isinstance(kernel, SquaredExponential):
        d = x - x_prime
        return float(kernel.sigma_f**2 * math.exp(-0.5 * float(d @ d) / kernel.length_scale**2))
    # elementwise products commute, so summing in index order is exactly symmetric
    dot = math.fsum(x * x_prime)
    if isinstance(kernel, Polynomial):
        return float((dot + kernel.sigma0**2) ** kernel.degree)
    return float(dot + kernel.sigma0**2)


def gram_matrix(kernel: Kernel, X) -> np.ndarray:
    """Symmetric ``(m, m)`` covariance of the columns of ``X`` (shape ``(n, m)``)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise UsageError(f"X must be an (n, m) matrix with m >= 1, got shape {X.shape}")
    P = X.T
    K = kernel.pairwise(P, P)
    return 0.5 * (K + K.T)


def cross_covariance(kernel: Kernel, x, X) -> np.ndarray:
    """Vector ``[k(x, X[:, j])]_j`` of length ``m``."""
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != x.size:
        raise UsageError(f"dimension mismatch: x has {x.size} coordinates, X has shape {X.shape}")
    return kernel.pairwise(x[None, :], X.T)[0]


def kernel_gradient_x(kernel: Kernel, x, x_prime) -> np.ndarray:
    """Analytic gradient of ``k(., x')`` evaluated at ``x``."""
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape:
        raise UsageError(f"dimension mismatch: {x.shape} vs {x_prime.shape}")
    return kernel.grad_x(x, x_prime[None, :])[0]
