"""Stability certificates for fitted models.

Linear and polynomial kernels (and, by the same linearization argument, SE
kernels at a fixed point) are judged by the spectral radius of the relevant
matrix.  For squared exponential kernels the mean map is bounded globally:
``|f_i(x)| <= sigma_f_i**2 * sqrt(m) * |h(i)|`` for every ``x``, which gives an
absorbing box and an ultimate bound on ``|x_k|`` for ``k >= 1``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import jacobian, residual
from .errors import NumericalError, UsageError
from .gp import GpSsmModel
from .kernels import SquaredExponential

CERT_VERSION = "gpssm-cert/1"
MARGIN = 1e-9

ASYMPTOTICALLY_STABLE = "asymptotically_stable"
MARGINAL = "marginal"
UNSTABLE = "unstable"
ULTIMATELY_BOUNDED = "ultimately_bounded"

LINEAR_GLOBAL = "linear_global"
LOCAL_AT_POINT = "local_at_point"
ULTIMATE_BOUND = "ultimate_bound"

__all__ = [
    "StabilityReport",
    "invariant_set",
    "ultimate_bound",
    "classify_linear",
    "classify_local",
    "certify_bounded",
    "verdict_for_radius",
]


@dataclass(frozen=True)
class StabilityReport:
    subject: str
    verdict: str
    eigenvalues: Optional[np.ndarray] = None  # complex, sorted by decreasing magnitude
    spectral_radius: Optional[float] = None
    point: Optional[np.ndarray] = None
    ultimate_bound: Optional[float] = None
    invariant_box: Optional[np.ndarray] = None
    provenance: Optional[dict] = None

    @property
    def magnitudes(self) -> Optional[np.ndarray]:
        return None if self.eigenvalues is None else np.abs(self.eigenvalues)

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        eig = None
        if self.eigenvalues is not None:
            eig = [[float(z.real), float(z.imag)] for z in self.eigenvalues]
        return {
            "version": CERT_VERSION,
            "subject": self.subject,
            "verdict": self.verdict,
            "eigenvalues": eig,
            "magnitudes": arr(self.magnitudes),
            "spectralRadius": self.spectral_radius,
            "point": arr(self.point),
            "ultimateBound": self.ultimate_bound,
            "invariantBox": arr(self.invariant_box),
            "provenance": self.provenance or {},
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != CERT_VERSION:
            raise UsageError(f"unsupported certificate version {d.get('version')!r}")

        def arr(a):
            return None if a is None else np.array(a, dtype=float)

        eig = None
        if d.get("eigenvalues") is not None:
            eig = np.array([complex(re, im) for re, im in d["eigenvalues"]])
        return cls(d["subject"], d["verdict"], eig, d.get("spectralRadius"), arr(d.get("point")),
                   d.get("ultimateBound"), arr(d.get("invariantBox")), d.get("provenance") or None)


def verdict_for_radius(radius: float, margin: float = MARGIN) -> str:
    if radius < 1.0 - margin:
        return ASYMPTOTICALLY_STABLE
    if radius > 1.0 + margin:
        return UNSTABLE
    return MARGINAL


def _require_se(model: GpSsmModel):
    if not all(isinstance(k, SquaredExponential) for k in model.kernels):
        raise UsageError("this certificate applies only when every dimension uses a squared exponential kernel")


def invariant_set(model: GpSsmModel) -> np.ndarray:
    """Half-widths ``sigma_f_i**2 * sqrt(m) * |h(i)|`` of the absorbing box."""
    _require_se(model)
    sq = math.sqrt(model.m)
    return np.array([d.kernel.sigma_f**2 * sq * float(np.linalg.norm(d.weights)) for d in model.dims])


def ultimate_bound(model: GpSsmModel) -> float:
    """Euclidean norm of the invariant-set half-widths."""
    return float(np.linalg.norm(invariant_set(model)))


def _spectrum(M):
    try:
        ev = np.linalg.eigvals(np.asarray(M, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    if not np.all(np.isfinite(ev)):
        raise NumericalError("eigenvalue computation returned non-finite values")
    order = np.argsort(-np.abs(ev), kind="stable")
    return ev[order]


def classify_linear(form) -> StabilityReport:
    """Verdict for ``x[k+1] = A x[k] + b`` from the spectral radius of ``A``."""
    ev = _spectrum(form.A)
    radius = float(np.abs(ev[0])) if ev.size else 0.0
    return StabilityReport(LINEAR_GLOBAL, verdict_for_radius(radius), ev, radius)


def classify_local(model: GpSsmModel, x_star, tol: float = 1e-6) -> StabilityReport:
    """Linearization test at an equilibrium ``x_star`` (any kernel family)."""
    x_star = np.asarray(x_star, dtype=float).ravel()
    res = float(np.linalg.norm(residual(model, x_star)))
    if not res < tol:
        raise UsageError(f"x_star is not an equilibrium: residual norm {res:.3g} >= {tol:g}")
    ev = _spectrum(jacobian(model, x_star))
    radius = float(np.abs(ev[0]))
    box = bound = None
    if all(isinstance(k, SquaredExponential) for k in model.kernels):
        box = invariant_set(model)
        bound = float(np.linalg.norm(box))
    return StabilityReport(LOCAL_AT_POINT, verdict_for_radius(radius), ev, radius, point=x_star,
                           ultimate_bound=bound, invariant_box=box)


def certify_bounded(model: GpSsmModel) -> StabilityReport:
    """Ultimate-boundedness certificate for an all-SE model."""
    box = invariant_set(model)
    return StabilityReport(ULTIMATE_BOUND, ULTIMATELY_BOUNDED, ultimate_bound=float(np.linalg.norm(box)),
                           invariant_box=box)


def digest(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
