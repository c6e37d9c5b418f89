"""Equilibrium points ``x* = f(x*)`` of a fitted model.

Linear-kernel models are affine, ``f(x) = A x + b``, and are handled in
closed form.  Everything else goes through a multi-start damped Newton
solver on ``g(x) = f(x) - x`` with a Levenberg-Marquardt fallback.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import jacobian, residual
from .errors import UsageError
from .gp import GpSsmModel, predict_mean
from .kernels import Linear, SquaredExponential, family

log = logging.getLogger(__name__)

FINITE = "finite"
INFINITE = "infinite"
EMPTY = "empty"

__all__ = [
    "AffineForm",
    "Bound",
    "EquilibriumPoint",
    "EquilibriumSet",
    "SolverConfig",
    "SliceReport",
    "as_box",
    "default_search_box",
    "linear_affine_form",
    "classify_linear_equilibria",
    "find_equilibria",
    "theoretical_bound",
    "bolzano_slice_check",
    "bisect_slice",
]


@dataclass(frozen=True)
class AffineForm:
    A: np.ndarray
    b: np.ndarray

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.A.T + self.b


@dataclass(frozen=True)
class Bound:
    """Theoretical cardinality information.

    ``kind`` is ``"upper"`` (polynomial, Bezout product), ``"lower"``
    (squared exponential, at least one), ``"trichotomy"`` (linear: 0, 1 or
    infinitely many) or ``"none"`` (mixed kernel families).
    """

    kind: str
    value: Optional[int] = None

    def describe(self) -> str:
        return {
            "upper": f"<= {self.value}",
            "lower": f">= {self.value}",
            "trichotomy": "0, 1 or infinite",
            "none": "no bound available",
        }[self.kind]

    def admits(self, count) -> bool:
        if self.kind == "upper":
            return count <= self.value
        if self.kind == "lower":
            return count >= self.value
        if self.kind == "trichotomy":
            return count in (0, 1, math.inf)
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value, "text": self.describe()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("value"))


@dataclass(frozen=True)
class EquilibriumPoint:
    x: np.ndarray
    residual_norm: float
    starts_converged: int = 1

    def to_dict(self):
        return {"x": self.x.tolist(), "residualNorm": self.residual_norm, "startsConverged": self.starts_converged}


@dataclass(frozen=True)
class EquilibriumSet:
    """Deduplicated fixed points plus a cardinality tag.

    For the infinite (linear) case ``points`` holds the minimum-norm
    particular solution and ``null_basis`` spans the solution directions.
    """

    points: tuple[EquilibriumPoint, ...]
    cardinality: str
    bound: Optional[Bound] = None
    null_basis: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self):
        if self.cardinality == INFINITE:
            return math.inf
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def array(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, 0))
        return np.array([p.x for p in self.points])

    def to_dict(self):
        return {
            "cardinality": self.cardinality,
            "count": None if self.cardinality == INFINITE else len(self.points),
            "points": [p.to_dict() for p in self.points],
            "bound": None if self.bound is None else self.bound.to_dict(),
            "nullBasis": None if self.null_basis is None else self.null_basis.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        points = tuple(
            EquilibriumPoint(np.array(p["x"], dtype=float), float(p["residualNorm"]), int(p["startsConverged"]))
            for p in d["points"]
        )
        nb = d.get("nullBasis")
        return cls(
            points,
            d["cardinality"],
            None if d.get("bound") is None else Bound.from_dict(d["bound"]),
            None if nb is None else np.array(nb, dtype=float),
            dict(d.get("diagnostics") or {}),
        )


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`find_equilibria`.

    A root is accepted when ``|g(x)| < residual_tol * (1 + |x|)``; two roots
    are merged when closer than ``dedup_tol * (1 + box diameter)``.
    """

    max_iter: int = 100
    residual_tol: float = 1e-8
    dedup_tol: float = 1e-5
    lm_damping: float = 1e-3
    seed: int = 0
    polish_steps: int = 3

    def to_dict(self):
        return {"maxIter": self.max_iter, "residualTol": self.residual_tol, "dedupTol": self.dedup_tol,
                "lmDamping": self.lm_damping, "seed": self.seed, "polishSteps": self.polish_steps}

    @classmethod
    def from_dict(cls, d):
        names = {"maxIter": "max_iter", "residualTol": "residual_tol", "dedupTol": "dedup_tol",
                 "lmDamping": "lm_damping", "seed": "seed", "polishSteps": "polish_steps"}
        return cls(**{names[k]: v for k, v in d.items() if k in names})


def as_box(box, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalize a search box to ``(lo, hi)`` vectors of length ``n``.

    Accepts ``(lo, hi)`` scalars, ``(lo_vec, hi_vec)`` or an ``(n, 2)`` array.
    """
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,):
        lo, hi = np.full(n, arr[0]), np.full(n, arr[1])
    elif arr.shape == (n, 2):
        lo, hi = arr[:, 0].copy(), arr[:, 1].copy()
    elif arr.shape == (2, n):
        lo, hi = arr[0].copy(), arr[1].copy()
    else:
        raise UsageError(f"cannot interpret box of shape {arr.shape} for n={n}")
    if not np.all(hi > lo):
        raise UsageError("search box is degenerate: need lo < hi on every axis")
    return lo, hi


def default_search_box(model: GpSsmModel, factor: float = 2.0):
    """``factor`` times the invariant box for SE models, ``[-20, 20]^n`` otherwise."""
    if all(isinstance(k, SquaredExponential) for k in model.kernels):
        from .stability import invariant_set

        w = factor * invariant_set(model)
        w = np.where(w > 0, w, 1.0)
        return -w, w
    return np.full(model.n, -20.0), np.full(model.n, 20.0)


# -- closed form for linear kernels -------------------------------------------


def linear_affine_form(model: GpSsmModel) -> AffineForm:
    """``A`` and ``b`` with ``f(x) = A x + b`` for an all-linear-kernel model."""
    if not all(isinstance(k, Linear) for k in model.kernels):
        raise UsageError("linear_affine_form needs every output dimension to use a linear kernel")
    H = model.weights
    A = H @ model.X.T
    b = np.array([d.kernel.sigma0**2 * math.fsum(d.weights) for d in model.dims])
    return AffineForm(A, b)


def _rank(M, tol):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * s[0] * max(M.shape)))


def classify_linear_equilibria(form: AffineForm, tol: float | None = None) -> EquilibriumSet:
    """Solve ``(I - A) x = b`` and classify the solution set.

    Ranks are counted from singular values above ``tol * s_max * max(shape)``
    (default ``tol`` is machine epsilon).
    """
    A = np.atleast_2d(np.asarray(form.A, dtype=float))
    b = np.asarray(form.b, dtype=float).ravel()
    n = A.shape[0]
    tol = np.finfo(float).eps if tol is None else tol
    AI = np.eye(n) - A
    r = _rank(AI, tol)
    r_aug = _rank(np.column_stack([AI, b]), tol)
    bound = Bound("trichotomy")
    diag = {"rank": r, "augmentedRank": r_aug}
    if r != r_aug:
        return EquilibriumSet((), EMPTY, bound, diagnostics=diag)
    if r == n:
        x = np.linalg.solve(AI, b)
        res = float(np.linalg.norm(AI @ x - b))
        return EquilibriumSet((EquilibriumPoint(x, res),), FINITE, bound, diagnostics=diag)
    x = np.linalg.pinv(AI) @ b
    _, s, vt = np.linalg.svd(AI)
    null = vt[r:].T
    res = float(np.linalg.norm(AI @ x - b))
    return EquilibriumSet((EquilibriumPoint(x, res),), INFINITE, bound, null, diag)


# -- cardinality bounds ---------------------------------------------------------


def theoretical_bound(model: GpSsmModel) -> Bound:
    kinds = {family(k) for k in model.kernels}
    if len(kinds) != 1:
        return Bound("none")
    kind = kinds.pop()
    if kind == "polynomial":
        return Bound("upper", int(np.prod([k.degree for k in model.kernels])))
    if kind == "squared_exponential":
        return Bound("lower", 1)
    return Bound("trichotomy")


# -- multi-start root finding ---------------------------------------------------


def _start_points(lo, hi, starts, rng, data_lo=None, data_hi=None):
    """Grid starts over the box, then random ones.

    Half of the random starts are drawn over the box and half over the part
    of the box covered by the training inputs, where the map is not flat.
    """
    n = lo.size
    n_grid = math.ceil(starts / 2)
    q = 1
    while (q + 1) ** n <= n_grid:
        q += 1
    if q == 1:
        grid = ((lo + hi) / 2)[None, :]
    else:
        axes = [np.linspace(lo[i], hi[i], q) for i in range(n)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    n_rand = starts - grid.shape[0]
    n_data = 0
    if data_lo is not None:
        dlo, dhi = np.maximum(lo, data_lo), np.minimum(hi, data_hi)
        if np.all(dhi > dlo):
            n_data = n_rand // 2
    rand = rng.uniform(lo, hi, size=(n_rand - n_data, n))
    if n_data:
        rand = np.vstack([rand, rng.uniform(dlo, dhi, size=(n_data, n))])
    return np.vstack([grid, rand])


def _accept_tol(cfg, x):
    return cfg.residual_tol * (1.0 + float(np.linalg.norm(x)))


def _newton(model, x, cfg, diverge_radius):
    n = x.size
    g = residual(model, x)
    nrm = float(np.linalg.norm(g))
    mu = cfg.lm_damping
    polish = 0
    for _ in range(cfg.max_iter):
        converged = nrm < _accept_tol(cfg, x)
        if converged:
            if polish >= cfg.polish_steps:
                break
            polish += 1
        J = jacobian(model, x) - np.eye(n)
        x_new = None
        try:
            d = np.linalg.solve(J, -g)
            if np.all(np.isfinite(d)):
                t = 1.0
                for _ in range(30):
                    cand = x + t * d
                    g_c = residual(model, cand)
                    n_c = float(np.linalg.norm(g_c))
                    if n_c < (1.0 - 1e-4 * t) * nrm:
                        x_new, g_new, n_new = cand, g_c, n_c
                        break
                    t *= 0.5
        except np.linalg.LinAlgError:
            pass
        if x_new is None:
            # Levenberg-Marquardt fallback
            JtJ = J.T @ J
            scale = max(1.0, float(np.max(np.diag(JtJ))))
            for _ in range(20):
                try:
                    d = np.linalg.solve(JtJ + mu * scale * np.eye(n), -J.T @ g)
                except np.linalg.LinAlgError:
                    mu *= 10.0
                    continue
                cand = x + d
                g_c = residual(model, cand)
                n_c = float(np.linalg.norm(g_c))
                if n_c < nrm:
                    x_new, g_new, n_new = cand, g_c, n_c
                    mu = max(mu / 10.0, 1e-12)
                    break
                mu *= 10.0
        if x_new is None:
            break
        x, g, nrm = x_new, g_new, n_new
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > diverge_radius:
            return x, math.inf
    return x, nrm


def find_equilibria(model: GpSsmModel, box=None, starts: int = 25,
                    config: SolverConfig | None = None) -> EquilibriumSet:
    """Multi-start search for fixed points inside ``box``.

    Half the starts (rounded up, then down to a full grid) sit on a uniform
    grid over the box; the rest are drawn from a generator seeded with
    ``config.seed``, half over the box and half over the region spanned by
    the training inputs.  Only accepted roots inside the box are reported.
    """
    cfg = config or SolverConfig()
    if starts < 1:
        raise UsageError(f"starts must be >= 1, got {starts}")
    lo, hi = default_search_box(model) if box is None else as_box(box, model.n)
    diameter = float(np.linalg.norm(hi - lo))
    dedup = cfg.dedup_tol * (1.0 + diameter)
    slack = 1e-9 * (1.0 + diameter)
    rng = np.random.default_rng(cfg.seed)
    X = model.X
    pad = 0.1 * (X.max(axis=1) - X.min(axis=1)) + 1e-9
    x0s = _start_points(lo, hi, starts, rng, X.min(axis=1) - pad, X.max(axis=1) + pad)

    found: list[list] = []  # [x, residual_norm, hits]
    min_res = math.inf
    outside = 0
    for x0 in x0s:
        x, nrm = _newton(model, x0.copy(), cfg, diverge_radius=1e6 * (1.0 + diameter))
        min_res = min(min_res, nrm)
        if not nrm < _accept_tol(cfg, x):
            continue
        if np.any(x < lo - slack) or np.any(x > hi + slack):
            outside += 1
            continue
        for entry in found:
            if np.linalg.norm(entry[0] - x) < dedup:
                entry[2] += 1
                if nrm < entry[1]:
                    entry[0], entry[1] = x, nrm
                break
        else:
            found.append([x, nrm, 1])

    found.sort(key=lambda e: tuple(e[0]))
    points = tuple(EquilibriumPoint(x, float(r), h) for x, r, h in found)
    diag = {
        "starts": int(starts),
        "minResidual": float(min_res),
        "rootsOutsideBox": outside,
        "box": [lo.tolist(), hi.tolist()],
    }
    return EquilibriumSet(points, FINITE if points else EMPTY, theoretical_bound(model), diagnostics=diag)


# -- one-dimensional slices (existence argument for SE models) -----------------


@dataclass(frozen=True)
class SliceReport:
    dim: int
    fixed: np.ndarray
    interval: tuple[float, float]
    values: tuple[float, float]

    @property
    def sign_change(self) -> bool:
        return self.values[0] * self.values[1] < 0


def _slice_fn(model, dim, fixed):
    fixed = np.asarray(fixed, dtype=float).ravel()
    if fixed.size != model.n - 1:
        raise UsageError(f"need {model.n - 1} fixed coordinates, got {fixed.size}")

    def s(t):
        x = np.insert(fixed, dim, t)
        return float(predict_mean(model, x)[dim] - t)

    return s


def bolzano_slice_check(model: GpSsmModel, dim: int, fixed_coords, interval=None) -> SliceReport:
    """Evaluate ``s(t) = f_dim(x with x_dim = t) - t`` at the ends of ``interval``.

    Without an interval the ends are ``-(w + 1)`` and ``w + 1`` where ``w`` is
    the invariant-set half-width of ``dim``; for an SE kernel the mean is
    bounded by ``w``, so the end values are ``>= 1`` and ``<= -1``.
    """
    if not 0 <= dim < model.n:
        raise UsageError(f"dim must be in [0, {model.n})")
    if not isinstance(model.kernels[dim], SquaredExponential):
        raise UsageError("bolzano_slice_check needs a squared exponential kernel on the chosen dimension")
    if interval is None:
        from .stability import invariant_set

        w = float(invariant_set(model)[dim])
        a, b = -(w + 1.0), w + 1.0
    else:
        a, b = (float(v) for v in interval)
        if not a < b:
            raise UsageError(f"interval must satisfy a < b, got [{a}, {b}]")
    s = _slice_fn(model, dim, fixed_coords)
    return SliceReport(dim, np.asarray(fixed_coords, dtype=float).ravel(), (a, b), (s(a), s(b)))


def bisect_slice(model: GpSsmModel, dim: int, fixed_coords, interval, xtol: float = 1e-12) -> float:
    """Plain bisection for a zero of the slice function on a sign-change bracket."""
    s = _slice_fn(model, dim, fixed_coords)
    a, b = (float(v) for v in interval)
    fa, fb = s(a), s(b)
    if fa * fb > 0:
        raise UsageError("interval does not bracket a sign change")
    while b - a > xtol * (1.0 + abs(a) + abs(b)):
        c = 0.5 * (a + b)
        fc = s(c)
        if fc == 0:
            return c
        if fa * fc < 0:
            b, fb = c, fc
        else:
            a, fa = c, fc
    return 0.5 * (a + b)
