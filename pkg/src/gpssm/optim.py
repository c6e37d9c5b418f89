"""Polak-Ribiere nonlinear conjugate gradient with backtracking line search."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class OptimConfig:
    """Budget and tolerances for hyperparameter search.

    ``restart_span`` is the half-width, in decades, of the log-uniform box
    around the initial point from which random restarts are drawn.
    ``log_bounds`` clips every log-hyperparameter during the search.
    """

    max_iter: int = 200
    grad_tol: float = 1e-6
    restarts: int = 4
    restart_span: float = 2.0
    seed: int = 0
    log_bounds: tuple[float, float] = field(default=(float(np.log(1e-3)), float(np.log(1e3))))

    def to_dict(self):
        return {
            "maxIter": self.max_iter,
            "gradTol": self.grad_tol,
            "restarts": self.restarts,
            "restartSpan": self.restart_span,
            "seed": self.seed,
            "logBounds": list(self.log_bounds),
        }

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for key, name in [("maxIter", "max_iter"), ("gradTol", "grad_tol"), ("restarts", "restarts"),
                          ("restartSpan", "restart_span"), ("seed", "seed")]:
            if key in d:
                kw[name] = d[key]
        if "logBounds" in d:
            kw["log_bounds"] = tuple(float(v) for v in d["logBounds"])
        return cls(**kw)


@dataclass
class CGResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool


def _safe_eval(fun_and_grad, x):
    try:
        f, g = fun_and_grad(x)
    except (ArithmeticError, np.linalg.LinAlgError):
        return np.inf, None
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return np.inf, None
    return float(f), np.asarray(g, dtype=float)


def minimize_cg(fun_and_grad, x0, *, max_iter=200, grad_tol=1e-6, bounds=None,
                c1=1e-4, shrink=0.5, max_backtracks=40) -> CGResult:
    """Minimize ``f`` given ``fun_and_grad(x) -> (f, grad)``.

    Search directions use the PR+ formula, ``beta = max(0, PR)``, and fall
    back to steepest descent whenever the direction is not a descent
    direction or every ``len(x)`` iterations.  Step lengths come from Armijo
    backtracking; once the decrease is below the rounding level of ``f`` a
    step is accepted if it reduces the gradient norm.  With ``bounds=(lo, hi)`` iterates are clipped to the box
    and the gradient norm test uses the projected gradient.

    Evaluations that raise :class:`ArithmeticError` or return non-finite
    values count as ``+inf`` so the line search simply backs off from them.
    """
    x = np.array(x0, dtype=float)
    lo, hi = (-np.inf, np.inf) if bounds is None else bounds
    x = np.clip(x, lo, hi)
    f, g = _safe_eval(fun_and_grad, x)
    if g is None:
        raise ArithmeticError("objective is not finite at the starting point")

    def pgrad_norm(x, g):
        # gradient components pushing out of an active bound do not count
        pg = np.where(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)), 0.0, g)
        return float(np.linalg.norm(pg))

    d = -g
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    it = 0
    for it in range(1, max_iter + 1):
        if pgrad_norm(x, g) < grad_tol:
            return CGResult(x, f, g, it - 1, True)
        slope = float(g @ d)
        if slope >= 0:
            d = -g
            slope = -float(g @ g)
        t = step
        for _ in range(max_backtracks):
            x_new = np.clip(x + t * d, lo, hi)
            f_new, g_new = _safe_eval(fun_and_grad, x_new)
            if g_new is None:
                t *= shrink
                continue
            if f_new <= f + c1 * float(g @ (x_new - x)) and f_new <= f:
                break
            # below the resolution of f, accept steps that shrink the gradient
            if f_new <= f + 8 * np.finfo(float).eps * abs(f) and pgrad_norm(x_new, g_new) < pgrad_norm(x, g):
                break
            t *= shrink
        else:
            # no acceptable step along d; retry once along steepest descent
            if not np.array_equal(d, -g):
                d = -g
                continue
            return CGResult(x, f, g, it, False)
        moved = x_new - x
        if not np.any(moved):
            return CGResult(x, f, g, it, pgrad_norm(x, g) < grad_tol)
        beta = float(g_new @ (g_new - g)) / float(g @ g)
        beta = max(0.0, beta)
        if it % len(x) == 0:
            beta = 0.0
        # next trial step: reuse the accepted length, allow modest growth
        step = min(2.0 * t, 1e3)
        x, f, g = x_new, f_new, g_new
        d = -g + beta * d
    return CGResult(x, f, g, it, pgrad_norm(x, g) < grad_tol)
