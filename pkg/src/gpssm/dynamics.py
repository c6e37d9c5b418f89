"""The fitted mean map viewed as a discrete-time system ``x[k+1] = f(x[k])``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, UsageError
from .gp import GpSsmModel, predict_mean

__all__ = ["Trajectory", "simulate", "residual", "jacobian"]


@dataclass(frozen=True)
class Trajectory:
    """States ``x[0..N]`` as an ``(N + 1, n)`` array, optionally with a sample time."""

    states: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        s = np.array(self.states, dtype=float, ndmin=2)
        if s.ndim != 2 or s.shape[0] < 1:
            raise UsageError(f"trajectory needs at least one state, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self):
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def to_csv(self, path) -> None:
        """Columns ``k, x1..xn`` (plus ``t`` when ``dt`` is set)."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            head = ["k"] + (["t"] if self.dt is not None else []) + [f"x{i + 1}" for i in range(self.n)]
            w.writerow(head)
            for k, row in enumerate(self.states):
                lead = [k] + ([repr(k * self.dt)] if self.dt is not None else [])
                w.writerow(lead + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], rows[1:]
        cols = [i for i, h in enumerate(head) if h.startswith("x")]
        dt = None
        if "t" in head and len(body) > 1:
            t = head.index("t")
            dt = float(body[1][t]) - float(body[0][t])
        return cls(np.array([[float(r[i]) for i in cols] for r in body]), dt)


def simulate(model: GpSsmModel, x0, steps: int, dt: float | None = None) -> Trajectory:
    """Iterate the mean map ``steps`` times from ``x0``.

    Raises :class:`NumericalError` at the first non-finite state; the error
    carries ``step`` and ``last_state`` attributes.
    """
    if steps < 0:
        raise UsageError(f"steps must be >= 0, got {steps}")
    x = np.asarray(x0, dtype=float).ravel()
    if x.size != model.n:
        raise UsageError(f"x0 must have {model.n} coordinates, got {x.size}")
    states = np.empty((steps + 1, model.n))
    states[0] = x
    for k in range(steps):
        nxt = predict_mean(model, states[k])
        if not np.all(np.isfinite(nxt)):
            err = NumericalError(f"non-finite state at step {k + 1}")
            err.step = k + 1
            err.last_state = states[k].copy()
            raise err
        states[k + 1] = nxt
    return Trajectory(states, dt)


def residual(model: GpSsmModel, x) -> np.ndarray:
    """``g(x) = f(x) - x``; its zeros are the equilibria.  Batches allowed."""
    return predict_mean(model, x) - np.asarray(x, dtype=float)


def jacobian(model: GpSsmModel, x) -> np.ndarray:
    """Analytic ``(n, n)`` Jacobian of the mean map at ``x``.

    Row ``i`` is ``sum_j h_j(i) * grad_x k_i(x, X[:, j])``.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.n:
        raise UsageError(f"state must have {model.n} coordinates, got {x.size}")
    train = model.X.T
    J = np.empty((model.n, model.n))
    for i, d in enumerate(model.dims):
        J[i] = d.weights @ d.kernel.grad_x(x, train)
    return J
