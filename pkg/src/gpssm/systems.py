"""Reference systems used to generate training and evaluation data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .dynamics import Trajectory
from .errors import UsageError
from .gp import TrainingData

RANDOM_LINEAR = "random_linear"
SINUSOIDAL = "sinusoidal"
VAN_DER_POL = "van_der_pol"
FAMILIES = (RANDOM_LINEAR, SINUSOIDAL)

ALPHA_MAX = 1.5 * math.pi

__all__ = [
    "RandomLinear",
    "Sinusoidal",
    "VanDerPol",
    "ReferenceSystem",
    "step",
    "simulate_system",
    "grid_points",
    "make_grid_training",
    "sample_system",
    "system_from_dict",
]


@dataclass(frozen=True)
class RandomLinear:
    """``x[k+1] = A x[k] + noise`` with entries of ``A`` in (0, 1)."""

    A: np.ndarray
    noise_std: float = 0.05
    seed: int = 0
    kind: str = field(default=RANDOM_LINEAR, init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.shape != (2, 2) or not np.all((A > 0) & (A < 1)):
            raise UsageError("RandomLinear needs a 2x2 matrix with entries in (0, 1)")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    def drift(self, x):
        return self.A @ x

    def params(self):
        return {"A": self.A.tolist()}


@dataclass(frozen=True)
class Sinusoidal:
    """``x1 + sin(alpha1 x2), x2 + sin(alpha2 x1)`` plus noise."""

    alpha1: float
    alpha2: float
    noise_std: float = 0.05
    seed: int = 0
    kind: str = field(default=SINUSOIDAL, init=False)

    def __post_init__(self):
        for a in (self.alpha1, self.alpha2):
            if not 0 < a < ALPHA_MAX:
                raise UsageError(f"alpha must lie in (0, 3*pi/2), got {a}")

    def drift(self, x):
        return np.array([math.sin(self.alpha1 * x[1]) + x[0], math.sin(self.alpha2 * x[0]) + x[1]])

    def params(self):
        return {"alpha1": self.alpha1, "alpha2": self.alpha2}


@dataclass(frozen=True)
class VanDerPol:
    """Van der Pol oscillator sampled every ``sample_time``.

    Integrates ``x' = y, y' = epsilon (1 - x^2) y - x`` with classical RK4 at
    ``substeps`` internal steps per sample.  For negative ``epsilon`` the origin
    attracts and an unstable limit cycle separates bounded from divergent
    motion.
    """

    epsilon: float = -0.8
    sample_time: float = 0.1
    noise_std: float = 0.01
    seed: int = 0
    substeps: int = 10
    kind: str = field(default=VAN_DER_POL, init=False)

    def __post_init__(self):
        if not self.sample_time > 0:
            raise UsageError("sample_time must be positive")
        if self.substeps < 1:
            raise UsageError("substeps must be >= 1")

    def _rhs(self, s):
        x, y = s
        return np.array([y, self.epsilon * (1.0 - x * x) * y - x])

    def drift(self, s):
        h = self.sample_time / self.substeps
        s = np.array(s, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.substeps):
                k1 = self._rhs(s)
                k2 = self._rhs(s + 0.5 * h * k1)
                k3 = self._rhs(s + 0.5 * h * k2)
                k4 = self._rhs(s + h * k3)
                s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return s

    def params(self):
        return {"epsilon": self.epsilon, "sampleTime": self.sample_time, "substeps": self.substeps}


ReferenceSystem = Union[RandomLinear, Sinusoidal, VanDerPol]


def system_to_dict(system: ReferenceSystem) -> dict:
    return {"kind": system.kind, "noiseStd": system.noise_std, "seed": system.seed, **system.params()}


def system_from_dict(d: dict) -> ReferenceSystem:
    kind = d.get("kind")
    common = {"noise_std": float(d.get("noiseStd", 0.0)), "seed": int(d.get("seed", 0))}
    if kind == RANDOM_LINEAR:
        return RandomLinear(np.array(d["A"], dtype=float), **common)
    if kind == SINUSOIDAL:
        return Sinusoidal(float(d["alpha1"]), float(d["alpha2"]), **common)
    if kind == VAN_DER_POL:
        return VanDerPol(float(d.get("epsilon", -0.8)), float(d.get("sampleTime", 0.1)),
                         substeps=int(d.get("substeps", 10)), **common)
    raise UsageError(f"unknown system kind {kind!r}")


def step(system: ReferenceSystem, x, rng=None) -> np.ndarray:
    """Advance one sample.  ``rng=None`` gives the noise-free map."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != 2:
        raise UsageError(f"reference systems are 2-dimensional, got {x.size} coordinates")
    out = system.drift(x)
    if rng is not None:
        out = out + rng.normal(0.0, system.noise_std, size=2)
    return out


def simulate_system(system: ReferenceSystem, x0, steps: int, rng=None, dt=None) -> Trajectory:
    """Iterate :func:`step`.  Divergent runs may end in ``inf``/``nan`` states."""
    if steps < 0:
        raise UsageError("steps must be >= 0")
    states = np.empty((steps + 1, 2))
    states[0] = np.asarray(x0, dtype=float).ravel()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            states[k + 1] = step(system, states[k], rng)
    if dt is None and isinstance(system, VanDerPol):
        dt = system.sample_time
    return Trajectory(states, dt)


def grid_points(box, points_per_axis: int, n: int = 2) -> np.ndarray:
    """Uniform grid over ``box`` as an ``(points_per_axis**n, n)`` array."""
    if points_per_axis < 2:
        raise UsageError("points_per_axis must be >= 2")
    lo, hi = _box(box, n)
    axes = [np.linspace(lo[i], hi[i], points_per_axis) for i in range(n)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def _box(box, n):
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,):
        return np.full(n, arr[0]), np.full(n, arr[1])
    if arr.shape == (n, 2):
        return arr[:, 0], arr[:, 1]
    raise UsageError(f"cannot interpret box of shape {arr.shape}")


def make_grid_training(system: ReferenceSystem, box, points_per_axis: int, rng=None) -> TrainingData:
    """Noise-free grid inputs, outputs one (noisy) step ahead."""
    inputs = grid_points(box, points_per_axis)
    outputs = np.array([step(system, x, rng) for x in inputs])
    return TrainingData.from_pairs(inputs, outputs)


def _open_uniform(rng, lo, hi, size=None):
    while True:
        v = rng.uniform(lo, hi, size=size)
        if np.all(v > lo):
            return v


def sample_system(family: str, seed: int, noise_std: float | None = None) -> ReferenceSystem:
    """Draw a random system of the given family from a stream seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    if family == RANDOM_LINEAR:
        A = _open_uniform(rng, 0.0, 1.0, size=(2, 2))
        return RandomLinear(A, 0.05 if noise_std is None else noise_std, seed)
    if family == SINUSOIDAL:
        a1, a2 = _open_uniform(rng, 0.0, ALPHA_MAX, size=2)
        return Sinusoidal(float(a1), float(a2), 0.05 if noise_std is None else noise_std, seed)
    raise UsageError(f"unknown system family {family!r}; expected one of {FAMILIES}")
