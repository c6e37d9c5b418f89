"""Equilibrium census over random systems, and the Van der Pol boundedness demo."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dynamics import Trajectory, simulate
from .equilibria import (
    SolverConfig,
    classify_linear_equilibria,
    find_equilibria,
    linear_affine_form,
)
from .errors import GpSsmError, UsageError
from .gp import fit_optimized
from .io import model_to_dict
from .kernels import Hyperparameters, Kernel, Linear, Polynomial, SquaredExponential, kernel_from_dict
from .optim import OptimConfig
from .stability import certify_bounded, classify_linear, classify_local, digest
from .systems import (
    RANDOM_LINEAR,
    VanDerPol,
    make_grid_training,
    sample_system,
    simulate_system,
    system_to_dict,
)

log = logging.getLogger(__name__)

BUCKETS = ("0", "1", "2", "[3,4]", "[5,9]", "[10,19]", ">=20", "inf")
FAILED = "failed"

__all__ = [
    "BUCKETS",
    "ExperimentConfig",
    "RunRecord",
    "CountTable",
    "bucket",
    "kernel_label",
    "run_equilibrium_census",
    "VdpConfig",
    "VdpRun",
    "VdpResult",
    "run_vdp_demo",
]


def bucket(count) -> str:
    if count == math.inf:
        return "inf"
    if count <= 2:
        return str(int(count))
    for lo, hi, name in ((3, 4, "[3,4]"), (5, 9, "[5,9]"), (10, 19, "[10,19]")):
        if lo <= count <= hi:
            return name
    return ">=20"


def kernel_label(kernel: Kernel) -> str:
    if isinstance(kernel, Linear):
        return "linear"
    if isinstance(kernel, Polynomial):
        return f"polynomial p={kernel.degree}"
    return "squared exponential"


def _default_kernels():
    return (Linear(1.0), Polynomial(1.0, 2), Polynomial(1.0, 3), Polynomial(1.0, 5), SquaredExponential(1.0, 1.0))


@dataclass(frozen=True)
class ExperimentConfig:
    """Census protocol.  Defaults are the desk-scale setting.

    ``full_scale()`` returns the full protocol (100 systems, 10x10 grid).
    """

    family: str = RANDOM_LINEAR
    system_count: int = 20
    train_box: tuple[float, float] = (-1.0, 1.0)
    train_points_per_axis: int = 7
    search_box: tuple[float, float] = (-20.0, 20.0)
    solver_starts: int = 25
    kernels: tuple = field(default_factory=_default_kernels)
    noise_variance_init: float = 0.01
    optim: OptimConfig = field(default_factory=lambda: OptimConfig(max_iter=50, restarts=2))
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.system_count < 1:
            raise UsageError("system_count must be >= 1")
        if not self.kernels:
            raise UsageError("kernel list must not be empty")
        object.__setattr__(self, "kernels", tuple(self.kernels))

    def full_scale(self) -> "ExperimentConfig":
        return replace(self, system_count=100, train_points_per_axis=10, optim=OptimConfig())

    def to_dict(self):
        return {
            "family": self.family,
            "systemCount": self.system_count,
            "trainBox": list(self.train_box),
            "trainPointsPerAxis": self.train_points_per_axis,
            "searchBox": list(self.search_box),
            "solverStarts": self.solver_starts,
            "kernels": [k.to_dict() for k in self.kernels],
            "noiseVarianceInit": self.noise_variance_init,
            "optim": self.optim.to_dict(),
            "seed": self.seed,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d):
        kw = {}
        simple = {"family": "family", "systemCount": "system_count", "trainPointsPerAxis": "train_points_per_axis",
                  "solverStarts": "solver_starts", "noiseVarianceInit": "noise_variance_init", "seed": "seed",
                  "workers": "workers"}
        for key, name in simple.items():
            if key in d:
                kw[name] = d[key]
        for key, name in (("trainBox", "train_box"), ("searchBox", "search_box")):
            if key in d:
                kw[name] = tuple(float(v) for v in d[key])
        if "kernels" in d:
            kw["kernels"] = tuple(kernel_from_dict(k) for k in d["kernels"])
        if "optim" in d:
            kw["optim"] = OptimConfig.from_dict(d["optim"])
        base = cls(**kw)
        return base.full_scale() if d.get("fullScale") else base


@dataclass
class RunRecord:
    """Everything produced by one (system, kernel) run, in JSON-ready form."""

    system_index: int
    label: str
    system: dict
    count: Optional[float] = None
    model: Optional[dict] = None
    equilibria: Optional[dict] = None
    certificates: list = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self):
        return {
            "systemIndex": self.system_index,
            "label": self.label,
            "system": self.system,
            "count": None if self.count is None or self.count == math.inf else int(self.count),
            "infinite": self.count == math.inf,
            "model": self.model,
            "equilibria": self.equilibria,
            "certificates": self.certificates,
            "error": self.error,
        }


@dataclass
class CountTable:
    """Histogram of equilibrium counts per kernel label."""

    labels: list[str]
    rows: dict[str, Counter]
    counts: dict[str, list]
    runs: list[RunRecord] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def total(self, label) -> int:
        return sum(self.rows[label].values())

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", *BUCKETS, FAILED])
            for label in self.labels:
                row = self.rows[label]
                w.writerow([label, *(row.get(b, 0) for b in BUCKETS), row.get(FAILED, 0)])

    def format(self) -> str:
        width = max(len(lbl) for lbl in self.labels)
        cols = [*BUCKETS, FAILED]
        lines = [" " * width + " " + " ".join(f"{c:>7}" for c in cols)]
        for label in self.labels:
            row = self.rows[label]
            lines.append(f"{label:<{width}} " + " ".join(f"{row.get(c, 0):>7}" for c in cols))
        return "\n".join(lines)


def _certificates(model, eq, linear_form=None):
    prov = {"model": digest(model_to_dict(model))}
    if linear_form is not None:
        rep = classify_linear(linear_form)
        return [{**rep.to_dict(), "provenance": prov}]
    certs = []
    if all(isinstance(k, SquaredExponential) for k in model.kernels):
        certs.append({**certify_bounded(model).to_dict(), "provenance": prov})
    for p in eq.points:
        try:
            certs.append({**classify_local(model, p.x).to_dict(), "provenance": prov})
        except GpSsmError as exc:
            certs.append({"error": str(exc), "point": p.x.tolist()})
    return certs


def _run_system(config: ExperimentConfig, index: int) -> list[RunRecord]:
    seed = config.seed + index
    system = sample_system(config.family, seed)
    data = make_grid_training(system, config.train_box, config.train_points_per_axis,
                              np.random.default_rng([seed, 1]))
    records = []
    for kernel in config.kernels:
        rec = RunRecord(index, kernel_label(kernel), system_to_dict(system))
        try:
            init = Hyperparameters(kernel, config.noise_variance_init)
            model = fit_optimized(data, init, replace(config.optim, seed=seed))
            rec.model = model_to_dict(model)
            if isinstance(kernel, Linear):
                form = linear_affine_form(model)
                eq = classify_linear_equilibria(form)
                rec.certificates = _certificates(model, eq, form)
            else:
                eq = find_equilibria(model, config.search_box, config.solver_starts, SolverConfig(seed=seed))
                rec.certificates = _certificates(model, eq)
            rec.equilibria = eq.to_dict()
            rec.count = eq.count
        except (GpSsmError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
            log.warning("system %d, %s: %s", index, rec.label, rec.error)
        records.append(rec)
    return records


def _reduce(config: ExperimentConfig, per_system: Sequence[list[RunRecord]]) -> CountTable:
    labels = []
    for k in config.kernels:
        lbl = kernel_label(k)
        if lbl not in labels:
            labels.append(lbl)
    rows = {lbl: Counter() for lbl in labels}
    counts = {lbl: [] for lbl in labels}
    diagnostics = []
    runs = []
    for records in sorted(per_system, key=lambda r: r[0].system_index):
        for rec in records:
            runs.append(rec)
            if rec.error is not None:
                rows[rec.label][FAILED] += 1
                diagnostics.append(f"system {rec.system_index} / {rec.label}: {rec.error}")
                counts[rec.label].append(None)
            else:
                rows[rec.label][bucket(rec.count)] += 1
                counts[rec.label].append(rec.count)
    return CountTable(labels, rows, counts, runs, diagnostics)


def run_equilibrium_census(config: ExperimentConfig) -> CountTable:
    """Sample systems, fit every kernel template, count equilibria.

    Runs are independent; with ``config.workers > 1`` they are spread over a
    process pool.  The reduction sorts by system index, so the table does not
    depend on scheduling.
    """
    indices = range(config.system_count)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_system = list(pool.map(_run_system, [config] * config.system_count, indices))
    else:
        per_system = [_run_system(config, i) for i in indices]
    return _reduce(config, per_system)


# -- Van der Pol ---------------------------------------------------------------


@dataclass(frozen=True)
class VdpConfig:
    x0s: tuple = ((-1.8, 0.0), (2.2, 0.0))
    steps: int = 300
    train_points_per_axis: int = 21
    train_box: tuple[float, float] = (-4.0, 4.0)
    epsilon: float = -0.8
    sample_time: float = 0.1
    noise_std: float = 0.01
    kernel: SquaredExponential = SquaredExponential(1.0, 1.0)
    noise_variance_init: float = 1e-4
    optim: OptimConfig = field(default_factory=lambda: OptimConfig(max_iter=50, restarts=1))
    seed: int = 0


@dataclass
class VdpRun:
    x0: np.ndarray
    true: Trajectory
    model: Trajectory
    in_bound_from: Optional[int]
    in_box_from: Optional[int]
    rmse_100: float  # over the finite part of the first 100 steps
    true_exit_step: Optional[int]  # first step outside [-10, 10]^2, if any


@dataclass
class VdpResult:
    model: object
    bound: float
    invariant_box: np.ndarray
    runs: list[VdpRun]


def _first_index_from_which(mask) -> Optional[int]:
    """Smallest k with mask[j] true for every j >= k (None if mask[-1] is false)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask[-1]:
        return None
    bad = np.flatnonzero(~mask)
    return 0 if bad.size == 0 else int(bad[-1] + 1)


def run_vdp_demo(config: VdpConfig | None = None) -> VdpResult:
    """Train an SE model on Van der Pol data and compare trajectories.

    For every initial state the true (noisy) system and the model mean map
    are simulated side by side; ``in_bound_from`` is the first step from
    which the model stays within the ultimate bound.
    """
    config = config or VdpConfig()
    system = VanDerPol(config.epsilon, config.sample_time, config.noise_std, config.seed)
    data = make_grid_training(system, config.train_box, config.train_points_per_axis,
                              np.random.default_rng([config.seed, 1]))
    model = fit_optimized(data, Hyperparameters(config.kernel, config.noise_variance_init),
                          replace(config.optim, seed=config.seed))
    box = certify_bounded(model).invariant_box
    b = float(np.linalg.norm(box))
    runs = []
    for idx, x0 in enumerate(config.x0s):
        x0 = np.asarray(x0, dtype=float)
        rng = np.random.default_rng([config.seed, 2, idx])
        true = simulate_system(system, x0, config.steps, rng)
        pred = simulate(model, x0, config.steps, dt=config.sample_time)
        norms = np.linalg.norm(pred.states, axis=1)
        in_box = np.all(np.abs(pred.states) <= box * (1 + 1e-12), axis=1)
        horizon = min(100, config.steps) + 1
        with np.errstate(over="ignore", invalid="ignore"):
            diff = true.states[:horizon] - pred.states[:horizon]
            finite = np.all(np.isfinite(diff), axis=1)
            rmse = float(np.sqrt(np.mean(diff[finite] ** 2)))
            outside = ~np.all(np.abs(true.states) <= 10.0, axis=1)
        exit_step = int(np.argmax(outside)) if outside.any() else None
        runs.append(VdpRun(x0, true, pred, _first_index_from_which(norms <= b * (1 + 1e-12)),
                           _first_index_from_which(in_box), rmse, exit_step))
    return VdpResult(model, b, box, runs)
