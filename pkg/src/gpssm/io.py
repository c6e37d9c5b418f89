"""File formats: training-data CSV and model JSON."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import UsageError
from .gp import GpSsmModel, TrainingData, _fit_dim
from .kernels import Hyperparameters

MODEL_VERSION = "gpssm-model/1"

__all__ = [
    "MODEL_VERSION",
    "write_training_csv",
    "read_training_csv",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "write_json",
    "read_json",
]


def write_training_csv(data: TrainingData, path) -> None:
    """One row per pair: ``x1..xn, y1..yn``."""
    n = data.n
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)])
        for j in range(data.m):
            w.writerow([repr(float(v)) for v in data.X[:, j]] + [repr(float(v)) for v in data.Y[j]])


def read_training_csv(path) -> TrainingData:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise UsageError(f"{path}: empty file")
    head = [h.strip() for h in rows[0]]
    xs = [i for i, h in enumerate(head) if h.startswith("x")]
    ys = [i for i, h in enumerate(head) if h.startswith("y")]
    if not xs or len(xs) != len(ys) or len(xs) + len(ys) != len(head):
        raise UsageError(f"{path}: header must be x1..xn,y1..yn, got {head}")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if body.size == 0:
        raise UsageError(f"{path}: no data rows")
    return TrainingData.from_pairs(body[:, xs], body[:, ys])


def model_to_dict(model: GpSsmModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "n": model.n,
        "m": model.m,
        "X": model.X.tolist(),
        "Y": model.training.Y.tolist(),
        "dims": [
            {**d.hyper.to_dict(), "weights": d.weights.tolist(), "jitter": d.jitter}
            for d in model.dims
        ],
    }


def model_from_dict(d: dict, verify: bool = True, rtol: float = 1e-8) -> GpSsmModel:
    """Rebuild a model, keeping the stored weights bit-for-bit.

    With ``verify`` the stored weights must solve the refactorized system to
    relative residual ``rtol``.
    """
    if d.get("version") != MODEL_VERSION:
        raise UsageError(f"unsupported model version {d.get('version')!r}")
    data = TrainingData(np.array(d["X"], dtype=float), np.array(d["Y"], dtype=float))
    if len(d["dims"]) != data.n:
        raise UsageError("number of per-dimension entries does not match n")
    dims = []
    for i, entry in enumerate(d["dims"]):
        hyper = Hyperparameters.from_dict(entry)
        w = np.array(entry["weights"], dtype=float)
        if w.shape != (data.m,):
            raise UsageError(f"dimension {i}: weights must have length m={data.m}")
        dm = _fit_dim(data.X, data.Y[:, i], hyper, weights=w)
        if verify:
            y = data.Y[:, i]
            L = dm.chol
            r = L @ (L.T @ w) - y
            scale = np.linalg.norm(y) + np.linalg.norm(L, 2) ** 2 * np.linalg.norm(w)
            if np.linalg.norm(r) > rtol * max(scale, 1e-300):
                raise UsageError(f"dimension {i}: stored weights do not solve the model system")
        dims.append(dm)
    return GpSsmModel(data, tuple(dims))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def save_model(model: GpSsmModel, path) -> None:
    write_json(model_to_dict(model), path)


def load_model(path, verify: bool = True) -> GpSsmModel:
    return model_from_dict(read_json(path), verify=verify)
