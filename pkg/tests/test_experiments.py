import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from gpssm import (
    EquilibriumSet,
    Linear,
    OptimConfig,
    Polynomial,
    SquaredExponential,
    StabilityReport,
    UsageError,
    residual,
)
from gpssm.experiments import (
    BUCKETS,
    ExperimentConfig,
    VdpConfig,
    bucket,
    kernel_label,
    run_equilibrium_census,
    run_vdp_demo,
)
from gpssm.io import model_from_dict, model_to_dict
from gpssm.stability import digest

SMALL = ExperimentConfig(system_count=3, train_points_per_axis=5,
                         kernels=(Linear(1.0), Polynomial(1.0, 2), SquaredExponential(1.0, 1.0)),
                         optim=OptimConfig(max_iter=15, restarts=0))


@pytest.fixture(scope="module")
def small_table():
    return run_equilibrium_census(SMALL)


@pytest.mark.parametrize("count, name", [
    (0, "0"), (1, "1"), (2, "2"), (3, "[3,4]"), (4, "[3,4]"), (5, "[5,9]"), (9, "[5,9]"),
    (10, "[10,19]"), (19, "[10,19]"), (20, ">=20"), (400, ">=20"), (math.inf, "inf"),
])
def test_bucket(count, name):
    assert bucket(count) == name
    assert name in BUCKETS


def test_kernel_labels():
    assert kernel_label(Linear()) == "linear"
    assert kernel_label(Polynomial(1.0, 3)) == "polynomial p=3"
    assert kernel_label(SquaredExponential()) == "squared exponential"


def test_config_validation_and_round_trip():
    with pytest.raises(UsageError):
        ExperimentConfig(system_count=0)
    with pytest.raises(UsageError):
        ExperimentConfig(kernels=())
    d = json.loads(json.dumps(SMALL.to_dict()))
    assert ExperimentConfig.from_dict(d) == SMALL
    full = ExperimentConfig.from_dict({"fullScale": True})
    assert (full.system_count, full.train_points_per_axis) == (100, 10)


def test_rows_total_system_count(small_table):
    for label in small_table.labels:
        assert small_table.total(label) == SMALL.system_count
    assert len(small_table.runs) == SMALL.system_count * len(SMALL.kernels)


def test_row_regularities(small_table):
    for label, counts in small_table.counts.items():
        for c in counts:
            assert c is not None
            if label == "linear":
                assert c in (0, 1, math.inf)
            elif label.startswith("polynomial"):
                assert c <= 4
            else:
                assert c >= 1


def test_census_is_deterministic(small_table):
    again = run_equilibrium_census(SMALL)
    assert again.rows == small_table.rows
    assert [r.to_dict() for r in again.runs] == [r.to_dict() for r in small_table.runs]


def test_census_independent_of_workers(small_table):
    par = run_equilibrium_census(replace(SMALL, workers=2))
    assert par.rows == small_table.rows
    assert [r.to_dict() for r in par.runs] == [r.to_dict() for r in small_table.runs]


def test_table_csv(tmp_path, small_table):
    path = tmp_path / "t.csv"
    small_table.to_csv(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["kernel", *BUCKETS, "failed"]
    assert len(rows) == 1 + len(small_table.labels)
    for row in rows[1:]:
        assert sum(int(v) for v in row[1:]) == SMALL.system_count
    assert "squared exponential" in small_table.format()


def test_artifacts_reload_and_reverify(small_table):
    for rec in small_table.runs:
        d = json.loads(json.dumps(rec.to_dict()))
        model = model_from_dict(d["model"])
        assert model_to_dict(model) == d["model"]
        eq = EquilibriumSet.from_dict(d["equilibria"])
        for p in eq.points:
            if eq.cardinality == "finite":
                assert np.linalg.norm(residual(model, p.x)) < 1e-8 * (1 + np.linalg.norm(p.x))
        for cert in d["certificates"]:
            rep = StabilityReport.from_dict(cert)
            assert cert["provenance"]["model"] == digest(d["model"])
            assert rep.to_dict()["verdict"] == cert["verdict"]


def test_failures_are_recorded_not_raised():
    # a bad search box makes every non-linear run fail inside the solver
    cfg = replace(SMALL, system_count=1, search_box=(1.0, -1.0))
    table = run_equilibrium_census(cfg)
    assert table.rows["squared exponential"]["failed"] == 1
    assert table.rows["linear"]["1"] == 1
    assert any("squared exponential" in line for line in table.diagnostics)


def test_vdp_zero_steps():
    res = run_vdp_demo(VdpConfig(x0s=((0.5, -0.5),), steps=0, train_points_per_axis=7,
                                 optim=OptimConfig(max_iter=5, restarts=0)))
    run = res.runs[0]
    assert np.array_equal(run.true.states, [[0.5, -0.5]])
    assert np.array_equal(run.model.states, [[0.5, -0.5]])
