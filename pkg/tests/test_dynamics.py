import numpy as np
import pytest

from gpssm import (
    Hyperparameters,
    Linear,
    NumericalError,
    Polynomial,
    TrainingData,
    UsageError,
    fit,
    jacobian,
    linear_affine_form,
    predict_mean,
    residual,
    simulate,
)
from gpssm.dynamics import Trajectory
from gpssm.stability import invariant_set

from conftest import random_model
from oracles import central_jacobian, rel_err


def test_zero_steps_returns_start(rng):
    model = random_model(rng, "se")
    traj = simulate(model, [0.3, -0.2], 0)
    assert len(traj) == 1
    assert np.array_equal(traj.states[0], [0.3, -0.2])


def test_simulate_follows_mean_map(rng):
    model = random_model(rng, "polynomial")
    traj = simulate(model, [0.1, 0.2], 5)
    for k in range(5):
        assert np.array_equal(traj.states[k + 1], predict_mean(model, traj.states[k]))


def test_simulate_is_deterministic(rng):
    model = random_model(rng, "se")
    a = simulate(model, [1.0, -2.0], 200)
    b = simulate(model, [1.0, -2.0], 200)
    assert np.array_equal(a.states, b.states)


def test_simulate_argument_checks(rng):
    model = random_model(rng, "linear")
    with pytest.raises(UsageError):
        simulate(model, [0.0, 0.0], -1)
    with pytest.raises(UsageError):
        simulate(model, [0.0], 3)


def test_divergence_reports_step():
    # f(x) = 10 x: overflows after a few hundred steps
    model = fit(TrainingData([[1.0]], [[10.0]]), Hyperparameters(Linear(0.0), 1e-12))
    with pytest.raises(NumericalError) as info, np.errstate(over="ignore", invalid="ignore"):
        simulate(model, [1.0], 1000)
    assert info.value.step > 1
    assert np.all(np.isfinite(info.value.last_state))


def test_fixed_point_is_kept():
    # 0.5 x is contracting with its fixed point at the origin
    model = fit(TrainingData([[1.0, -1.0]], [[0.5], [-0.5]]), Hyperparameters(Linear(0.0), 1e-12))
    traj = simulate(model, [0.0], 100)
    assert np.max(np.abs(traj.states)) < 1e-6


def test_linear_model_matches_closed_form_iteration(rng):
    for _ in range(10):
        model = random_model(rng, "linear", noise=0.5)
        form = linear_affine_form(model)
        # keep the iteration bounded so that relative and absolute errors coincide
        A = form.A
        if np.max(np.abs(np.linalg.eigvals(A))) > 1.0:
            continue
        x0 = rng.uniform(-1, 1, size=2)
        traj = simulate(model, x0, 50)
        x = x0.copy()
        for k in range(50):
            x = A @ x + form.b
            assert np.max(np.abs(traj.states[k + 1] - x)) < 1e-10 * (1 + np.max(np.abs(x)))


def test_linear_residual_is_affine(rng):
    model = random_model(rng, "linear")
    form = linear_affine_form(model)
    for x in rng.uniform(-5, 5, size=(20, 2)):
        assert np.allclose(residual(model, x), (form.A - np.eye(2)) @ x + form.b, rtol=1e-12, atol=1e-12)


def test_linear_jacobian_is_constant(rng):
    model = random_model(rng, "linear")
    A = linear_affine_form(model).A
    for x in rng.uniform(-50, 50, size=(5, 2)):
        assert np.allclose(jacobian(model, x), A, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("family", ["linear", "polynomial", "se"])
def test_jacobian_matches_finite_differences(family):
    rng = np.random.default_rng({"linear": 11, "polynomial": 12, "se": 13}[family])
    worst = 0.0
    for _ in range(100):
        model = random_model(rng, family, m=int(rng.integers(3, 20)))
        x = rng.uniform(-2, 2, size=2)
        fd = central_jacobian(lambda z: predict_mean(model, z), x, step=1e-6)
        worst = max(worst, rel_err(jacobian(model, x), fd))
    assert worst < 1e-5


def test_se_jacobian_vanishes_far_from_data(rng):
    for _ in range(10):
        model = random_model(rng, "se")
        assert np.max(np.abs(jacobian(model, [300.0, -400.0]))) < 1e-8


def test_se_residual_is_minus_x_far_away(rng):
    model = random_model(rng, "se")
    for scale in (1e3, 1e5):
        x = np.array([0.6, -0.8]) * scale
        assert np.allclose(residual(model, x), -x, rtol=1e-12)


def test_se_trajectory_stays_in_invariant_box(rng):
    for _ in range(5):
        model = random_model(rng, "se")
        w = invariant_set(model)
        for _ in range(5):
            traj = simulate(model, rng.normal(size=2) * 100, 60)
            assert np.all(np.abs(traj.states[1:]) <= w * (1 + 1e-12))


def test_trajectory_csv_round_trip(tmp_path, rng):
    model = random_model(rng, "se")
    traj = simulate(model, [0.5, 0.5], 10, dt=0.1)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    head = path.read_text().splitlines()[0]
    assert head == "k,t,x1,x2"
    back = Trajectory.from_csv(path)
    assert np.array_equal(back.states, traj.states)
    assert back.dt == pytest.approx(0.1)


def test_trajectory_rejects_empty():
    with pytest.raises(UsageError):
        Trajectory(np.empty((0, 2)))


def test_polynomial_jacobian_matches_expanded_derivative():
    # 1-D, degree 2, a single training point: f(x) = h (x X + s^2)^2
    X, s, y, noise = 1.5, 0.7, 2.0, 0.1
    k = (X * X + s * s) ** 2
    h = y / (k + noise)
    model = fit(TrainingData([[X]], [[y]]), Hyperparameters(Polynomial(s, 2), noise))
    for x in (-2.0, 0.0, 0.3, 4.0):
        expected = 2 * h * X * (x * X + s * s)
        assert jacobian(model, [x])[0, 0] == pytest.approx(expected, rel=1e-12)


def test_jacobian_dimension_checked(rng):
    model = random_model(rng, "se")
    with pytest.raises(UsageError):
        jacobian(model, [1.0, 2.0, 3.0])
