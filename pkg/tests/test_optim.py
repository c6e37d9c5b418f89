import numpy as np
import pytest
from scipy.optimize import minimize, rosen, rosen_der

from gpssm.optim import OptimConfig, minimize_cg


def test_quadratic_minimum():
    Q = np.array([[3.0, 0.5], [0.5, 1.0]])
    c = np.array([1.0, -2.0])
    res = minimize_cg(lambda x: (0.5 * x @ Q @ x - c @ x, Q @ x - c), np.zeros(2), grad_tol=1e-7)
    assert res.converged
    assert np.allclose(res.x, np.linalg.solve(Q, c), atol=1e-7)


def test_rosenbrock_matches_scipy():
    x0 = np.array([-1.2, 1.0])
    ours = minimize_cg(lambda x: (rosen(x), rosen_der(x)), x0, max_iter=5000, grad_tol=1e-8)
    ref = minimize(rosen, x0, jac=rosen_der, method="BFGS", options={"gtol": 1e-10})
    assert np.allclose(ours.x, ref.x, atol=1e-5)


def test_bounds_are_respected():
    # unconstrained minimum at 5, box stops at 2
    res = minimize_cg(lambda x: ((x[0] - 5.0) ** 2, np.array([2 * (x[0] - 5.0)])), np.array([0.0]),
                      bounds=(-2.0, 2.0))
    assert res.x[0] == pytest.approx(2.0)
    assert res.converged


def test_never_increases_objective():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x0 = rng.normal(size=3) * 2
        f = lambda x: (float(np.sum(x**4 - 3 * x**2 + x)), 4 * x**3 - 6 * x + 1)
        res = minimize_cg(f, x0, max_iter=30)
        assert res.fun <= f(x0)[0]


def test_non_finite_values_treated_as_failed_steps():
    def f(x):
        if x[0] > 1.0:
            return np.inf, np.array([np.nan])
        return (x[0] - 0.8) ** 2, np.array([2 * (x[0] - 0.8)])

    res = minimize_cg(f, np.array([-3.0]), grad_tol=1e-10)
    assert res.x[0] == pytest.approx(0.8, abs=1e-6)
    with pytest.raises(ArithmeticError):
        minimize_cg(f, np.array([2.0]))


def test_config_round_trip():
    cfg = OptimConfig(max_iter=7, restarts=1, seed=4)
    assert OptimConfig.from_dict(cfg.to_dict()) == cfg
