import numpy as np
import pytest

from gpssm import Hyperparameters, Linear, Polynomial, SquaredExponential, TrainingData, fit


def random_kernel(rng, family):
    if family == "linear":
        return Linear(float(rng.uniform(0.2, 2.0)))
    if family == "polynomial":
        return Polynomial(float(rng.uniform(0.3, 1.5)), int(rng.choice([2, 3, 5])))
    return SquaredExponential(float(np.exp(rng.uniform(np.log(0.3), np.log(3.0)))),
                              float(np.exp(rng.uniform(np.log(0.3), np.log(2.0)))))


def random_data(rng, n=2, m=20, spread=2.0):
    X = rng.uniform(-spread, spread, size=(n, m))
    Y = rng.normal(size=(m, n))
    return TrainingData(X, Y)


def random_model(rng, family, n=2, m=20, noise=None):
    data = random_data(rng, n, m)
    hypers = [Hyperparameters(random_kernel(rng, family),
                              noise if noise is not None else float(np.exp(rng.uniform(np.log(1e-2), np.log(1.0)))))
              for _ in range(n)]
    return fit(data, hypers)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
