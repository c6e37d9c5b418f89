"""Deterministic Gaussian process state space models.

Fit per-dimension GP regressors to state-transition data, then study the
resulting mean map ``x[k+1] = f(x[k])``: its equilibria and their stability,
and the global bound that squared exponential kernels impose.
"""

from .errors import GpSsmError, NumericalError, UsageError
from .kernels import (
    Hyperparameters,
    Linear,
    Polynomial,
    SquaredExponential,
    cross_covariance,
    gram_matrix,
    kernel_eval,
    kernel_from_dict,
    kernel_gradient_x,
)
from .optim import OptimConfig
from .gp import (
    GpSsmModel,
    TrainingData,
    fit,
    fit_optimized,
    log_marginal_likelihood,
    optimize_hyperparameters,
    predict_mean,
    predict_variance,
)
from .dynamics import Trajectory, jacobian, residual, simulate
from .equilibria import (
    AffineForm,
    Bound,
    EquilibriumSet,
    SolverConfig,
    bolzano_slice_check,
    classify_linear_equilibria,
    find_equilibria,
    linear_affine_form,
    theoretical_bound,
)
from .stability import (
    StabilityReport,
    certify_bounded,
    classify_linear,
    classify_local,
    invariant_set,
    ultimate_bound,
)

__version__ = "0.1.0"
