"""Exception types shared across the package."""


class GpSsmError(Exception):
    """Base class for all errors raised by gpssm."""


class UsageError(GpSsmError, ValueError):
    """Invalid arguments: wrong shapes, wrong kernel family, violated preconditions."""


class NumericalError(GpSsmError, ArithmeticError):
    """A numerical routine failed (factorization, eigen-solver, non-finite state)."""
