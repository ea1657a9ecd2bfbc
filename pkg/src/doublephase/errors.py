"""Exception types shared across the package."""


class DoublePhaseError(Exception):
    """Base class for all package errors."""


class InputError(DoublePhaseError, ValueError):
    """Invalid argument or malformed input data."""


class ConfigError(DoublePhaseError):
    """Configuration text failed validation.

    Carries a list of (key, line, reason) diagnostics.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        text = "; ".join(
            f"line {line}: {key}: {reason}" for key, line, reason in self.diagnostics
        )
        super().__init__(text or "invalid configuration")


class GateError(DoublePhaseError):
    """The parameter does not exceed the first eigenvalue, so the two-solution
    scheme does not apply."""


class ConvergenceError(DoublePhaseError):
    """Iteration budget exhausted; carries the best iterate found so far."""

    def __init__(self, message, best=None, iterations=0, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.iterations = iterations
        self.residual = residual


class PositivityError(DoublePhaseError):
    """An eigenfunction iterate lost interior positivity."""


class SeedError(DoublePhaseError):
    """No scan scale gives the truncated functional a negative value."""


class SuperlinearityError(DoublePhaseError):
    """No admissible truncation constant exists below the cap; the supplied
    reaction is probably not superlinear."""


class VerificationError(DoublePhaseError):
    """A computed solution violated an a posteriori sign, bound, or residual
    check."""
