"""Exception hierarchy.

Every error raised by the numerical core derives from :class:`QbmError`.
The subclasses of :class:`NumericalGuard` are refusals made before a
computation would produce untrustworthy numbers; the command-line runner
maps them to exit code 2.
"""


class QbmError(Exception):
    """Base class for all package errors."""


class ConfigError(QbmError, ValueError):
    """Invalid configuration; carries an itemized list of problems."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GridMismatchError(QbmError, ValueError):
    """Inputs that must share a grid do not."""


class NumericalGuard(QbmError):
    """A computation was refused because its result would not be reliable."""


class NyquistError(NumericalGuard, ValueError):
    """Requested frequency range exceeds what the time step resolves."""


class StepSizeError(NumericalGuard, ValueError):
    """Time step too coarse for stable or accurate integration."""

    def __init__(self, message, recommended_dt=None):
        self.recommended_dt = recommended_dt
        if recommended_dt is not None:
            message = f"{message}; use dt <= {recommended_dt:.6g}"
        super().__init__(message)


class MemoryBudgetError(NumericalGuard, ValueError):
    """Dense two-time storage would exceed the configured budget."""

    def __init__(self, n_steps, max_steps):
        self.n_steps = n_steps
        self.max_steps = max_steps
        super().__init__(
            f"n_steps={n_steps} exceeds the dense-kernel budget; "
            f"max allowed n_steps is {max_steps}"
        )


class IntegrationError(NumericalGuard, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        self.estimate = estimate
        self.error = error
        super().__init__(f"{message} (best estimate {estimate!r}, error bound {error:.3g})")


class DivergenceError(NumericalGuard, ArithmeticError):
    """A requested kernel is infinite for the given regularization."""


class PoleError(NumericalGuard, ZeroDivisionError):
    """Evaluation hit a pole of a response function."""


class InstabilityError(NumericalGuard, ArithmeticError):
    """The dressed oscillator is statically or dynamically unstable."""


class FactorizationError(NumericalGuard, ArithmeticError):
    """Covariance matrix is not positive semidefinite within the jitter budget."""

    def __init__(self, message, min_eigenvalue):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"{message}; most negative eigenvalue {min_eigenvalue:.6g}")


class TruncationError(NumericalGuard, ValueError):
    """Frequency grid truncates spectral tails above tolerance."""

    def __init__(self, message, required_omega_max=None):
        self.required_omega_max = required_omega_max
        if required_omega_max is not None:
            message = f"{message}; need omega_max >= {required_omega_max:.6g}"
        super().__init__(message)


class IdentityCheckError(QbmError):
    """An FDR or structural identity exceeded its threshold."""
