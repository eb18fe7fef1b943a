"""Exception hierarchy shared by all modules."""


class RuinError(Exception):
    """Base class for numerical failures raised by this package."""


class DomainError(RuinError, ValueError):
    """Argument outside the domain of a function."""


class ConvergenceError(RuinError, ArithmeticError):
    """Iteration or quadrature did not reach the requested tolerance."""


class ClassificationError(RuinError, ValueError):
    """Numerical probes contradict the declared premium class."""


class BoundaryError(RuinError, ValueError):
    """A loading condition holds with equality (degenerate case)."""


class SafeLoadError(RuinError, ValueError):
    """The net-profit condition fails, so there is no decaying ruin curve."""


class DivergenceError(RuinError, ArithmeticError):
    """A normalising integral diverges."""


class UnsupportedCaseError(RuinError, ValueError):
    pass


class ComplexRootsError(RuinError, ArithmeticError):
    """Negative discriminant of the local characteristic equation."""


class DegenerateRootError(RuinError, ArithmeticError):
    pass


class HypothesisError(RuinError, ValueError):
    """Model lies outside the hypotheses of the asymptotic results."""


class CalibrationError(RuinError, ArithmeticError):
    pass


class TruncationError(RuinError, ArithmeticError):
    """Truncation reserve too small for the requested tolerance."""


class StiffnessError(RuinError, ArithmeticError):
    pass


class FitError(RuinError, ArithmeticError):
    """Reference curve has not reached its asymptotic regime."""


class NonIntegerOrderWarning(UserWarning):
    """Bessel order of the closed form is not a non-negative integer."""
