"""Exception types raised across the package."""


class FibrekitError(Exception):
    """Base class for all package errors."""


class NonFiniteEvaluation(FibrekitError, ArithmeticError):
    """A chart function returned NaN or Inf at a finite input."""


class DimensionMismatch(FibrekitError, ValueError):
    pass


class NotRelativelyHolomorphic(FibrekitError):
    """A coefficient depends on antiholomorphic fiber coordinates beyond tolerance."""

    def __init__(self, defect: float, tolerance: float):
        super().__init__(f"relative holomorphy defect {defect:.3e} exceeds {tolerance:.1e}")
        self.defect = defect
        self.tolerance = tolerance


class SingularFiberJacobian(FibrekitError, ArithmeticError):
    pass


class SingularMetric(FibrekitError, ArithmeticError):
    pass


class IncompleteTransport(FibrekitError):
    """Parallel transport did not reach t = 1."""


class DegenerateTwist(FibrekitError):
    """The two fiberwise complex structures coincide at the evaluation point."""


class IndexOutOfRange(FibrekitError, IndexError):
    pass


class UnknownFamily(FibrekitError, KeyError):
    def __str__(self) -> str:
        return f"unknown family id {self.args[0]!r}"
