"""Exception hierarchy shared by every layer of the package."""


class QHDError(Exception):
    """Base class for all package errors."""


class ValidationError(QHDError, ValueError):
    """Inputs violate a documented precondition or type invariant."""


class GridError(ValidationError):
    """Grid geometry is unusable (odd or tiny axes, rank above the cap)."""


class CommensurabilityError(ValidationError):
    """A requested plane-wave mode does not lie on the grid's reciprocal lattice."""


class NumericalError(QHDError, ArithmeticError):
    """A computation left its valid numerical range."""


class NonFinite(NumericalError):
    """State contains NaN or infinity."""


class FloorViolation(NumericalError):
    """Density fell below the floor where a division or logarithm needs it."""


class AllMasked(FloorViolation):
    """Every grid point is below the density floor."""


class UnwrapAmbiguous(NumericalError):
    """Phase continuation met a jump it cannot resolve (usually a node)."""


class NodeFormation(NumericalError):
    """The hydrodynamic form broke down because the density developed a node.

    ``state`` and ``records`` hold the partial run up to the failure.
    """

    def __init__(self, message, state=None, records=None, step=None):
        super().__init__(message)
        self.state = state
        self.records = records if records is not None else []
        self.step = step


class NoConvergence(NumericalError):
    """An iterative search hit its step limit."""


class SeriesTooShort(ValidationError):
    """Centered time differences need at least three snapshots."""
