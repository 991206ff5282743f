"""Exception hierarchy shared by every module of the package."""


class GrauertError(Exception):
    """Base class for all package errors."""


class DimensionError(GrauertError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(GrauertError, ValueError):
    """A parameter lies outside the domain where the operation is defined."""


class BranchError(GrauertError, ValueError):
    """Points lie outside the near-diagonal branch of the complexified distance."""


class DegenerateGeometryError(GrauertError):
    """A Levi form, flow direction, or normalization is degenerate."""


class ChartValidityError(GrauertError):
    """A point falls outside the validity region of a Heisenberg chart."""


class AccuracyError(GrauertError):
    """A quadrature or root finder failed to reach the requested tolerance.

    Attributes
    ----------
    achieved : float
        Best tolerance reached before giving up.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(f"{message} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


class ConfigurationError(GrauertError, ValueError):
    """A kernel-sum configuration cannot certify its truncation tail.

    Attributes
    ----------
    smallest_certifiable : float
        Smallest tail tolerance the configuration could certify.
    """

    def __init__(self, message, smallest_certifiable=float("nan")):
        super().__init__(
            f"{message}; smallest certifiable tail_tol = {smallest_certifiable:.3e}"
        )
        self.smallest_certifiable = smallest_certifiable


class FitError(GrauertError):
    """A rate fit could not be performed on the supplied data.

    Attributes
    ----------
    data : dict
        The offending data, for diagnostics.
    """

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data or {}


class UnsupportedPhaseError(GrauertError):
    """Phase has several or degenerate critical points in the domain."""
