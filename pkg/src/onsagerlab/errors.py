"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class; carries a short condition name for CLI reporting."""

    condition = "error"


class EmptyRegionError(LabError):
    condition = "empty-region"


class CollarError(LabError):
    condition = "out-of-collar"


class ResolutionError(LabError):
    condition = "resolution"


class MarginError(LabError):
    condition = "margin"


class UnsupportedShiftError(LabError):
    condition = "unsupported-shift"


class ParameterError(LabError, ValueError):
    condition = "parameter"


class ShapeError(LabError, ValueError):
    condition = "shape"


class PositivityError(LabError, ValueError):
    condition = "positivity"


class SupportError(LabError):
    condition = "support"


class SolverError(LabError):
    condition = "solver"


class StepSizeError(LabError):
    condition = "step-size"


class SmoothnessLostError(LabError):
    """Raised by the compressible stepper when the shock monitor trips.

    ``partial`` holds whatever trajectory was accumulated before the trip.
    """

    condition = "smoothness-lost"

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class InputError(LabError):
    condition = "input"


class DomainKindError(LabError):
    condition = "domain-kind"
