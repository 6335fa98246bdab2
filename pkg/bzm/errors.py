"""
Exception classes raised by bzm

Errors that describe bad input derive from ValueError, 
failures of a numerical scheme derive from RuntimeError and 
carry a diagnostics dictionary
"""

from typing import Optional


class BZMError(Exception):
    """Base class of all bzm errors"""


#%% Input errors
class GridError(BZMError, ValueError):
    """Invalid grid or grid combination"""


class InvalidDimensionError(GridError):
    """Dimension other than 2 or 3"""


class InvalidResolutionError(GridError):
    """Points per axis not a power of two >= 8"""


class GridMismatchError(GridError):
    """Fields living on different grids"""


class ComponentMismatchError(BZMError, ValueError):
    """Number of components does not fit the operation"""


class HypothesisViolation(BZMError, ValueError):
    """Parameters outside the range where an estimate is stated"""
    def __init__(self, condition: str):
        super().__init__('Hypothesis violated: {}'.format(condition))
        self.condition = condition


class DomainViolation(BZMError, ValueError):
    """Scalar argument outside its admissible range"""


class DensityRangeError(BZMError, ValueError):
    """Density outside the validity interval of the conductivity law"""


class MissingChannelError(BZMError, KeyError):
    """Trajectory has no such channel"""


class InsufficientSamplesError(BZMError, ValueError):
    """Not enough time samples for a centered difference"""


class IncompatibleScaleError(BZMError, ValueError):
    """Scaling factor is not a negative power of two"""


class NonSolenoidalError(BZMError, ValueError):
    """Velocity field with a divergence above tolerance"""


class NegativeTimeError(BZMError, ValueError):
    """Negative evolution time"""


class FormatMismatchError(BZMError, ValueError):
    """Field file does not match the expected format or grid"""


class TruncatedFileError(BZMError, ValueError):
    """Field file ends before all samples are read"""


class ConfigParseError(BZMError, ValueError):
    """Malformed or unknown configuration entry"""


#%% Numerical failures
class NumericalFailure(BZMError, RuntimeError):
    """A scheme could not proceed

    Parameters
    ----------
    message : str
        Human readable reason
    diagnostics : Optional[dict], optional
        Values describing the state at failure, by default None
    """
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class CFLViolation(NumericalFailure):
    """Advective CFL number above the admissible bound"""


class KappaDegenerateError(NumericalFailure):
    """Conductivity below its positive lower bound"""


class LambdaDegenerateError(NumericalFailure):
    """Specific volume below its positive lower bound"""


class PressureNonconvergence(NumericalFailure):
    """Krylov pressure solve did not reach tolerance"""


class DensityBoundViolation(NumericalFailure):
    """Density left the interval given by the maximum principle"""
