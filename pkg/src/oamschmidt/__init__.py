"""Two-photon orbital-angular-momentum entanglement from a double-Gaussian
down-conversion source: Schmidt spectrum, radial overlaps, phase-plate
coincidences and estimation of the Schmidt number from measured curves."""

from .specfun import SeriesControl, SeriesConvergenceError
from .amplitude import ModeIndex, SourceParams, TransverseVec
from .radial import DetectionParams, RadialTable
from .plates import AngularDiaphragm, Custom, Orientation, SpiralPhasePlate
from .coincidence import CoincidenceCurve
from .estimator import FitError, FitResult, MeasurementSet

__version__ = "0.1.0"

__all__ = [
    "SeriesControl",
    "SeriesConvergenceError",
    "ModeIndex",
    "SourceParams",
    "TransverseVec",
    "DetectionParams",
    "RadialTable",
    "AngularDiaphragm",
    "SpiralPhasePlate",
    "Custom",
    "Orientation",
    "CoincidenceCurve",
    "FitError",
    "FitResult",
    "MeasurementSet",
]
