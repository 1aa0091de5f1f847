"""Mission planning for agile Earth-observation satellites."""

from .core import (AcquisitionRequest, ChainedAcquisition, DataError, EphemerisRecord, ParseError,
                   Plan, ProblemInstance, ValidationReport, load_instance, parse_ephemeris,
                   parse_requests, read_plan, validate_plan, write_instance, write_plan)
from .generator import generate_instance
from .geometry import Attitude, DtoWindow, GeoPoint

__version__ = "0.1.0"

__all__ = [
    "AcquisitionRequest", "Attitude", "ChainedAcquisition", "DataError", "DtoWindow",
    "EphemerisRecord", "GeoPoint", "ParseError", "Plan", "ProblemInstance", "ValidationReport",
    "generate_instance", "load_instance", "parse_ephemeris", "parse_requests", "read_plan",
    "validate_plan", "write_instance", "write_plan",
]
