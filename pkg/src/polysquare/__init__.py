"""Geodesic flow on polysquare translation surfaces with exact slope arithmetic."""
from .errors import PolysquareError, PrecisionExhausted, SingularHit
from .numbers import ContinuedFraction, LinearForm

__version__ = "0.1.0"

__all__ = ["ContinuedFraction", "LinearForm", "PolysquareError", "PrecisionExhausted", "SingularHit"]
