"""Numerics for polynomial vector fields, their parabolic unfoldings, Long
Trajectories and the quadratic conjugacy construction."""

from .errors import HoloflowError, NumericFailure, ValidationError

__version__ = "0.1.0"

__all__ = ["HoloflowError", "NumericFailure", "ValidationError", "__version__"]
