"""Optimistic contextual bandits over finite function classes.

Implements optimistic least squares, its uncertainty-filtered second order
variants (known, estimated and unknown noise variance), a brute-force eluder
dimension calculator and a reproducible simulation harness.
"""

from .core import (
    DegenerateSetError,
    FunctionClass,
    InteractionRecord,
    best_mean,
    validate_class,
    width,
)

__all__ = [
    "DegenerateSetError",
    "FunctionClass",
    "InteractionRecord",
    "best_mean",
    "validate_class",
    "width",
]

__version__ = "0.1.0"
