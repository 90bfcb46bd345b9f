"""Randomized sketching, sketched solvers and their empirical verifiers."""

from ._kernels import BACKEND
from .linalg import (
    DegenerateInputError,
    DimensionError,
    PassCountingMatrix,
    RankDeficientWarning,
    ZeroRankError,
)
from .sketch import ColumnSelection, SketchSpec

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ColumnSelection",
    "DegenerateInputError",
    "DimensionError",
    "PassCountingMatrix",
    "RankDeficientWarning",
    "SketchSpec",
    "ZeroRankError",
]
