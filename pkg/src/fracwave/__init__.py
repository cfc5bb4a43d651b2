"""Mittag-Leffler propagators for space-time fractional Schrodinger flows."""

from . import errors, mlf, spectral
from .mlf import MLParams, mittag_leffler, ml_eval, ml_symbol
from .spectral import DispersionTable, Field, Grid, SymbolSpec

__version__ = "0.1.0"

__all__ = [
    "DispersionTable",
    "Field",
    "Grid",
    "MLParams",
    "SymbolSpec",
    "errors",
    "mittag_leffler",
    "ml_eval",
    "ml_symbol",
    "mlf",
    "spectral",
]
