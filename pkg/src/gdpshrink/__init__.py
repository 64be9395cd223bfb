"""Generalized double Pareto shrinkage for linear regression."""
from . import _backend
from .distributions import (
    GdpHyper,
    gdp_cdf,
    gdp_moments,
    gdp_pdf,
    gdp_quantile,
    gdp_sample_direct,
    gdp_sample_hierarchical,
    kappa_pdf_general,
    kappa_pdf_standard,
    rand_inverse_gaussian,
)
from .errors import ConvergenceError, DataError, GdpError, NumericError, UsageError

__version__ = "0.1.0"

__all__ = [
    "GdpHyper",
    "gdp_pdf",
    "gdp_cdf",
    "gdp_quantile",
    "gdp_moments",
    "gdp_sample_direct",
    "gdp_sample_hierarchical",
    "kappa_pdf_standard",
    "kappa_pdf_general",
    "rand_inverse_gaussian",
    "GdpError",
    "DataError",
    "NumericError",
    "ConvergenceError",
    "UsageError",
]
