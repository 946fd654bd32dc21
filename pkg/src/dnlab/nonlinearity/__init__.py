"""
Nonlinearity package: semilinear terms, builtin families and hypothesis checks.
"""
from .hypotheses import (
    HypothesisReport,
    HypothesisStatus,
    check_all,
    check_derivatives,
    check_t1a,
    check_t1b,
    check_t1d,
    estimate_kappa0,
)
from .terms import SemilinearTerm, TabulatedTerm, TermMetadata, builtin_family

__all__ = [
    "HypothesisReport",
    "HypothesisStatus",
    "check_all",
    "check_derivatives",
    "check_t1a",
    "check_t1b",
    "check_t1d",
    "estimate_kappa0",
    "SemilinearTerm",
    "TabulatedTerm",
    "TermMetadata",
    "builtin_family",
]
