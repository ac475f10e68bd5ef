"""Exact pseudo-differential calculus for the BKP and CKP hierarchies."""

from .diffpoly import DiffPoly, u
from .pdo import LaurentPDO, NonlocalPDO

__all__ = ["DiffPoly", "u", "LaurentPDO", "NonlocalPDO"]
