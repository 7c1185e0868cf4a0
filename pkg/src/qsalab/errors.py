"""Shared exception hierarchy for the qsalab package."""
from __future__ import annotations


class QsaError(Exception):
    """Base class for all qsalab-specific errors."""
