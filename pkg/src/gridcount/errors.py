"""Exception types shared across the package."""

from __future__ import annotations


class DataFormatError(ValueError):
    """Malformed corpus, target, or model input; never silently repaired."""


class ModelFormatError(DataFormatError):
    """Model file is truncated, version-mismatched, or inconsistent."""


class NumericFailure(RuntimeError):
    """Training bound decreased beyond the allowed slack."""
