"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .geometry import GridGeometry

__all__ = ["as_count_matrix", "check_geometry", "check_targets"]


def as_count_matrix(X, vocab_size: int | None = None) -> sp.csr_matrix:
    """Coerce a dense or sparse array to a validated CSR count matrix.

    Counts must be finite and non-negative; the column count must match
    ``vocab_size`` when given.
    """
    if sp.issparse(X):
        mat = X.tocsr().astype(np.float64)
    else:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"count matrix must be 2-dimensional, got shape {arr.shape}")
        mat = sp.csr_matrix(arr)
    if mat.shape[0] < 1:
        raise ValueError("count matrix has no rows")
    if vocab_size is not None and mat.shape[1] != vocab_size:
        raise ValueError(
            f"count matrix has {mat.shape[1]} columns, model expects {vocab_size}"
        )
    if mat.nnz and not np.all(np.isfinite(mat.data)):
        raise ValueError("counts must be finite")
    if mat.nnz and mat.data.min() < 0:
        raise ValueError("counts must be non-negative")
    return mat


def check_geometry(extent, window) -> GridGeometry:
    """Build a validated geometry from extent and window sequences."""
    try:
        extents = tuple(int(e) for e in np.atleast_1d(extent))
        windows = tuple(int(w) for w in np.atleast_1d(window))
    except (TypeError, ValueError):
        raise ValueError("extent and window must be integer sequences")
    return GridGeometry(extents, windows)


def check_targets(y, kind: str, n_rows: int) -> np.ndarray:
    """Validate one target per count-matrix row."""
    arr = np.asarray(y)
    if arr.ndim != 1 or arr.shape[0] != n_rows:
        raise ValueError(f"expected {n_rows} targets, got shape {arr.shape}")
    if kind == "continuous":
        arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("continuous targets must be finite")
    return arr
