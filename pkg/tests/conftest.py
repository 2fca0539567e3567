"""Shared oracles and corpus builders for the test suite.

The brute-force window sums below are the independent reference for the
cumulative-sum kernels: they walk every anchor and every window offset with
explicit modular arithmetic and never touch the production code path.
"""

from __future__ import annotations

import numpy as np

from gridcount import Bag, GridGeometry


def brute_forward_window_sum(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    extents, window = geometry.extents, geometry.window
    out = np.zeros_like(values, dtype=np.float64)
    for anchor in np.ndindex(*extents):
        gathered = values[
            np.ix_(
                *[
                    (np.arange(k, k + w) % e)
                    for k, w, e in zip(anchor, window, extents)
                ]
            )
        ]
        out[anchor] = gathered.sum(axis=tuple(range(len(extents))))
    return out


def brute_reverse_window_sum(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    extents, window = geometry.extents, geometry.window
    out = np.zeros_like(values, dtype=np.float64)
    for cell in np.ndindex(*extents):
        gathered = values[
            np.ix_(
                *[
                    (np.arange(i - w + 1, i + 1) % e)
                    for i, w, e in zip(cell, window, extents)
                ]
            )
        ]
        out[cell] = gathered.sum(axis=tuple(range(len(extents))))
    return out


def random_geometry(rng: np.random.Generator, max_extent=8, max_cells=None) -> GridGeometry:
    ndim = int(rng.integers(1, 4))
    while True:
        extents = tuple(int(rng.integers(1, max_extent + 1)) for _ in range(ndim))
        if max_cells is None or np.prod(extents) <= max_cells:
            break
    window = tuple(int(rng.integers(1, e + 1)) for e in extents)
    return GridGeometry(extents, window)


def random_bags(
    rng: np.random.Generator,
    n_bags: int,
    vocab_size: int,
    mean_count: float = 3.0,
    dense: bool = False,
) -> list[Bag]:
    """Random corpus; every bag has at least one positive count."""
    bags = []
    for t in range(n_bags):
        counts = rng.poisson(mean_count, vocab_size)
        if dense:
            counts = counts + 1
        elif counts.sum() == 0:
            counts[rng.integers(vocab_size)] += 1
        entries = {int(z): float(c) for z, c in enumerate(counts) if c > 0}
        bags.append(Bag(entries=entries, id=str(t)))
    return bags
