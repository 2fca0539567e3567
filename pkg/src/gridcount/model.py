"""Counting grid model parameters: per-cell word distributions and histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PROB_FLOOR, GridGeometry
from .kernels import forward_window_sum

__all__ = [
    "GridField",
    "CountingGrid",
    "compute_histograms",
    "bag_log_likelihood",
    "floor_distributions",
]


@dataclass(frozen=True)
class GridField:
    """A dense real tensor over grid cells with Z trailing channels.

    ``values`` has shape ``(*extents, Z)``, row-major: grid dimensions first,
    channel last. All entries must be finite.
    """

    geometry: GridGeometry
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = self.geometry.extents
        if values.ndim != self.geometry.ndim + 1 or values.shape[:-1] != expected:
            raise ValueError(
                f"field shape {values.shape} does not match extents {expected} + channel"
            )
        if values.shape[-1] < 1:
            raise ValueError("field needs at least one channel")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_channels(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        """View of shape (n_cells, Z), row-major over grid positions."""
        return self.values.reshape(self.geometry.n_cells, self.n_channels)


def floor_distributions(probs: np.ndarray, eps: float = PROB_FLOOR) -> np.ndarray:
    """Raise entries of row distributions to at least ``eps``, keeping row sums 1.

    Entries below the floor are set to it and the remaining mass is rescaled,
    so both the floor and the normalization hold exactly (up to rounding).
    """
    low = probs < eps
    if not low.any():
        return probs
    n_low = low.sum(axis=-1, keepdims=True)
    high_mass = np.where(low, 0.0, probs).sum(axis=-1, keepdims=True)
    scale = np.where(high_mass > 0, (1.0 - n_low * eps) / np.where(high_mass > 0, high_mass, 1.0), 1.0)
    out = np.where(low, eps, probs * scale)
    return np.maximum(out, eps)


@dataclass(frozen=True)
class CountingGrid:
    """Normalized word distributions at every cell of a toroidal grid.

    ``probs`` holds one distribution over the Z words per grid cell; every
    entry is at least :data:`~gridcount.geometry.PROB_FLOOR` and every cell
    row sums to one.
    """

    geometry: GridGeometry
    probs: GridField

    def __post_init__(self):
        if self.probs.geometry != self.geometry:
            raise ValueError("probs geometry does not match grid geometry")
        values = self.probs.values
        if values.min() < PROB_FLOOR:
            raise ValueError("grid distribution entry below probability floor")
        sums = values.sum(axis=-1)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError("grid cell distributions must sum to one")

    @property
    def vocab_size(self) -> int:
        return self.probs.n_channels

    @classmethod
    def from_array(cls, geometry: GridGeometry, probs: np.ndarray) -> "CountingGrid":
        return cls(geometry, GridField(geometry, probs))


def compute_histograms(grid: CountingGrid) -> GridField:
    """Per-anchor word distributions: the window-averaged grid distributions.

    h[k, z] is the mean of the grid distributions over the window anchored
    at k, so each anchor row is itself a distribution over words.
    """
    sums = forward_window_sum(grid.probs.values, grid.geometry)
    hist = sums / grid.geometry.window_volume
    np.maximum(hist, PROB_FLOOR, out=hist)
    return GridField(grid.geometry, hist)


def bag_log_likelihood(bag, histograms: GridField, position: tuple[int, ...]) -> float:
    """Log-probability of a bag's counts under the histogram at one anchor.

    Sums c_z * log h[k, z] over the bag's nonzero entries; the probability
    floor on histograms keeps the logs finite.
    """
    k = histograms.geometry.cell_index(tuple(position))
    row = histograms.flat()[k]
    z_max = histograms.n_channels
    total = 0.0
    for word, count in bag.entries.items():
        if not 0 <= word < z_max:
            raise ValueError(f"word id {word} out of range for vocabulary size {z_max}")
        if count != 0:
            total += count * float(np.log(row[word]))
    return total
