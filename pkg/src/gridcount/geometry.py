"""Grid geometry: extents, window sizes, and the torus they define."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probability floor applied after every normalization of grid distributions.
# Keeps logs finite and prevents absorbing zeros in the multiplicative update.
PROB_FLOOR = 1e-10


@dataclass(frozen=True)
class GridGeometry:
    """A D-dimensional toroidal grid of cells with a sliding hypercube window.

    ``extents`` gives the grid size per dimension, ``window`` the window size.
    Windows wrap around every dimension (the grid is a torus).
    """

    extents: tuple[int, ...]
    window: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(int(e) for e in self.extents)
        window = tuple(int(w) for w in self.window)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "window", window)
        if len(extents) < 1:
            raise ValueError("grid must have at least one dimension")
        if len(window) != len(extents):
            raise ValueError(
                f"window has {len(window)} dims, extents has {len(extents)}"
            )
        for d, (e, w) in enumerate(zip(extents, window), start=1):
            if e < 1:
                raise ValueError(f"extent must be positive in dim {d}")
            if w < 1:
                raise ValueError(f"window must be positive in dim {d}")
            if w > e:
                raise ValueError(f"window exceeds extent in dim {d}")
        if self.n_cells > np.iinfo(np.intp).max:
            raise ValueError("grid cell count exceeds addressable range")

    @property
    def ndim(self) -> int:
        return len(self.extents)

    @property
    def n_cells(self) -> int:
        """Total number of grid cells (and of window anchor positions)."""
        return int(np.prod([int(e) for e in self.extents], dtype=object))

    @property
    def window_volume(self) -> int:
        return int(np.prod([int(w) for w in self.window], dtype=object))

    @property
    def capacity(self) -> float:
        """Grid volume over window volume: the equivalent number of topics."""
        return self.n_cells / self.window_volume

    def cell_index(self, position: tuple[int, ...]) -> int:
        """Row-major linear index of a grid position."""
        if len(position) != self.ndim:
            raise ValueError(f"position has {len(position)} dims, expected {self.ndim}")
        for d, (p, e) in enumerate(zip(position, self.extents), start=1):
            if not 0 <= p < e:
                raise ValueError(f"position out of range in dim {d}")
        return int(np.ravel_multi_index(position, self.extents))

    def wrap(self, position: tuple[int, ...]) -> tuple[int, ...]:
        """Reduce a (possibly negative) position modulo the extents."""
        return tuple(int(p) % e for p, e in zip(position, self.extents))
