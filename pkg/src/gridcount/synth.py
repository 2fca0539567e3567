"""Synthetic corpora drawn from a known counting grid.

Documents follow the model's own generative story: pick a window anchor
uniformly at random, average the planted grid distributions over that
window, and draw word ids independently from the average. Anchors, planted
grids, and optional labels are returned so recovery can be scored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .corpus import Bag
from .geometry import GridGeometry
from .model import CountingGrid, compute_histograms, floor_distributions

__all__ = ["SynthSpec", "generate", "blocky_grid", "block_labeler"]


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic corpus.

    ``planted`` may be an explicit :class:`CountingGrid` or the string
    ``"blocky"`` for a grid of tight random distributions, one per
    non-overlapping window tile. ``n_words`` is either a fixed per-document
    word count or an inclusive ``(low, high)`` range. ``labeler`` maps an
    anchor position to a label carried on the generated bag.
    """

    geometry: GridGeometry
    vocab_size: int
    n_docs: int
    n_words: int | tuple[int, int]
    seed: int = 0
    planted: CountingGrid | str = "blocky"
    sharpness: float = 10.0
    labeler: Callable[[tuple[int, ...]], int] | None = None

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocabulary size must be positive")
        if self.n_docs < 1:
            raise ValueError("need at least one document")
        lo, hi = self.word_range
        if lo < 1 or hi < lo:
            raise ValueError("words per document must be a positive count or range")
        if isinstance(self.planted, CountingGrid):
            if self.planted.geometry != self.geometry:
                raise ValueError("planted grid geometry does not match")
            if self.planted.vocab_size != self.vocab_size:
                raise ValueError("planted grid vocabulary size does not match")
        elif self.planted != "blocky":
            raise ValueError("planted must be a CountingGrid or 'blocky'")

    @property
    def word_range(self) -> tuple[int, int]:
        if isinstance(self.n_words, tuple):
            return int(self.n_words[0]), int(self.n_words[1])
        return int(self.n_words), int(self.n_words)


def blocky_grid(
    geometry: GridGeometry, vocab_size: int, rng: np.random.Generator, sharpness: float = 10.0
) -> CountingGrid:
    """Planted grid of tight per-tile distributions.

    The torus is partitioned into capacity-many non-overlapping window
    tiles; each tile gets one sparse distribution (normalized exponentials
    of scaled uniforms), shared by all of its cells. Extents must be
    divisible by the window along every dimension.
    """
    for d, (e, w) in enumerate(zip(geometry.extents, geometry.window), start=1):
        if e % w != 0:
            raise ValueError(f"blocky grid needs extent divisible by window in dim {d}")
    tiles = tuple(e // w for e, w in zip(geometry.extents, geometry.window))
    n_tiles = int(np.prod(tiles))
    raw = np.exp(sharpness * rng.random((n_tiles, vocab_size)))
    tile_probs = raw / raw.sum(axis=-1, keepdims=True)

    probs = np.empty((*geometry.extents, vocab_size))
    for cell in np.ndindex(*geometry.extents):
        tile = tuple(c // w for c, w in zip(cell, geometry.window))
        probs[cell] = tile_probs[np.ravel_multi_index(tile, tiles)]
    return CountingGrid.from_array(geometry, floor_distributions(probs))


def block_labeler(geometry: GridGeometry) -> Callable[[tuple[int, ...]], int]:
    """Label an anchor by the window tile its position falls in."""
    tiles = tuple(e // w for e, w in zip(geometry.extents, geometry.window))

    def labeler(anchor: tuple[int, ...]) -> int:
        tile = tuple(a // w for a, w in zip(anchor, geometry.window))
        return int(np.ravel_multi_index(tile, tiles))

    return labeler


def generate(spec: SynthSpec) -> tuple[list[Bag], list[tuple[int, ...]], CountingGrid]:
    """Draw a corpus from the spec; returns (bags, true anchors, planted grid).

    Each document draws its anchor uniformly over all grid positions and its
    words independently from the window-averaged distribution there. The
    whole corpus is a pure function of the seed; each document uses its own
    derived substream.
    """
    root = np.random.SeedSequence(spec.seed)
    grid_seq, *doc_seqs = root.spawn(spec.n_docs + 1)

    if isinstance(spec.planted, CountingGrid):
        grid = spec.planted
    else:
        grid = blocky_grid(
            spec.geometry, spec.vocab_size, np.random.default_rng(grid_seq), spec.sharpness
        )
    hist = compute_histograms(grid).flat()

    lo, hi = spec.word_range
    bags: list[Bag] = []
    anchors: list[tuple[int, ...]] = []
    for t, seq in enumerate(doc_seqs):
        rng = np.random.default_rng(seq)
        flat_anchor = int(rng.integers(spec.geometry.n_cells))
        anchor = tuple(
            int(v) for v in np.unravel_index(flat_anchor, spec.geometry.extents)
        )
        n_words = int(rng.integers(lo, hi + 1)) if hi > lo else lo
        counts = rng.multinomial(n_words, hist[flat_anchor])
        entries = {int(z): float(c) for z, c in enumerate(counts) if c > 0}
        target = spec.labeler(anchor) if spec.labeler is not None else None
        bags.append(Bag(entries=entries, id=f"doc{t}", target=target))
        anchors.append(anchor)
    return bags, anchors, grid
