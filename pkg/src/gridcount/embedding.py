"""Label embedding: reading class labels or real targets off the grid.

Targets are pushed onto the grid with the same reverse windowed sum the
M-step uses, giving each cell a smoothed label distribution (or expected
value). Predictions read the embedding back out under a bag's smoothed
cell occupancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Bag
from .geometry import GridGeometry
from .kernels import reverse_window_sum
from .model import CountingGrid, compute_histograms
from .trainer import PosteriorMap, e_step

__all__ = [
    "LabelEmbedding",
    "MetricReport",
    "embed",
    "cell_occupancy",
    "predict",
    "loo_evaluate",
]

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class LabelEmbedding:
    """Per-cell label readout.

    Discrete: ``values`` has shape ``(*extents, n_classes)`` and each cell row
    is a distribution over classes. Continuous: ``values`` has shape
    ``(*extents,)`` and holds the smoothed expected target per cell. ``mass``
    is the total posterior weight that reached each cell; cells with no mass
    fall back to the smoothing prior.
    """

    geometry: GridGeometry
    kind: str
    values: np.ndarray
    mass: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        values = np.asarray(self.values, dtype=np.float64)
        extents = self.geometry.extents
        if self.kind == DISCRETE:
            if values.ndim != len(extents) + 1 or values.shape[:-1] != extents:
                raise ValueError("discrete embedding shape must be extents + classes")
        else:
            if values.shape != extents:
                raise ValueError("continuous embedding shape must match extents")
        object.__setattr__(self, "values", values)
        if self.mass is not None:
            mass = np.asarray(self.mass, dtype=np.float64)
            if mass.shape != extents:
                raise ValueError("mass shape must match extents")
            object.__setattr__(self, "mass", mass)

    @property
    def n_classes(self) -> int:
        if self.kind != DISCRETE:
            raise ValueError("continuous embedding has no classes")
        return self.values.shape[-1]


def _smear_posteriors(
    geometry: GridGeometry, posteriors: list[PosteriorMap]
) -> np.ndarray:
    """Reverse windowed sum of every posterior, stacked as (n_bags, n_cells)."""
    for p in posteriors:
        if p.geometry != geometry:
            raise ValueError("posterior geometry does not match")
    stacked = np.stack([p.probs for p in posteriors])  # (T, cells)
    as_grid = stacked.T.reshape(*geometry.extents, len(posteriors))
    smeared = reverse_window_sum(as_grid, geometry)
    return smeared.reshape(geometry.n_cells, len(posteriors)).T


def _check_discrete_targets(targets: np.ndarray, n_classes: int | None) -> int:
    if not np.issubdtype(targets.dtype, np.integer):
        if not np.all(targets == np.floor(targets)):
            raise ValueError("discrete targets must be integers")
        targets = targets.astype(np.int64)
    if targets.min() < 0:
        raise ValueError(f"label {targets.min()} out of range")
    inferred = int(targets.max()) + 1
    if n_classes is None:
        return inferred
    if inferred > n_classes:
        raise ValueError(f"label {targets.max()} out of range for {n_classes} classes")
    return n_classes


def embed(
    posteriors: list[PosteriorMap],
    targets,
    kind: str = DISCRETE,
    alpha: float = 1e-6,
    n_classes: int | None = None,
) -> LabelEmbedding:
    """Embed one target per posterior onto the grid.

    Each cell's numerator collects, over bags, the posterior weight of every
    anchor whose window covers it, weighted by the bag's target; the
    denominator is the unweighted weight. ``alpha`` blends in the global
    label frequency (discrete) or global mean (continuous) so zero-mass
    cells stay defined.
    """
    if not posteriors:
        raise ValueError("cannot embed an empty posterior list")
    y = np.asarray(targets)
    if y.ndim != 1 or len(y) != len(posteriors):
        raise ValueError(f"{len(posteriors)} posteriors but {y.size} targets")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    geometry = posteriors[0].geometry
    smears = _smear_posteriors(geometry, posteriors)  # (T, cells)
    mass = smears.sum(axis=0)

    if kind == DISCRETE:
        n_classes = _check_discrete_targets(y, n_classes)
        y = y.astype(np.int64)
        onehot = np.zeros((len(posteriors), n_classes))
        onehot[np.arange(len(posteriors)), y] = 1.0
        numer = smears.T @ onehot  # (cells, L)
        prior = np.bincount(y, minlength=n_classes) / len(posteriors)
        values = (numer + alpha * prior) / (mass[:, None] + alpha)
        values = values.reshape(*geometry.extents, n_classes)
    elif kind == CONTINUOUS:
        y = y.astype(np.float64)
        if not np.all(np.isfinite(y)):
            raise ValueError("continuous targets must be finite")
        numer = smears.T @ y
        values = (numer + alpha * y.mean()) / (mass + alpha)
        values = values.reshape(geometry.extents)
    else:
        raise ValueError(f"unknown embedding kind {kind!r}")
    return LabelEmbedding(geometry, kind, values, mass.reshape(geometry.extents))


def cell_occupancy(posterior: PosteriorMap) -> np.ndarray:
    """Posterior smoothed from anchors onto cells; a distribution over cells.

    Every anchor spreads its weight uniformly over its window, so the result
    is the reverse windowed sum divided by the window volume.
    """
    geometry = posterior.geometry
    spread = reverse_window_sum(posterior.grid_shaped(), geometry)
    return spread.reshape(geometry.n_cells) / geometry.window_volume


def _read_out(embedding: LabelEmbedding, occupancy_flat: np.ndarray):
    """Occupancy-weighted average of the embedding; (label, scores) or (value, None)."""
    if embedding.kind == DISCRETE:
        flat = embedding.values.reshape(-1, embedding.n_classes)
        scores = occupancy_flat @ flat
        return int(np.argmax(scores)), scores
    value = float(occupancy_flat @ embedding.values.reshape(-1))
    return value, None


def predict(grid: CountingGrid, embedding: LabelEmbedding, bag: Bag):
    """Predict a bag's target from its grid mapping.

    Infers the bag's posterior over anchors, smooths it to a cell occupancy,
    and averages the embedding under it. Returns ``(label, class_scores)``
    for discrete embeddings (ties broken toward the lowest label) and
    ``(estimate, None)`` for continuous ones.
    """
    if embedding.geometry != grid.geometry:
        raise ValueError("embedding geometry does not match grid")
    posterior = e_step(grid, compute_histograms(grid), bag)
    return _read_out(embedding, cell_occupancy(posterior))


@dataclass(frozen=True)
class MetricReport:
    """Flat, serializable result of an evaluation run."""

    metric: str
    value: float
    n_folds: int
    defined: bool = True

    def to_text(self) -> str:
        lines = [
            f"metric {self.metric}",
            f"value {self.value:.10g}" if self.defined else "value undefined",
            f"folds {self.n_folds}",
            f"defined {'true' if self.defined else 'false'}",
        ]
        return "\n".join(lines) + "\n"


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    if denom == 0:
        return None
    return float((dx * dy).sum() / denom)


def loo_evaluate(
    grid: CountingGrid,
    posteriors: list[PosteriorMap],
    targets,
    kind: str = DISCRETE,
    alpha: float = 1e-6,
) -> MetricReport:
    """Leave-one-out readout accuracy (discrete) or Pearson correlation.

    For each bag, the embedding is rebuilt from every other bag and the held
    out bag is predicted from its existing posterior; the grid itself is
    never retrained. Zero-variance continuous targets make the correlation
    undefined, which the report flags instead of guessing.
    """
    n = len(posteriors)
    if n < 2:
        raise ValueError("leave-one-out needs at least 2 bags")
    y = np.asarray(targets)
    if len(y) != n:
        raise ValueError(f"{n} posteriors but {len(y)} targets")
    geometry = grid.geometry
    smears = _smear_posteriors(geometry, posteriors)  # (T, cells)
    occupancy = smears / geometry.window_volume
    mass_total = smears.sum(axis=0)

    if kind == DISCRETE:
        n_classes = _check_discrete_targets(y, None)
        y = y.astype(np.int64)
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        numer_total = smears.T @ onehot  # (cells, L)
        class_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        hits = 0
        for t in range(n):
            numer = numer_total.copy()
            numer[:, y[t]] -= smears[t]
            mass = np.maximum(mass_total - smears[t], 0.0)
            counts = class_counts.copy()
            counts[y[t]] -= 1
            prior = counts / (n - 1)
            gamma = (np.maximum(numer, 0.0) + alpha * prior) / (mass[:, None] + alpha)
            scores = occupancy[t] @ gamma
            if int(np.argmax(scores)) == y[t]:
                hits += 1
        return MetricReport("accuracy", hits / n, n)

    if kind != CONTINUOUS:
        raise ValueError(f"unknown embedding kind {kind!r}")
    y = y.astype(np.float64)
    numer_total = smears.T @ y
    preds = np.empty(n)
    for t in range(n):
        numer = numer_total - smears[t] * y[t]
        mass = np.maximum(mass_total - smears[t], 0.0)
        prior = (y.sum() - y[t]) / (n - 1)
        gamma = (numer + alpha * prior) / (mass + alpha)
        preds[t] = occupancy[t] @ gamma
    rho = _pearson(preds, y)
    if rho is None:
        return MetricReport("pearson_r", float("nan"), n, defined=False)
    return MetricReport("pearson_r", rho, n)
