"""Variational EM for counting grids.

The E-step infers, per bag, a posterior over all window anchor positions;
the M-step re-estimates the grid distributions multiplicatively through the
reverse windowed sum. Iterating the two maximizes a lower bound on the
corpus log-likelihood, recorded per iteration in the bound trace.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._parallel import MIN_ROWS_PER_WORKER, worker_count
from .corpus import Bag, bags_to_matrix
from .errors import NumericFailure
from .geometry import PROB_FLOOR, GridGeometry
from .kernels import reverse_window_sum
from .model import CountingGrid, GridField, compute_histograms, floor_distributions

__all__ = [
    "TrainConfig",
    "PosteriorMap",
    "FitResult",
    "init_grid",
    "e_step",
    "m_step",
    "variational_bound",
    "fit",
    "infer_posteriors",
    "bag_log_evidence",
    "mean_log_likelihood",
]


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the EM loop.

    ``rel_tol`` stops the loop once the relative bound improvement falls
    below it; ``pseudocount`` is added after the multiplicative update to
    keep unvisited entries alive.
    """

    max_iters: int = 200
    rel_tol: float = 1e-6
    seed: int = 0
    init_noise: float = 0.1
    pseudocount: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if not 0 < self.init_noise <= 1:
            raise ValueError("init_noise must lie in (0, 1]")
        if self.pseudocount < 0:
            raise ValueError("pseudocount must be non-negative")


@dataclass(frozen=True)
class PosteriorMap:
    """Posterior over all window anchor positions for one bag, row-major."""

    geometry: GridGeometry
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.geometry.n_cells,):
            raise ValueError(
                f"posterior length {probs.shape} does not match {self.geometry.n_cells} anchors"
            )
        if probs.min() < 0:
            raise ValueError("posterior entries must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("posterior must sum to one")
        object.__setattr__(self, "probs", probs)

    def grid_shaped(self) -> np.ndarray:
        return self.probs.reshape(self.geometry.extents)


@dataclass
class FitResult:
    grid: CountingGrid
    posteriors: list[PosteriorMap]
    bound_trace: list[float]
    n_iter: int = 0
    converged: bool = False


def init_grid(
    geometry: GridGeometry, vocab_size: int, seed: int = 0, init_noise: float = 0.1
) -> CountingGrid:
    """Near-uniform grid with seeded symmetry-breaking noise.

    Each entry is proportional to 1 + init_noise * u with u drawn uniform in
    [0, 1); rows are normalized and floored. Same seed, same grid, bit for bit.
    """
    if vocab_size < 1:
        raise ValueError("vocabulary size must be positive")
    rng = np.random.default_rng(seed)
    raw = 1.0 + init_noise * rng.random((*geometry.extents, vocab_size))
    probs = raw / raw.sum(axis=-1, keepdims=True)
    return CountingGrid.from_array(geometry, floor_distributions(probs))


def _scores(counts: sp.csr_matrix, log_hist: np.ndarray) -> np.ndarray:
    """Per-bag, per-anchor log-likelihood scores: counts @ log_hist.T."""
    log_hist_t = np.ascontiguousarray(log_hist.T)
    n_rows = counts.shape[0]
    workers = worker_count()
    if workers <= 1 or n_rows < 2 * MIN_ROWS_PER_WORKER:
        return counts @ log_hist_t
    chunk = max(MIN_ROWS_PER_WORKER, -(-n_rows // workers))
    out = np.empty((n_rows, log_hist_t.shape[1]), dtype=np.float64)
    spans = [(a, min(a + chunk, n_rows)) for a in range(0, n_rows, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for (a, b), block in zip(
            spans, pool.map(lambda s: counts[s[0] : s[1]] @ log_hist_t, spans)
        ):
            out[a:b] = block
    return out


def _posteriors_from_scores(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    q = np.exp(shifted)
    q /= q.sum(axis=-1, keepdims=True)
    return q


def _bound_from(scores: np.ndarray, q: np.ndarray) -> float:
    entropy = -np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0).sum()
    return float(entropy + (q * scores).sum())


def e_step(grid: CountingGrid, histograms: GridField, bag: Bag) -> PosteriorMap:
    """Exact posterior over anchor positions for one bag.

    Scores every anchor by the bag's log-likelihood under its histogram and
    normalizes with max-shifted exponentials. A bag with no counts yields a
    uniform posterior and a degeneracy warning.
    """
    if bag.is_empty():
        warnings.warn(f"bag {bag.id!r} has no counts; posterior is uniform")
        n = grid.geometry.n_cells
        return PosteriorMap(grid.geometry, np.full(n, 1.0 / n))
    counts = bags_to_matrix([bag], grid.vocab_size)
    scores = _scores(counts, np.log(histograms.flat()))
    return PosteriorMap(grid.geometry, _posteriors_from_scores(scores)[0])


def _m_step_matrix(
    grid: CountingGrid,
    hist_flat: np.ndarray,
    counts: sp.csr_matrix,
    q: np.ndarray,
    pseudocount: float,
) -> tuple[CountingGrid, bool]:
    """Multiplicative update from posterior-weighted counts.

    Returns the new grid and whether the probability floor engaged.
    """
    geometry = grid.geometry
    vocab = grid.vocab_size
    # phi[k, z] = sum_t c_z^t q_t[k] / h[k, z], accumulated over all bags.
    phi = np.ascontiguousarray((counts.T @ q).T) / hist_flat
    spread = reverse_window_sum(phi.reshape(*geometry.extents, vocab), geometry)
    np.maximum(spread, 0.0, out=spread)  # rounding can leave -ulp where mass is zero
    raw = grid.probs.values * spread + pseudocount
    rowsum = raw.sum(axis=-1, keepdims=True)
    dead = rowsum <= 0
    normed = np.where(dead, 1.0 / vocab, raw / np.where(dead, 1.0, rowsum))
    floor_hit = bool(dead.any() or (normed < PROB_FLOOR).any())
    return CountingGrid.from_array(geometry, floor_distributions(normed)), floor_hit


def m_step(
    grid: CountingGrid,
    bags: list[Bag],
    posteriors: list[PosteriorMap],
    pseudocount: float = 1e-8,
    histograms: GridField | None = None,
) -> CountingGrid:
    """Re-estimate the grid distributions from bag posteriors.

    Each cell's distribution is scaled by the posterior-weighted count mass
    reaching it through every covering window, smoothed by ``pseudocount``,
    normalized, and floored.
    """
    if len(bags) != len(posteriors):
        raise ValueError(
            f"{len(bags)} bags but {len(posteriors)} posteriors"
        )
    if histograms is None:
        histograms = compute_histograms(grid)
    counts = bags_to_matrix(bags, grid.vocab_size)
    q = np.stack([p.probs for p in posteriors])
    new_grid, _ = _m_step_matrix(grid, histograms.flat(), counts, q, pseudocount)
    return new_grid


def variational_bound(
    grid: CountingGrid,
    histograms: GridField,
    bags: list[Bag],
    posteriors: list[PosteriorMap],
) -> float:
    """Training objective: posterior entropy plus expected bag log-likelihood."""
    if len(bags) != len(posteriors):
        raise ValueError(f"{len(bags)} bags but {len(posteriors)} posteriors")
    counts = bags_to_matrix(bags, grid.vocab_size)
    scores = _scores(counts, np.log(histograms.flat()))
    q = np.stack([p.probs for p in posteriors])
    return _bound_from(scores, q)


def fit(
    bags: list[Bag],
    geometry: GridGeometry,
    vocab_size: int,
    config: TrainConfig | None = None,
    initial_grid: CountingGrid | None = None,
) -> FitResult:
    """Run EM to convergence and return the grid, posteriors, and bound trace.

    Each iteration recomputes histograms, infers all posteriors, records the
    bound, and applies the multiplicative update; the loop stops when the
    relative bound improvement drops below ``rel_tol`` or ``max_iters`` is
    reached. Posteriors are recomputed for the final grid before returning.
    """
    config = config or TrainConfig()
    if not bags:
        raise ValueError("cannot fit an empty bag list")
    for t, bag in enumerate(bags):
        if bag.is_empty():
            raise ValueError(f"training bag {t} has no positive counts")
    counts = bags_to_matrix(bags, vocab_size)

    if initial_grid is None:
        grid = init_grid(geometry, vocab_size, config.seed, config.init_noise)
    else:
        if initial_grid.geometry != geometry:
            raise ValueError("initial grid geometry does not match")
        if initial_grid.vocab_size != vocab_size:
            raise ValueError("initial grid vocabulary size does not match")
        grid = initial_grid

    trace: list[float] = []
    converged = False
    floor_engaged = False
    n_iter = 0
    q = np.empty(0)
    for it in range(config.max_iters + 1):
        histograms = compute_histograms(grid)
        hist_flat = histograms.flat()
        scores = _scores(counts, np.log(hist_flat))
        q = _posteriors_from_scores(scores)
        bound = _bound_from(scores, q)
        trace.append(bound)
        n_iter = it
        if it == config.max_iters:
            break
        if it > 0:
            prev = trace[-2]
            if bound < prev:
                slack_rate = (
                    1e-6 if (config.pseudocount > 0 or floor_engaged) else 1e-9
                )
                if prev - bound > slack_rate * max(abs(prev), 1.0):
                    raise NumericFailure(
                        f"bound decreased from {prev:.10g} to {bound:.10g} at iteration {it}"
                    )
            if abs(bound - prev) <= config.rel_tol * abs(prev):
                converged = True
                break
        grid, hit = _m_step_matrix(grid, hist_flat, counts, q, config.pseudocount)
        floor_engaged = floor_engaged or hit

    posteriors = [PosteriorMap(geometry, row) for row in q]
    return FitResult(
        grid=grid,
        posteriors=posteriors,
        bound_trace=trace,
        n_iter=n_iter,
        converged=converged,
    )


def infer_posteriors(grid: CountingGrid, bags: list[Bag]) -> list[PosteriorMap]:
    """Posterior over anchors for every bag under a fixed grid."""
    counts = bags_to_matrix(bags, grid.vocab_size)
    hist = compute_histograms(grid)
    q = _posteriors_from_scores(_scores(counts, np.log(hist.flat())))
    empties = [t for t, bag in enumerate(bags) if bag.is_empty()]
    if empties:
        warnings.warn(f"bags {empties} have no counts; posteriors are uniform")
    return [PosteriorMap(grid.geometry, row) for row in q]


def bag_log_evidence(grid: CountingGrid, bags: list[Bag]) -> np.ndarray:
    """Per-bag log-probability with the anchor marginalized out uniformly."""
    counts = bags_to_matrix(bags, grid.vocab_size)
    hist = compute_histograms(grid)
    scores = _scores(counts, np.log(hist.flat()))
    peak = scores.max(axis=-1, keepdims=True)
    lse = peak[:, 0] + np.log(np.exp(scores - peak).sum(axis=-1))
    return lse - np.log(grid.geometry.n_cells)


def mean_log_likelihood(grid: CountingGrid, bags: list[Bag]) -> float:
    """Mean per-word log-likelihood of a bag list under the grid."""
    total_words = sum(bag.total for bag in bags)
    if total_words <= 0:
        raise ValueError("bags contain no words")
    return float(bag_log_evidence(grid, bags).sum() / total_words)
