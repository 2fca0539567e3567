"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines. The
frozen thresholds beyond the stated tolerances come from reference runs of
the exact seeded instances below.
"""

import time

import numpy as np
import pytest

from gridcount import (
    CountingGrid,
    GridGeometry,
    ModelFile,
    SynthSpec,
    TrainConfig,
    bags_to_matrix,
    block_labeler,
    compute_histograms,
    e_step,
    fit,
    forward_window_sum,
    generate,
    init_grid,
    loo_evaluate,
    m_step,
    mean_log_likelihood,
    read_corpus,
    read_model,
    reverse_window_sum,
    variational_bound,
    write_corpus,
    write_model,
)
from gridcount.geometry import PROB_FLOOR

from conftest import brute_forward_window_sum, brute_reverse_window_sum, random_bags


def _report(number: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\n[criterion {number}] {name}: {status} ({detail})")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


# ---------------------------------------------------------------------------
# criterion 1: window-sum oracle + linear scaling


def _kernel_best_time(extents, window, n_channels, reps):
    geo = GridGeometry(extents, window)
    field = np.random.default_rng(0).random((*extents, n_channels))
    forward_window_sum(field, geo)  # warm-up
    best = float("inf")
    for _ in range(reps):
        start = time.perf_counter()
        forward_window_sum(field, geo)
        best = min(best, time.perf_counter() - start)
    return best


def test_criterion_1_window_sum_oracle_and_scaling():
    rng = np.random.default_rng(20260810)
    worst = 0.0
    for _ in range(200):
        ndim = int(rng.integers(1, 4))
        extents = tuple(int(rng.integers(1, 9)) for _ in range(ndim))
        window = tuple(int(rng.integers(1, e + 1)) for e in extents)
        geo = GridGeometry(extents, window)
        field = rng.random((*extents, int(rng.integers(1, 4))))
        for fast, ref in (
            (forward_window_sum(field, geo), brute_forward_window_sum(field, geo)),
            (reverse_window_sum(field, geo), brute_reverse_window_sum(field, geo)),
        ):
            err = (np.abs(fast - ref) / np.maximum(np.abs(ref), 1.0)).max()
            worst = max(worst, err)
    oracle_ok = worst <= 1e-12

    # doubling the cell count may cost at most 2.2x; interleave the two sizes
    # and keep the best of three attempts to shed scheduler noise
    ratios = []
    for _ in range(3):
        t_small = t_big = float("inf")
        geo_small = GridGeometry((512, 256), (5, 5))
        geo_big = GridGeometry((512, 512), (5, 5))
        rng2 = np.random.default_rng(1)
        f_small = rng2.random((512, 256, 2))
        f_big = rng2.random((512, 512, 2))
        forward_window_sum(f_small, geo_small)
        forward_window_sum(f_big, geo_big)
        for _ in range(12):
            start = time.perf_counter()
            forward_window_sum(f_small, geo_small)
            t_small = min(t_small, time.perf_counter() - start)
            start = time.perf_counter()
            forward_window_sum(f_big, geo_big)
            t_big = min(t_big, time.perf_counter() - start)
        ratios.append(t_big / t_small)
    ratio = min(ratios)
    scaling_ok = ratio <= 2.2

    _report(
        1,
        "window-sum oracle and linear scaling",
        oracle_ok and scaling_ok,
        f"max relative error {worst:.2e} over 200 instances; 2x-cells time ratio {ratio:.2f}",
    )


# ---------------------------------------------------------------------------
# criterion 2: EM bound monotone, invariants after every step


def test_criterion_2_em_correctness():
    rng = np.random.default_rng(2026)
    worst_slack = np.inf
    worst_row_err = 0.0
    worst_q_err = 0.0
    min_prob = 1.0
    for instance in range(20):
        ndim = int(rng.integers(1, 4))
        while True:
            extents = tuple(int(rng.integers(2, 9)) for _ in range(ndim))
            if np.prod(extents) <= 64:
                break
        window = tuple(int(rng.integers(1, e + 1)) for e in extents)
        vocab = int(rng.integers(3, 21))
        n_bags = int(rng.integers(5, 51))
        geo = GridGeometry(extents, window)
        bags = random_bags(rng, n_bags, vocab, dense=True)

        config = TrainConfig(max_iters=15, rel_tol=1e-12, seed=instance, pseudocount=0.0)
        result = fit(bags, geo, vocab, config)
        trace = np.array(result.bound_trace)
        worst_slack = min(worst_slack, (np.diff(trace) + 1e-9 * np.abs(trace[:-1])).min())

        grid = init_grid(geo, vocab, seed=instance, init_noise=config.init_noise)
        manual_trace = []
        for _ in range(len(trace)):
            hist = compute_histograms(grid)
            posteriors = [e_step(grid, hist, bag) for bag in bags]
            for post in posteriors:
                worst_q_err = max(worst_q_err, abs(post.probs.sum() - 1.0))
            manual_trace.append(variational_bound(grid, hist, bags, posteriors))
            grid = m_step(grid, bags, posteriors, pseudocount=0.0, histograms=hist)
            worst_row_err = max(
                worst_row_err, np.abs(grid.probs.values.sum(-1) - 1.0).max()
            )
            min_prob = min(min_prob, float(grid.probs.values.min()))
        assert np.allclose(manual_trace, trace, rtol=1e-12)

    floors_inactive = min_prob > PROB_FLOOR * 1.0001
    ok = (
        worst_slack >= 0.0
        and worst_row_err <= 1e-9
        and worst_q_err <= 1e-9
        and floors_inactive
    )
    _report(
        2,
        "EM bound monotone with normalization invariants",
        ok,
        f"20 corpora x 15 iters; slack margin {worst_slack:.2e}, row-sum err {worst_row_err:.2e}, "
        f"q-sum err {worst_q_err:.2e}, min prob {min_prob:.2e} (floor {PROB_FLOOR:g})",
    )


# ---------------------------------------------------------------------------
# criterion 3: unit-window fit equals multinomial-mixture EM


def _reference_mixture_em(counts, probs0, n_iters, pseudocount):
    """Textbook multinomial-mixture EM with uniform component prior."""
    probs = probs0.copy()
    trajectory = []
    for _ in range(n_iters + 1):
        scores = counts @ np.log(probs).T
        q = np.exp(scores - scores.max(axis=1, keepdims=True))
        q /= q.sum(axis=1, keepdims=True)
        trajectory.append((probs.copy(), q.copy()))
        raw = q.T @ counts + pseudocount
        probs = raw / raw.sum(axis=1, keepdims=True)
    return trajectory


def test_criterion_3_mixture_equivalence():
    rng = np.random.default_rng(33)
    worst = 0.0
    cases = [((4,), (1,)), ((2, 2), (1, 1)), ((3,), (1,))]
    for extents, window in cases:
        geo = GridGeometry(extents, window)
        vocab = int(rng.integers(2, 6))
        bags = random_bags(rng, int(rng.integers(3, 11)), vocab, dense=True)
        counts = bags_to_matrix(bags, vocab).toarray()
        start = init_grid(geo, vocab, seed=7, init_noise=0.5)
        reference = _reference_mixture_em(counts, start.probs.flat(), 10, 1e-6)
        for n_iters in range(11):
            config = TrainConfig(
                max_iters=n_iters, rel_tol=1e-300, seed=7, pseudocount=1e-6
            )
            result = fit(bags, geo, vocab, config, initial_grid=start)
            ref_probs, ref_q = reference[n_iters]
            worst = max(worst, np.abs(result.grid.probs.flat() - ref_probs).max())
            q = np.stack([p.probs for p in result.posteriors])
            worst = max(worst, np.abs(q - ref_q).max())
    _report(
        3,
        "unit-window fit equals mixture EM",
        worst <= 1e-9,
        f"max entrywise deviation {worst:.2e} over 10 iterations x {len(cases)} instances",
    )


# ---------------------------------------------------------------------------
# criterion 4: full-window fit converges to the pooled distribution


def test_criterion_4_degenerate_fixed_point():
    rng = np.random.default_rng(44)
    worst = 0.0
    for extents in [(3, 2), (4,), (2, 2, 2)]:
        geo = GridGeometry(extents, extents)
        vocab = int(rng.integers(4, 12))
        bags = random_bags(rng, int(rng.integers(8, 25)), vocab)
        config = TrainConfig(max_iters=500, rel_tol=1e-13, seed=0, pseudocount=0.0)
        result = fit(bags, geo, vocab, config)
        hist = compute_histograms(result.grid).flat()
        pooled = np.zeros(vocab)
        for bag in bags:
            for word, count in bag.entries.items():
                pooled[word] += count
        pooled /= pooled.sum()
        worst = max(worst, np.abs(hist - pooled).max())
    _report(
        4,
        "full-window fixed point is the pooled distribution",
        worst <= 1e-6,
        f"max per-entry deviation {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion 5: torus shift equivariance of the whole fit


def test_criterion_5_shift_equivariance():
    rng = np.random.default_rng(55)
    worst = 0.0
    for instance in range(5):
        ndim = int(rng.integers(1, 4))
        extents = tuple(int(rng.integers(2, 6)) for _ in range(ndim))
        window = tuple(int(rng.integers(1, e + 1)) for e in extents)
        geo = GridGeometry(extents, window)
        vocab = int(rng.integers(3, 8))
        bags = random_bags(rng, int(rng.integers(5, 15)), vocab)
        offset = tuple(int(rng.integers(e)) for e in extents)
        axes = tuple(range(ndim))

        start = init_grid(geo, vocab, seed=instance, init_noise=0.4)
        shifted = CountingGrid.from_array(
            geo, np.roll(start.probs.values, offset, axis=axes)
        )
        config = TrainConfig(max_iters=30, rel_tol=1e-300, seed=instance)
        base = fit(bags, geo, vocab, config, initial_grid=start)
        moved = fit(bags, geo, vocab, config, initial_grid=shifted)

        expected = np.roll(base.grid.probs.values, offset, axis=axes)
        worst = max(worst, np.abs(moved.grid.probs.values - expected).max())
        for pa, pb in zip(base.posteriors, moved.posteriors):
            rolled = np.roll(pa.grid_shaped(), offset, axis=axes)
            worst = max(worst, np.abs(pb.grid_shaped() - rolled).max())
    _report(
        5,
        "torus shift equivariance",
        worst <= 1e-9,
        f"max deviation {worst:.2e} over 5 instances",
    )


# ---------------------------------------------------------------------------
# criteria 6 and 7: planted recovery and the capacity surrogate


@pytest.fixture(scope="module")
def planted_run():
    geo = GridGeometry((16, 16), (4, 4))
    spec = SynthSpec(
        geometry=geo,
        vocab_size=50,
        n_docs=400,
        n_words=100,
        seed=42,
        labeler=block_labeler(geo),
    )
    bags, anchors, planted = generate(spec)
    train, held_out = bags[:300], bags[300:]
    config = TrainConfig(max_iters=100, rel_tol=1e-7, seed=0)

    matched_train = fit(train, geo, 50, config)
    flat_geo = GridGeometry((4, 4), (4, 4))
    flat_config = TrainConfig(max_iters=200, rel_tol=1e-10, seed=0)
    flat_train = fit(train, flat_geo, 50, flat_config)

    matched_full = fit(bags, geo, 50, config)
    flat_full = fit(bags, flat_geo, 50, flat_config)
    labels = [bag.target for bag in bags]
    return {
        "held_out": held_out,
        "matched_train": matched_train,
        "flat_train": flat_train,
        "matched_full": matched_full,
        "flat_full": flat_full,
        "labels": labels,
    }


def test_criterion_6_planted_recovery(planted_run):
    margin = mean_log_likelihood(
        planted_run["matched_train"].grid, planted_run["held_out"]
    ) - mean_log_likelihood(planted_run["flat_train"].grid, planted_run["held_out"])
    report = loo_evaluate(
        planted_run["matched_full"].grid,
        planted_run["matched_full"].posteriors,
        planted_run["labels"],
        kind="discrete",
    )
    # stated gates: margin >= 0.05 nats/word, accuracy > 5/16; the tighter
    # bounds are frozen from the reference run (margin 0.412, accuracy 0.6925)
    ok = margin >= 0.05 and margin >= 0.30 and report.value > 5 / 16 and report.value >= 0.55
    _report(
        6,
        "planted recovery beats the degenerate baseline",
        ok,
        f"held-out margin {margin:.3f} nats/word (gate 0.05, frozen 0.30); "
        f"LOO accuracy {report.value:.4f} (gate {5 / 16:.4f}, frozen 0.55)",
    )


def test_criterion_7_capacity_surrogate(planted_run):
    matched = loo_evaluate(
        planted_run["matched_full"].grid,
        planted_run["matched_full"].posteriors,
        planted_run["labels"],
        kind="discrete",
    )
    flat = loo_evaluate(
        planted_run["flat_full"].grid,
        planted_run["flat_full"].posteriors,
        planted_run["labels"],
        kind="discrete",
    )
    _report(
        7,
        "matched capacity beats capacity one",
        matched.value > flat.value,
        f"LOO accuracy {matched.value:.4f} (capacity 16) vs {flat.value:.4f} (capacity 1)",
    )


# ---------------------------------------------------------------------------
# criterion 8: determinism and lossless round-trips


def test_criterion_8_determinism_and_io(tmp_path):
    rng = np.random.default_rng(88)
    geo = GridGeometry((5, 4), (2, 2))
    bags = random_bags(rng, 12, 9)
    config = TrainConfig(max_iters=15, seed=3)

    first = fit(bags, geo, 9, config)
    second = fit(bags, geo, 9, config)
    fits_identical = np.array_equal(
        first.grid.probs.values, second.grid.probs.values
    ) and first.bound_trace == second.bound_trace

    path_a, path_b = tmp_path / "a.model", tmp_path / "b.model"
    write_model(path_a, ModelFile(grid=first.grid))
    write_model(path_b, ModelFile(grid=second.grid))
    bytes_identical = path_a.read_bytes() == path_b.read_bytes()

    model_back = read_model(path_a)
    model_lossless = np.array_equal(
        model_back.grid.probs.values, first.grid.probs.values
    )

    from gridcount import Corpus

    corpus = Corpus(bags=bags, vocab_size=9)
    corpus_a, corpus_b = tmp_path / "c1.txt", tmp_path / "c2.txt"
    write_corpus(corpus, corpus_a)
    write_corpus(read_corpus(corpus_a), corpus_b)
    corpus_lossless = corpus_a.read_bytes() == corpus_b.read_bytes()

    ok = fits_identical and bytes_identical and model_lossless and corpus_lossless
    _report(
        8,
        "determinism and lossless serialization",
        ok,
        f"fit bit-identical {fits_identical}, model bytes identical {bytes_identical}, "
        f"model round-trip {model_lossless}, corpus round-trip {corpus_lossless}",
    )
