"""Worker-count control for the parallel bag reductions."""

from __future__ import annotations

import os

# Rows below this threshold are scored in one shot; threading only pays off
# for large corpora.
MIN_ROWS_PER_WORKER = 2048


def worker_count() -> int:
    """Worker cap from GRIDCOUNT_THREADS; 0 or unset means automatic."""
    raw = os.environ.get("GRIDCOUNT_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"GRIDCOUNT_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ValueError("GRIDCOUNT_THREADS must be non-negative")
    auto = min(os.cpu_count() or 1, 8)
    return auto if cap == 0 else min(cap, auto)
