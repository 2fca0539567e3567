"""Toroidal windowed-sum kernels.

The forward kernel maps a field f to out[k] = sum of f over the window
anchored at k; the reverse kernel maps f to out[i] = sum of f over all
anchors whose window covers i. Both run in time linear in the number of
grid cells: the torus is handled by replicating the first W_d - 1 slices
along each dimension, after which a D-dimensional cumulative sum plus a
2^D-corner inclusion-exclusion yields every window sum at once.
"""

from __future__ import annotations

import itertools

import numpy as np

from .geometry import GridGeometry

__all__ = ["window_sum", "forward_window_sum", "reverse_window_sum"]


def _window_sum_grid(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """Forward window sum over the leading grid axes of ``values``.

    ``values`` has shape ``(*extents, ...)``; trailing axes are independent
    channels. Returns an array of the same shape.
    """
    extents = geometry.extents
    window = geometry.window
    ndim = geometry.ndim

    if values.shape[:ndim] != extents:
        raise ValueError(
            f"field shape {values.shape[:ndim]} does not match extents {extents}"
        )

    # Unit window: the sum is the field itself.
    if all(w == 1 for w in window):
        return values.copy()
    # Full-grid window: every anchor sees the whole grid.
    if window == extents:
        total = values.sum(axis=tuple(range(ndim)), keepdims=True)
        return np.broadcast_to(total, values.shape).copy()

    # One buffer holds the wrap-padded field behind a zero slice per axis,
    # so cum[j] ends up as the sum of all padded entries strictly below j.
    trailing = values.shape[ndim:]
    cum = np.zeros(
        tuple(e + w for e, w in zip(extents, window)) + trailing, dtype=np.float64
    )
    interior = tuple(slice(1, 1 + e + w - 1) for e, w in zip(extents, window))
    body = tuple(slice(1, 1 + e) for e in extents)
    cum[body] = values
    # Wrap-around: replicate the first W_d - 1 slices past the far edge.
    for d, (e, w) in enumerate(zip(extents, window)):
        if w > 1:
            head = interior[:d] + (slice(1 + e, 1 + e + w - 1),) + interior[d + 1 :]
            src = interior[:d] + (slice(1, w),) + interior[d + 1 :]
            cum[head] = cum[src]
    for d in range(ndim):
        np.cumsum(cum, axis=d, out=cum)

    # Inclusion-exclusion over the 2^D window corners: corners on the far
    # face of dim d sit at offset W_d, near-face corners at 0, and the sign
    # flips with each near face.
    all_trailing = (slice(None),) * len(trailing)
    out = cum[tuple(slice(w, w + e) for w, e in zip(window, extents)) + all_trailing].copy()
    for corner in itertools.product((0, 1), repeat=ndim):
        if all(corner):
            continue
        sl = tuple(
            slice(c * w, c * w + e) for c, w, e in zip(corner, window, extents)
        )
        if (ndim - sum(corner)) % 2:
            np.subtract(out, cum[sl + all_trailing], out=out)
        else:
            np.add(out, cum[sl + all_trailing], out=out)
    return out


def forward_window_sum(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """out[k] = sum of ``values`` over the window {k, ..., k + W - 1} (mod E)."""
    return _window_sum_grid(values, geometry)


def reverse_window_sum(values: np.ndarray, geometry: GridGeometry) -> np.ndarray:
    """out[i] = sum of ``values`` over all anchors k whose window covers i.

    This is the adjoint of the forward sum; it equals the forward sum
    anchored at i - W + 1 (mod E), i.e. the forward result rolled by W - 1.
    """
    forward = _window_sum_grid(values, geometry)
    shifts = [w - 1 for w in geometry.window]
    if any(shifts):
        forward = np.roll(forward, shifts, axis=tuple(range(geometry.ndim)))
    return forward


def window_sum(field, direction: str = "forward"):
    """Windowed sum of a :class:`~gridcount.model.GridField`.

    ``direction="forward"`` sums each anchor's window; ``direction="reverse"``
    sums, for each cell, over the anchors whose window covers it.
    """
    from .model import GridField

    if direction == "forward":
        out = forward_window_sum(field.values, field.geometry)
    elif direction == "reverse":
        out = reverse_window_sum(field.values, field.geometry)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return GridField(field.geometry, out)
