"""Shared anchor/target index arithmetic for k-space interpolation.

Both the linear kernel and the network predict, for an anchor row ``a`` on
the acquired grid, the missing rows ``a + gap*rate + r`` (r = 1..rate-1) of
every coil at the window's readout center. Out-of-range phase-encode rows
wrap circularly (the discrete spectrum of an N-point image is N-periodic),
readout is zero-extended at application time.
"""

from __future__ import annotations

import numpy as np

from .core import SamplingPattern


def gather_targets(
    block: np.ndarray,
    n_anchors: int,
    n_ro: int,
    rate: int,
    gap: int,
    ro_center: int,
) -> np.ndarray:
    """Target matrix for calibration windows over a fully sampled block.

    Row i = anchor-major, readout-minor window index; column (r-1)*n_c + c is
    the sample of coil c at row ``anchor + gap*rate + r``, readout
    ``window_start + ro_center``. Shape (n_anchors*n_ro, (rate-1)*n_c).
    """
    n_c = block.shape[0]
    anchors = np.arange(n_anchors)
    offsets = gap * rate + np.arange(1, rate)
    rows = anchors[:, None] + offsets[None, :]  # (n_anchors, rate-1)
    cols = np.arange(n_ro) + ro_center
    g = block[:, rows, :][:, :, :, cols]  # (n_c, n_anchors, rate-1, n_ro)
    t = g.transpose(1, 3, 2, 0)  # (n_anchors, n_ro, rate-1, n_c)
    return np.ascontiguousarray(t).reshape(n_anchors * n_ro, (rate - 1) * n_c)


def missing_anchor_map(pattern: SamplingPattern, n_y: int, gap: int):
    """For every missing row, the anchor that predicts it and its gap index.

    Returns (missing_rows, anchors, anchor_of_missing, gap_index) where
    ``anchors`` is the unique anchor list, ``anchor_of_missing[i]`` indexes
    into it and ``gap_index[i]`` in 1..rate-1 selects the output block.
    """
    rate = pattern.rate
    missing = pattern.missing_rows(n_y)
    gap_index = (missing - pattern.offset) % rate  # in 1..rate-1
    anchor_rows = (missing - gap * rate - gap_index) % n_y
    anchors, anchor_of_missing = np.unique(anchor_rows, return_inverse=True)
    return missing, anchors, anchor_of_missing, gap_index


def source_rows(anchors: np.ndarray, n_src_lines: int, rate: int, n_y: int):
    """Wrapped absolute source rows, shape (n_anchors, n_src_lines)."""
    return (anchors[:, None] + rate * np.arange(n_src_lines)[None, :]) % n_y


def scatter_predictions(
    out: np.ndarray,
    pred: np.ndarray,
    missing: np.ndarray,
    anchor_of_missing: np.ndarray,
    gap_index: np.ndarray,
) -> None:
    """Write per-anchor predictions into the missing rows of ``out`` in place.

    ``pred`` has shape (n_anchors, n_x, (rate-1)*n_c) with channel
    (r-1)*n_c + c holding coil c of gap position r.
    """
    n_c = out.shape[0]
    per_row = pred[anchor_of_missing]  # (n_missing, n_x, (rate-1)*n_c)
    ch = (gap_index[:, None] - 1) * n_c + np.arange(n_c)[None, :]
    sel = np.take_along_axis(per_row, ch[:, None, :], axis=2)  # (n_missing, n_x, n_c)
    out[:, missing, :] = sel.transpose(2, 0, 1)
