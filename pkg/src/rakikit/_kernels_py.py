"""Pure-numpy implementations of the hot kernels.

This module mirrors the surface of the compiled extension ``_kernels`` and is
selected automatically when the extension is unavailable (or when
``RAKIKIT_BACKEND=python`` is set). All functions take and return
C-contiguous complex128 arrays; the ``*_out``/``*_inplace`` variants write
into caller-owned buffers.

Column ordering of flattened windows is C-order over (channel, pe_tap,
ro_tap), matching ``weights.reshape(out_channels, -1)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

BACKEND_NAME = "python"


def im2col(x: np.ndarray, ky: int, kx: int, dy: int) -> np.ndarray:
    """Valid sliding windows of a (C, Y, X) array with PE dilation ``dy``.

    Returns (n_windows, C*ky*kx) with windows ordered row-major over the
    (Y - (ky-1)*dy) x (X - kx + 1) anchor grid.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    c, y, x_ext = x.shape
    y1 = y - (ky - 1) * dy
    x1 = x_ext - kx + 1
    sc, sy, sx = x.strides
    view = as_strided(x, (y1, x1, c, ky, kx), (sy, sx, sc, sy * dy, sx))
    return np.ascontiguousarray(view).reshape(y1 * x1, c * ky * kx)


def gather_windows(x: np.ndarray, src_rows: np.ndarray, kx: int) -> np.ndarray:
    """Windows anchored at explicit source-row tuples (wrap handled by caller).

    ``src_rows`` has shape (n_anchors, ky) of absolute row indices. Returns
    (n_anchors*(X - kx + 1), C*ky*kx).
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    c, _, x_ext = x.shape
    n_anchors, ky = src_rows.shape
    g = np.ascontiguousarray(x[:, src_rows, :])  # (C, n_anchors, ky, X)
    x1 = x_ext - kx + 1
    sc, sa, sj, sx = g.strides
    view = as_strided(g, (n_anchors, x1, c, ky, kx), (sa, sx, sc, sj, sx))
    return np.ascontiguousarray(view).reshape(n_anchors * x1, c * ky * kx)


def _row_windows_view(x: np.ndarray, kx: int):
    n_rows, x_ext, c = x.shape
    x1 = x_ext - kx + 1
    sr, sx, sc = x.strides
    return as_strided(x, (n_rows, x1, c, kx), (sr, sx, sc, sx)), n_rows * x1, c * kx


def row_windows(x: np.ndarray, kx: int) -> np.ndarray:
    """Readout-only sliding windows of a (n_rows, X, C) feature grid.

    Returns (n_rows*(X - kx + 1), C*kx); used by the 1 x kx output layer.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    view, n, k = _row_windows_view(x, kx)
    return np.ascontiguousarray(view).reshape(n, k)


def row_windows_out(x: np.ndarray, kx: int, out: np.ndarray) -> np.ndarray:
    view, n, k = _row_windows_view(x, kx)
    out_view = out.reshape(view.shape)
    np.copyto(out_view, view)
    return out


def _row_windows_adjoint_fill(g, out, n_rows, x_ext, kx):
    c = g.shape[1] // kx
    x1 = x_ext - kx + 1
    g4 = g.reshape(n_rows, x1, c, kx)
    out3 = out.reshape(n_rows, x_ext, c)
    out3[:] = 0
    for t in range(kx):
        out3[:, t : t + x1, :] += g4[:, :, :, t]


def row_windows_adjoint(g: np.ndarray, n_rows: int, x_ext: int, kx: int) -> np.ndarray:
    """Adjoint of :func:`row_windows`: scatter-add taps back onto the grid."""
    g = np.ascontiguousarray(g, dtype=np.complex128)
    out = np.empty((n_rows * x_ext, g.shape[1] // kx), dtype=np.complex128)
    _row_windows_adjoint_fill(g, out, n_rows, x_ext, kx)
    return out


def row_windows_adjoint_out(
    g: np.ndarray, n_rows: int, x_ext: int, kx: int, out: np.ndarray
) -> np.ndarray:
    _row_windows_adjoint_fill(g, out, n_rows, x_ext, kx)
    return out


def cleaky_forward(z: np.ndarray, alpha: float) -> np.ndarray:
    """Leaky rectifier applied independently to real and imaginary parts."""
    re, im = z.real, z.imag
    return np.where(re >= 0, re, alpha * re) + 1j * np.where(im >= 0, im, alpha * im)


def cleaky_forward_out(z: np.ndarray, out: np.ndarray, alpha: float) -> np.ndarray:
    zf = z.reshape(-1).view(np.float64)
    of = out.reshape(-1).view(np.float64)
    np.multiply(zf, alpha, out=of)
    np.copyto(of, zf, where=zf >= 0.0)
    return out


def cleaky_backward(z: np.ndarray, grad: np.ndarray, alpha: float) -> np.ndarray:
    """Adjoint of :func:`cleaky_forward` at pre-activation ``z``."""
    dre = np.where(z.real >= 0, grad.real, alpha * grad.real)
    dim = np.where(z.imag >= 0, grad.imag, alpha * grad.imag)
    return dre + 1j * dim


def cleaky_backward_inplace(z: np.ndarray, grad: np.ndarray, alpha: float) -> np.ndarray:
    """Scale ``grad`` by the rectifier derivative at ``z``, in place."""
    zf = z.reshape(-1).view(np.float64)
    gf = grad.reshape(-1).view(np.float64)
    gf[zf < 0.0] *= alpha
    return grad
