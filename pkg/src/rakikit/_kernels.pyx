# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: window gather/scatter and the complex leaky rectifier.

Mirrors the surface of ``_kernels_py``; selected at import by
``rakikit.backend`` when available. The ``*_out``/``*_inplace`` variants
write into caller-owned buffers, which keeps the training loop free of large
allocations.

Loops are deliberately serial: the BLAS running the surrounding matrix
products already keeps the cores busy, and a second thread pool contending
with its spin-waiting workers costs far more than it buys on small machines.
"""

import numpy as np

cimport numpy as cnp

BACKEND_NAME = "ext"


def im2col(x_in, int ky, int kx, int dy):
    cdef cnp.complex128_t[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef int c = x.shape[0], y = x.shape[1], xe = x.shape[2]
    cdef int y1 = y - (ky - 1) * dy
    cdef int x1 = xe - kx + 1
    cdef int k = c * ky * kx
    out_arr = np.empty((y1 * x1, k), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef int a, u, ci, j, t, row, col
    with nogil:
        for a in range(y1):
            for u in range(x1):
                row = a * x1 + u
                col = 0
                for ci in range(c):
                    for j in range(ky):
                        for t in range(kx):
                            out[row, col] = x[ci, a + j * dy, u + t]
                            col = col + 1
    return out_arr


def gather_windows(x_in, src_rows, int kx):
    cdef cnp.complex128_t[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef cnp.int64_t[:, ::1] rows = np.ascontiguousarray(src_rows, dtype=np.int64)
    cdef int c = x.shape[0], xe = x.shape[2]
    cdef int n_anchors = rows.shape[0], ky = rows.shape[1]
    cdef int x1 = xe - kx + 1
    cdef int k = c * ky * kx
    out_arr = np.empty((n_anchors * x1, k), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef int a, u, ci, j, t, row, col
    with nogil:
        for a in range(n_anchors):
            for u in range(x1):
                row = a * x1 + u
                col = 0
                for ci in range(c):
                    for j in range(ky):
                        for t in range(kx):
                            out[row, col] = x[ci, rows[a, j], u + t]
                            col = col + 1
    return out_arr


cdef void _row_windows_fill(cnp.complex128_t[:, :, ::1] x,
                            cnp.complex128_t[:, ::1] out, int kx) noexcept nogil:
    cdef int n_rows = x.shape[0], xe = x.shape[1], c = x.shape[2]
    cdef int x1 = xe - kx + 1
    cdef int r, u, ci, t, row, col
    for r in range(n_rows):
        for u in range(x1):
            row = r * x1 + u
            col = 0
            for ci in range(c):
                for t in range(kx):
                    out[row, col] = x[r, u + t, ci]
                    col = col + 1


def row_windows(x_in, int kx):
    cdef cnp.complex128_t[:, :, ::1] x = np.ascontiguousarray(x_in, dtype=np.complex128)
    cdef int n_rows = x.shape[0], xe = x.shape[1], c = x.shape[2]
    out_arr = np.empty((n_rows * (xe - kx + 1), c * kx), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    with nogil:
        _row_windows_fill(x, out, kx)
    return out_arr


def row_windows_out(x_in, int kx, out_arr):
    cdef cnp.complex128_t[:, :, ::1] x = x_in
    cdef cnp.complex128_t[:, ::1] out = out_arr
    with nogil:
        _row_windows_fill(x, out, kx)
    return out_arr


cdef void _row_windows_adjoint_fill(cnp.complex128_t[:, ::1] g,
                                    cnp.complex128_t[:, ::1] out,
                                    int n_rows, int x_ext, int kx) noexcept nogil:
    cdef int c = g.shape[1] // kx
    cdef int x1 = x_ext - kx + 1
    cdef int r, xe, ci, t, u
    cdef double complex acc
    # accumulate tap-ascending per output element, matching the fallback
    # slice-add order bit for bit
    for r in range(n_rows):
        for xe in range(x_ext):
            for ci in range(c):
                acc = 0
                for t in range(kx):
                    u = xe - t
                    if 0 <= u < x1:
                        acc = acc + g[r * x1 + u, ci * kx + t]
                out[r * x_ext + xe, ci] = acc


def row_windows_adjoint(g_in, int n_rows, int x_ext, int kx):
    cdef cnp.complex128_t[:, ::1] g = np.ascontiguousarray(g_in, dtype=np.complex128)
    cdef int c = g.shape[1] // kx
    out_arr = np.empty((n_rows * x_ext, c), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    with nogil:
        _row_windows_adjoint_fill(g, out, n_rows, x_ext, kx)
    return out_arr


def row_windows_adjoint_out(g_in, int n_rows, int x_ext, int kx, out_arr):
    cdef cnp.complex128_t[:, ::1] g = g_in
    cdef cnp.complex128_t[:, ::1] out = out_arr
    with nogil:
        _row_windows_adjoint_fill(g, out, n_rows, x_ext, kx)
    return out_arr


cdef void _leaky_fill(double[::1] zf, double[::1] of, double alpha,
                      Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double v, w
    for i in range(n):
        v = zf[i]
        w = alpha * v
        of[i] = v if v >= 0.0 else w


def cleaky_forward(z, double alpha):
    z_arr = np.ascontiguousarray(z, dtype=np.complex128)
    shape = z_arr.shape
    cdef double[::1] zf = z_arr.reshape(-1).view(np.float64)
    out_arr = np.empty_like(z_arr).reshape(-1)
    cdef double[::1] of = out_arr.view(np.float64)
    with nogil:
        _leaky_fill(zf, of, alpha, zf.shape[0])
    return out_arr.reshape(shape)


def cleaky_forward_out(z, out, double alpha):
    cdef double[::1] zf = z.reshape(-1).view(np.float64)
    cdef double[::1] of = out.reshape(-1).view(np.float64)
    with nogil:
        _leaky_fill(zf, of, alpha, zf.shape[0])
    return out


def cleaky_backward(z, grad, double alpha):
    z_arr = np.ascontiguousarray(z, dtype=np.complex128)
    g_arr = np.ascontiguousarray(grad, dtype=np.complex128)
    shape = z_arr.shape
    cdef double[::1] zf = z_arr.reshape(-1).view(np.float64)
    cdef double[::1] gf = g_arr.reshape(-1).view(np.float64)
    out_arr = np.empty_like(z_arr).reshape(-1)
    cdef double[::1] of = out_arr.view(np.float64)
    cdef Py_ssize_t i, n = zf.shape[0]
    cdef double g, w
    with nogil:
        for i in range(n):
            g = gf[i]
            w = alpha * g
            of[i] = g if zf[i] >= 0.0 else w
    return out_arr.reshape(shape)


def cleaky_backward_inplace(z, grad, double alpha):
    """Scale ``grad`` by the rectifier derivative at ``z``, in place."""
    cdef double[::1] zf = z.reshape(-1).view(np.float64)
    cdef double[::1] gf = grad.reshape(-1).view(np.float64)
    cdef Py_ssize_t i, n = zf.shape[0]
    cdef double g, w
    with nogil:
        for i in range(n):
            g = gf[i]
            w = alpha * g
            gf[i] = g if zf[i] >= 0.0 else w
    return grad
