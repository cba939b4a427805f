"""Linear k-space interpolation: kernel calibration and application.

Calibration slides a source window over the fully sampled calibration block
and fits, per target, one complex weight for every (coil, source line,
readout tap) by linear least squares. Application gathers the same source
neighborhoods around each missing line of the zero-filled data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import backend
from ._windows import (
    gather_targets,
    missing_anchor_map,
    scatter_predictions,
    source_rows,
)
from .core import (
    SamplingPattern,
    as_kspace,
    extract_central_lines,
    reinsert_lines,
    zero_fill,
)
from .errors import CalibrationError, InsufficientAcsError


@dataclass(frozen=True)
class KernelGeometry:
    """Source/target layout of the interpolation kernel.

    Sources sit on ``n_src_lines`` acquired rows spaced ``rate`` apart with
    ``ro_taps`` readout taps each; the rate-1 targets sit in gap block
    ``gap = n_src_lines // 2 - 1`` (the central gap), at readout offset 0
    from the window center.
    """

    n_src_lines: int
    ro_taps: int
    rate: int

    def __post_init__(self):
        if self.n_src_lines < 2:
            raise ValueError("need at least 2 source lines")
        if self.ro_taps < 1 or self.ro_taps % 2 == 0:
            raise ValueError("ro_taps must be odd and >= 1")
        if self.rate < 1:
            raise ValueError("rate must be >= 1")

    @property
    def gap(self) -> int:
        return self.n_src_lines // 2 - 1

    @property
    def pe_extent(self) -> int:
        return (self.n_src_lines - 1) * self.rate + 1

    @property
    def ro_center(self) -> int:
        return (self.ro_taps - 1) // 2


@dataclass(frozen=True)
class GrappaKernel:
    geometry: KernelGeometry
    n_coils: int
    # (rate-1, out_coil, src_coil, src_line, ro_tap)
    weights: np.ndarray

    def __post_init__(self):
        g = self.geometry
        expected = (g.rate - 1, self.n_coils, self.n_coils, g.n_src_lines, g.ro_taps)
        if self.weights.shape != expected:
            raise ValueError(f"weight shape {self.weights.shape} != {expected}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("kernel weights must be finite")

    def as_matrix(self) -> np.ndarray:
        """(n_coils*n_src_lines*ro_taps, (rate-1)*n_coils) application matrix."""
        g = self.geometry
        n_t = (g.rate - 1) * self.n_coils
        return self.weights.reshape(n_t, -1).T.copy()


def assemble_calibration(acs, geom: KernelGeometry):
    """Source matrix A and target matrix B over all valid calibration windows.

    A row exists for every window whose source AND target offsets lie inside
    the block; A has n_coils*n_src_lines*ro_taps columns (flattened source
    neighborhood), B has (rate-1)*n_coils columns.
    """
    acs = as_kspace(acs)
    n_rows, n_cols = acs.shape[1], acs.shape[2]
    if n_rows < geom.pe_extent or n_cols < geom.ro_taps:
        raise InsufficientAcsError(
            f"calibration block {n_rows}x{n_cols} smaller than the "
            f"{geom.pe_extent}-row, {geom.ro_taps}-column window",
            required_rows=geom.pe_extent,
        )
    a = backend.im2col(acs, geom.n_src_lines, geom.ro_taps, geom.rate)
    n_anchors = n_rows - geom.pe_extent + 1
    n_ro = n_cols - geom.ro_taps + 1
    b = gather_targets(acs, n_anchors, n_ro, geom.rate, geom.gap, geom.ro_center)
    return a, b


def calibrate(a, b, geom: KernelGeometry, n_coils: int, tikhonov_lambda: float = 0.0):
    """Least-squares kernel weights, optionally Tikhonov-regularized.

    With ``tikhonov_lambda = 0`` the minimum-norm least-squares solution is
    computed by SVD, which also handles the rank-deficient systems produced
    by low-order harmonic coil models. With a positive lambda the normal
    equations (A^H A + lambda I) W = A^H B are solved by Cholesky
    factorization.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0] or a.shape[0] < 1:
        raise ValueError(f"inconsistent calibration shapes {a.shape}, {b.shape}")
    if tikhonov_lambda < 0:
        raise ValueError("tikhonov_lambda must be >= 0")
    if tikhonov_lambda == 0.0:
        try:
            # fixed relative rank cutoff: singular directions below it carry
            # no signal (harmonic coil models and conjugate-augmented stacks
            # are legitimately rank-deficient) but, left to the machine-eps
            # default, borderline noise directions leak in with huge weights
            w, _, _, _ = scipy.linalg.lstsq(
                a, b, cond=1e-10, lapack_driver="gelsd"
            )
        except np.linalg.LinAlgError as exc:  # pragma: no cover - SVD failure
            raise CalibrationError(
                "least-squares solve failed; retry with tikhonov_lambda > 0"
            ) from exc
    else:
        gram = a.conj().T @ a
        gram[np.diag_indices_from(gram)] += tikhonov_lambda
        try:
            c, low = scipy.linalg.cho_factor(gram)
            w = scipy.linalg.cho_solve((c, low), a.conj().T @ b)
        except np.linalg.LinAlgError as exc:
            raise CalibrationError(
                "normal equations not positive definite; increase tikhonov_lambda"
            ) from exc
    if not np.all(np.isfinite(w)):
        raise CalibrationError(
            "calibration produced non-finite weights; retry with tikhonov_lambda > 0"
        )
    rate = geom.rate
    weights = (
        w.T.copy().reshape(rate - 1, n_coils, n_coils, geom.n_src_lines, geom.ro_taps)
    )
    return GrappaKernel(geom, n_coils, weights)


def interpolate(ksp_zf, kernel: GrappaKernel, pattern: SamplingPattern):
    """Fill every missing line of zero-filled k-space; acquired lines untouched.

    Anchors wrap circularly along phase-encode; readout is zero-extended so
    predictions cover the full width.
    """
    ksp_zf = as_kspace(ksp_zf)
    n_c, n_y, n_x = ksp_zf.shape
    geom = kernel.geometry
    out = ksp_zf.copy()
    missing, anchors, anchor_of_missing, gap_index = missing_anchor_map(
        pattern, n_y, geom.gap
    )
    if missing.size == 0:
        return out
    pad = geom.ro_center
    padded = np.zeros((n_c, n_y, n_x + 2 * pad), dtype=np.complex128)
    padded[:, :, pad : pad + n_x] = ksp_zf
    rows = source_rows(anchors, geom.n_src_lines, geom.rate, n_y)
    a_app = backend.gather_windows(padded, rows, geom.ro_taps)
    pred = (a_app @ kernel.as_matrix()).reshape(anchors.size, n_x, -1)
    scatter_predictions(out, pred, missing, anchor_of_missing, gap_index)
    return out


def grappa_reconstruct(
    ksp_us,
    pattern: SamplingPattern,
    geom: KernelGeometry | None = None,
    tikhonov_lambda: float = 0.0,
    acs_block=None,
    kernel: GrappaKernel | None = None,
):
    """Calibrate on the ACS (or a separate pre-scan block) and interpolate.

    ``acs_block`` overrides the in-line ACS for pre-scan calibration; a
    pre-computed ``kernel`` skips calibration entirely. Acquired lines are
    copied verbatim, so no explicit re-insertion step is needed here.
    """
    ksp_us = as_kspace(ksp_us)
    if geom is None:
        geom = KernelGeometry(2, 5, pattern.rate)
    zf = zero_fill(ksp_us, pattern)
    if pattern.rate == 1:
        return zf
    if kernel is None:
        if acs_block is None:
            acs_block = _inline_acs(zf, pattern)
        a, b = assemble_calibration(acs_block, geom)
        kernel = calibrate(a, b, geom, ksp_us.shape[0], tikhonov_lambda)
    return interpolate(zf, kernel, pattern)


def igrappa_reconstruct(
    ksp_us,
    pattern: SamplingPattern,
    schedule,
    geom: KernelGeometry | None = None,
    tikhonov_lambda: float = 0.0,
    acs_block=None,
):
    """Iterative recalibration on the central block of the previous pass.

    Runs the same loop as the iterative network scheme with the linear model
    in its place: ``schedule.n_iter`` total calibration stages, the first on
    the original ACS (identical to :func:`grappa_reconstruct`), each later
    stage on ``schedule.augmented_lines`` central lines of the previous
    reconstruction with original data re-inserted.
    """
    ksp_us = as_kspace(ksp_us)
    if geom is None:
        geom = KernelGeometry(2, 5, pattern.rate)
    zf = zero_fill(ksp_us, pattern)
    recon = grappa_reconstruct(zf, pattern, geom, tikhonov_lambda, acs_block)
    n_lines = min(schedule.augmented_lines, ksp_us.shape[1])
    for _ in range(1, schedule.n_iter):
        block = extract_central_lines(recon, n_lines)
        a, b = assemble_calibration(block, geom)
        kernel = calibrate(a, b, geom, ksp_us.shape[0], tikhonov_lambda)
        recon = reinsert_lines(interpolate(zf, kernel, pattern), zf, pattern)
    return recon


def _inline_acs(ksp_zf, pattern: SamplingPattern):
    if pattern.acs_count == 0:
        raise InsufficientAcsError(
            "pattern has no ACS block and no pre-scan block was supplied",
            required_rows=1,
        )
    return ksp_zf[:, pattern.acs_start : pattern.acs_start + pattern.acs_count, :]
