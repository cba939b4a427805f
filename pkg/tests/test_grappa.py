import numpy as np
import pytest

from rakikit import (
    SamplingPattern,
    extract_central_lines,
    ifft2c,
    make_harmonic_array,
    make_mask,
    nmse,
    render_phantom,
    rss_combine,
    simulate_kspace,
    zero_fill,
)
from rakikit.errors import InsufficientAcsError
from rakikit.grappa import (
    GrappaKernel,
    KernelGeometry,
    assemble_calibration,
    calibrate,
    grappa_reconstruct,
    igrappa_reconstruct,
    interpolate,
)
from rakikit.iraki import IrakiSchedule
from rakikit.phantom import default_head_phantom

from conftest import random_kspace


def brute_force_window_count(n_rows, n_cols, geom):
    """Count anchors whose source AND target offsets all fall inside."""
    src = [j * geom.rate for j in range(geom.n_src_lines)]
    tgt = [geom.gap * geom.rate + r for r in range(1, geom.rate)]
    count = 0
    for a in range(n_rows):
        for x in range(n_cols):
            rows_ok = all(0 <= a + o < n_rows for o in src + tgt)
            cols_ok = x + geom.ro_taps <= n_cols
            if rows_ok and cols_ok:
                count += 1
    return count


class TestGeometry:
    def test_gap(self):
        assert KernelGeometry(2, 5, 4).gap == 0
        assert KernelGeometry(4, 7, 4).gap == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            KernelGeometry(1, 5, 4)
        with pytest.raises(ValueError):
            KernelGeometry(2, 4, 4)

    def test_parameter_count_matches_kernel_scale(self):
        # per (target, out-coil): n_coils * 2 * 5 source weights
        geom = KernelGeometry(2, 5, 4)
        n_coils = 8
        weights = np.zeros((3, n_coils, n_coils, 2, 5), dtype=complex)
        kernel = GrappaKernel(geom, n_coils, weights)
        per_target_coil = kernel.weights[0, 0].size
        assert per_target_coil == n_coils * 2 * 5


class TestAssemble:
    def test_single_window(self):
        geom = KernelGeometry(2, 5, 4)
        acs = random_kspace((2, geom.pe_extent, 5), 0)
        a, b = assemble_calibration(acs, geom)
        assert a.shape == (1, 2 * 2 * 5)
        assert b.shape == (1, 3 * 2)

    @pytest.mark.parametrize("n_rows,n_cols", [(18, 12), (9, 7), (6, 5)])
    def test_window_count_matches_brute_force(self, n_rows, n_cols):
        geom = KernelGeometry(2, 5, 4)
        acs = random_kspace((3, n_rows, n_cols), 1)
        a, b = assemble_calibration(acs, geom)
        expected = brute_force_window_count(n_rows, n_cols, geom)
        assert a.shape[0] == expected
        assert b.shape[0] == expected
        # 18-row ACS: 14 anchors per readout position
        if n_rows == 18:
            assert expected == 14 * (n_cols - 4)

    def test_window_values_by_hand(self):
        geom = KernelGeometry(2, 3, 2)
        acs = random_kspace((1, 3, 3), 2)
        a, b = assemble_calibration(acs, geom)
        np.testing.assert_array_equal(a[0], np.concatenate([acs[0, 0], acs[0, 2]]))
        np.testing.assert_array_equal(b[0], [acs[0, 1, 1]])

    def test_zero_acs(self):
        geom = KernelGeometry(2, 5, 4)
        a, b = assemble_calibration(np.zeros((2, 6, 6), dtype=complex), geom)
        assert np.all(a == 0) and np.all(b == 0)

    def test_insufficient_rows(self):
        geom = KernelGeometry(2, 5, 4)
        with pytest.raises(InsufficientAcsError) as err:
            assemble_calibration(random_kspace((2, 4, 8), 0), geom)
        assert err.value.required_rows == geom.pe_extent


class TestCalibrate:
    def test_recovers_known_weights(self):
        # B = A @ W0 with a full-column-rank A; compare to the independent
        # pseudoinverse solution as well as to W0
        rng = np.random.default_rng(3)
        geom = KernelGeometry(2, 5, 4)
        n_coils = 2
        k = n_coils * 2 * 5
        a = rng.standard_normal((3 * k, k)) + 1j * rng.standard_normal((3 * k, k))
        w0 = rng.standard_normal((k, 3 * n_coils)) + 1j * rng.standard_normal(
            (k, 3 * n_coils)
        )
        b = a @ w0
        kernel = calibrate(a, b, geom, n_coils, 0.0)
        w = kernel.as_matrix()
        assert np.max(np.abs(w - w0)) <= 1e-10 * np.max(np.abs(w0))
        w_pinv = np.linalg.pinv(a) @ b
        assert np.max(np.abs(w - w_pinv)) <= 1e-10 * np.max(np.abs(w_pinv))

    def test_identity_design(self):
        geom = KernelGeometry(2, 3, 2)
        k = 1 * 2 * 3
        b = random_kspace((k, 1), 4).reshape(k, 1)
        kernel = calibrate(np.eye(k, dtype=complex), b, geom, 1, 0.0)
        np.testing.assert_allclose(kernel.as_matrix(), b, atol=1e-12)

    def test_ridge_shrinks_to_zero(self):
        rng = np.random.default_rng(5)
        geom = KernelGeometry(2, 3, 2)
        k = 6
        a = rng.standard_normal((20, k)) + 1j * rng.standard_normal((20, k))
        b = rng.standard_normal((20, 1)) + 1j * rng.standard_normal((20, 1))
        small = calibrate(a, b, geom, 1, 1e12).as_matrix()
        assert np.max(np.abs(small)) < 1e-9

    def test_ridge_residual_not_below_lsq(self):
        rng = np.random.default_rng(6)
        geom = KernelGeometry(2, 3, 2)
        a = rng.standard_normal((30, 6)) + 1j * rng.standard_normal((30, 6))
        b = rng.standard_normal((30, 1)) + 1j * rng.standard_normal((30, 1))
        r0 = np.linalg.norm(a @ calibrate(a, b, geom, 1, 0.0).as_matrix() - b)
        r1 = np.linalg.norm(a @ calibrate(a, b, geom, 1, 0.5).as_matrix() - b)
        assert r1 >= r0 - 1e-12

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            calibrate(
                np.eye(6, dtype=complex),
                np.zeros((6, 1), dtype=complex),
                KernelGeometry(2, 3, 2),
                1,
                -1.0,
            )


class TestInterpolate:
    def _kernel(self, pattern, ksp):
        geom = KernelGeometry(2, 5, pattern.rate)
        acs = ksp[:, pattern.acs_start : pattern.acs_start + pattern.acs_count, :]
        a, b = assemble_calibration(acs, geom)
        return calibrate(a, b, geom, ksp.shape[0], 0.0)

    def test_zero_in_zero_out(self, harmonic_ksp_small, pattern_small):
        kernel = self._kernel(pattern_small, harmonic_ksp_small)
        out = interpolate(
            np.zeros_like(harmonic_ksp_small), kernel, pattern_small
        )
        assert np.all(out == 0)

    @pytest.mark.parametrize("alpha", [2.0, 0.25 + 0.5j])
    def test_complex_linearity(self, harmonic_ksp_small, pattern_small, alpha):
        zf = zero_fill(harmonic_ksp_small, pattern_small)
        kernel = self._kernel(pattern_small, harmonic_ksp_small)
        a = interpolate(alpha * zf, kernel, pattern_small)
        b = alpha * interpolate(zf, kernel, pattern_small)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    def test_additivity(self, pattern_small):
        x = zero_fill(random_kspace((3, 64, 10), 7), pattern_small)
        y = zero_fill(random_kspace((3, 64, 10), 8), pattern_small)
        kernel = calibrate(
            *assemble_calibration(random_kspace((3, 16, 10), 9), KernelGeometry(2, 5, 4)),
        KernelGeometry(2, 5, 4), 3, 0.0)
        a = interpolate(x + y, kernel, pattern_small)
        b = interpolate(x, kernel, pattern_small) + interpolate(y, kernel, pattern_small)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    def test_exactness_on_harmonic_phantom(self, harmonic_ksp_small, pattern_small):
        zf = zero_fill(harmonic_ksp_small, pattern_small)
        recon = grappa_reconstruct(zf, pattern_small)
        ref = rss_combine(ifft2c(harmonic_ksp_small))
        rec = rss_combine(ifft2c(recon))
        assert nmse(rec, ref, make_mask(ref)) < 1e-10


class TestReconstruct:
    def test_full_sampling_identity(self):
        ksp = random_kspace((2, 8, 8), 0)
        out = grappa_reconstruct(ksp, SamplingPattern(1))
        assert np.array_equal(out, ksp)

    def test_acquired_lines_bit_exact(self, harmonic_ksp_small, pattern_small):
        zf = zero_fill(harmonic_ksp_small, pattern_small)
        recon = grappa_reconstruct(zf, pattern_small)
        rows = pattern_small.acquired_rows(64)
        assert np.array_equal(recon[:, rows, :], zf[:, rows, :])

    def test_prescan_calibration(self, harmonic_ksp_small):
        # calibration from a separate low-resolution fully sampled scan
        prescan = extract_central_lines(harmonic_ksp_small, 24)
        pattern = SamplingPattern(4)  # no in-line ACS
        zf = zero_fill(harmonic_ksp_small, pattern)
        recon = grappa_reconstruct(zf, pattern, acs_block=prescan)
        rows = pattern.acquired_rows(64)
        assert np.array_equal(recon[:, rows, :], zf[:, rows, :])
        ref = rss_combine(ifft2c(harmonic_ksp_small))
        assert nmse(rss_combine(ifft2c(recon)), ref, make_mask(ref)) < 1e-10

    def test_missing_acs_raises(self):
        with pytest.raises(InsufficientAcsError):
            grappa_reconstruct(random_kspace((2, 16, 8), 0), SamplingPattern(4))


class TestIterativeGrappa:
    def test_zero_and_one_iterations_match_plain(self, harmonic_ksp_small, pattern_small):
        zf = zero_fill(harmonic_ksp_small, pattern_small)
        plain = grappa_reconstruct(zf, pattern_small)
        for n_iter in (0, 1):
            schedule = IrakiSchedule(n_iter=n_iter, augmented_lines=33)
            out = igrappa_reconstruct(zf, pattern_small, schedule)
            assert np.array_equal(out, plain)

    def test_acquired_preserved_and_fixed_point(self, harmonic_ksp_small, pattern_small):
        zf = zero_fill(harmonic_ksp_small, pattern_small)
        schedule = IrakiSchedule(n_iter=4, augmented_lines=33)
        out = igrappa_reconstruct(zf, pattern_small, schedule)
        rows = pattern_small.acquired_rows(64)
        assert np.array_equal(out[:, rows, :], zf[:, rows, :])
        ref = rss_combine(ifft2c(harmonic_ksp_small))
        assert nmse(rss_combine(ifft2c(out)), ref, make_mask(ref)) < 1e-10
