import numpy as np
import pytest

from rakikit import core
from rakikit.core import (
    SamplingPattern,
    extract_central_lines,
    fft2c,
    ifft2c,
    load_image,
    load_ksp,
    reinsert_lines,
    rss_combine,
    save_image,
    save_ksp,
    zero_fill,
)
from rakikit.errors import DimensionMismatchError, FormatError

from conftest import random_kspace


class TestSamplingPattern:
    def test_acquired_set_union_by_hand(self):
        # R=4, y0=0, 2 ACS lines centered on 8 rows: acs_start = ceil(6/2) = 3,
        # so the union is {0, 4} | {3, 4} = {0, 3, 4}
        p = SamplingPattern.centered(4, 2, 8)
        assert p.acs_start == 3
        assert list(p.acquired_rows(8)) == [0, 3, 4]

    def test_offset_grid(self):
        p = SamplingPattern(3, offset=1)
        assert list(p.acquired_rows(7)) == [1, 4]

    def test_validation(self):
        with pytest.raises(ValueError):
            SamplingPattern(0)
        with pytest.raises(ValueError):
            SamplingPattern(4, offset=4)
        with pytest.raises(DimensionMismatchError):
            SamplingPattern(4, 0, acs_start=6, acs_count=4).acquired_mask(8)


class TestZeroFill:
    def test_full_sampling_is_identity(self):
        ksp = random_kspace((2, 6, 5), 0)
        out = zero_fill(ksp, SamplingPattern(1))
        assert np.array_equal(out, ksp)

    def test_uniform_grid_rows(self):
        ksp = random_kspace((2, 8, 4), 1)
        out = zero_fill(ksp, SamplingPattern(4))
        assert np.array_equal(out[:, [0, 4], :], ksp[:, [0, 4], :])
        assert np.all(out[:, [1, 2, 3, 5, 6, 7], :] == 0)

    def test_acs_union(self):
        ksp = random_kspace((1, 8, 3), 2)
        out = zero_fill(ksp, SamplingPattern.centered(4, 2, 8))
        nonzero_rows = sorted(set(np.nonzero(out[0])[0]))
        assert nonzero_rows == [0, 3, 4]

    @pytest.mark.parametrize("seed", range(3))
    def test_idempotent(self, seed):
        ksp = random_kspace((3, 12, 7), seed)
        p = SamplingPattern.centered(3, 4, 12)
        once = zero_fill(ksp, p)
        assert np.array_equal(zero_fill(once, p), once)

    def test_pattern_exceeding_dims(self):
        ksp = random_kspace((1, 4, 4), 0)
        with pytest.raises(DimensionMismatchError):
            zero_fill(ksp, SamplingPattern(2, 0, acs_start=2, acs_count=4))


class TestExtractCentral:
    def test_whole(self):
        ksp = random_kspace((2, 6, 4), 0)
        assert np.array_equal(extract_central_lines(ksp, 6), ksp)

    def test_320_of_65(self):
        # brute-force index arithmetic: start = ceil((320-65)/2) = 128,
        # rows 128..192 inclusive
        ksp = np.zeros((1, 320, 2), dtype=complex)
        ksp[0, :, 0] = np.arange(320)
        block = extract_central_lines(ksp, 65)
        assert block.shape == (1, 65, 2)
        assert list(block[0, :, 0].real.astype(int)) == list(range(128, 193))

    def test_center_of_odd(self):
        ksp = np.zeros((1, 3, 1), dtype=complex)
        ksp[0, :, 0] = [10, 20, 30]
        assert extract_central_lines(ksp, 1)[0, 0, 0] == 20

    def test_too_many(self):
        with pytest.raises(ValueError):
            extract_central_lines(random_kspace((1, 4, 4), 0), 5)


class TestReinsert:
    def test_identity(self):
        ksp = random_kspace((2, 8, 5), 0)
        p = SamplingPattern.centered(4, 2, 8)
        assert np.array_equal(reinsert_lines(ksp, ksp, p), ksp)

    def test_zero_recon_full_sampling(self):
        ksp = random_kspace((2, 6, 5), 1)
        out = reinsert_lines(np.zeros_like(ksp), ksp, SamplingPattern(1))
        assert np.array_equal(out, ksp)

    def test_perturbed_acs_restored(self):
        ksp = random_kspace((2, 8, 5), 2)
        p = SamplingPattern.centered(4, 2, 8)
        recon = ksp + (1 + 1j)
        out = reinsert_lines(recon, ksp, p)
        acquired = p.acquired_rows(8)
        missing = p.missing_rows(8)
        assert np.array_equal(out[:, acquired, :], ksp[:, acquired, :])
        assert np.array_equal(out[:, missing, :], recon[:, missing, :])

    def test_extent_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            reinsert_lines(
                random_kspace((1, 4, 4), 0),
                random_kspace((1, 5, 4), 0),
                SamplingPattern(2),
            )


class TestCenteredFFT:
    def test_zero(self):
        assert np.all(ifft2c(np.zeros((1, 4, 4))) == 0)

    def test_center_impulse_is_flat(self):
        for n_y, n_x in [(8, 8), (7, 5)]:
            ksp = np.zeros((1, n_y, n_x), dtype=complex)
            ksp[0, n_y // 2, n_x // 2] = 1.0
            img = ifft2c(ksp)
            np.testing.assert_allclose(
                img, np.full_like(img, 1.0 / np.sqrt(n_y * n_x)), atol=1e-14
            )

    @pytest.mark.parametrize("seed", range(3))
    def test_round_trip(self, seed):
        x = random_kspace((2, 10, 9), seed)
        back = fft2c(ifft2c(x))
        assert np.max(np.abs(back - x)) / np.max(np.abs(x)) <= 1e-12
        fwd = ifft2c(fft2c(x))
        assert np.max(np.abs(fwd - x)) / np.max(np.abs(x)) <= 1e-12


class TestRss:
    def test_single_coil(self):
        img = random_kspace((1, 4, 4), 0)
        np.testing.assert_allclose(rss_combine(img), np.abs(img[0]))

    def test_pythagoras(self):
        img = np.zeros((2, 1, 1), dtype=complex)
        img[0], img[1] = 3.0, 4.0
        assert rss_combine(img)[0, 0] == 5.0

    def test_subset_matches_direct(self):
        img = random_kspace((8, 6, 5), 3)
        doubled = np.concatenate([img, np.conj(img)], axis=0)
        direct = np.sqrt(np.sum(np.abs(img) ** 2, axis=0))
        np.testing.assert_allclose(rss_combine(doubled, n_keep=8), direct)

    @pytest.mark.parametrize("seed", range(3))
    def test_per_coil_phase_invariance(self, seed):
        rng = np.random.default_rng(seed)
        img = random_kspace((4, 6, 5), seed)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=4))
        rotated = img * phases[:, None, None]
        a, b = rss_combine(img), rss_combine(rotated)
        assert np.max(np.abs(a - b)) / np.max(a) <= 1e-12

    def test_n_keep_range(self):
        img = random_kspace((2, 3, 3), 0)
        for bad in (0, 3):
            with pytest.raises(ValueError):
                rss_combine(img, n_keep=bad)


class TestKspFile:
    def test_round_trip_bit_identical(self, tmp_path):
        # single-precision payload: make the data f32-representable first
        raw = random_kspace((3, 5, 4), 0)
        ksp = (
            raw.real.astype(np.float32).astype(np.float64)
            + 1j * raw.imag.astype(np.float32).astype(np.float64)
        )
        path = tmp_path / "a.ksp"
        save_ksp(ksp, path)
        assert np.array_equal(load_ksp(path), ksp)

    def test_double_round_trip(self, tmp_path):
        ksp = random_kspace((2, 4, 4), 1)
        p1, p2 = tmp_path / "a.ksp", tmp_path / "b.ksp"
        save_ksp(ksp, p1)
        once = load_ksp(p1)
        save_ksp(once, p2)
        assert np.array_equal(load_ksp(p2), once)

    def test_bad_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.ksp"
        path.write_bytes(b"XXXX" + b"\x00" * 32)
        with pytest.raises(FormatError) as err:
            load_ksp(path)
        assert err.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.ksp"
        save_ksp(random_kspace((1, 2, 2), 0), path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(FormatError):
            load_ksp(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.ksp"
        path.write_bytes(b"KSP1")
        with pytest.raises(FormatError):
            load_ksp(path)

    def test_extent_overflow(self, tmp_path):
        import struct

        path = tmp_path / "o.ksp"
        path.write_bytes(b"KSP1" + struct.pack("<III", 2**20, 2**20, 2**20))
        with pytest.raises(FormatError) as err:
            load_ksp(path)
        assert err.value.offset == 4


class TestImageFile:
    def test_round_trip(self, tmp_path):
        img = np.random.default_rng(0).random((6, 5))
        path = tmp_path / "x.img"
        save_image(img, path)
        assert np.array_equal(load_image(path), img)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.img"
        path.write_bytes(b"ABCD" + b"\x00" * 16)
        with pytest.raises(FormatError):
            load_image(path)

    def test_pgm(self, tmp_path):
        img = np.array([[0.0, 1.0], [0.5, 0.25]])
        path = tmp_path / "x.pgm"
        core.save_pgm(img, path)
        data = path.read_bytes()
        assert data.startswith(b"P5\n2 2\n255\n")
        assert data[-4:] == bytes([0, 255, 128, 64])
