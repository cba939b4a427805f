import numpy as np
import pytest

from rakikit import (
    CoilModel,
    PhantomSpec,
    SamplingPattern,
    augment_vcc,
    ifft2c,
    make_harmonic_array,
    make_mask,
    nmse,
    render_phantom,
    rss_combine,
    simulate_kspace,
    vcc_reconstruct,
    zero_fill,
)
from rakikit.errors import PatternCompatibilityError
from rakikit.iraki import IrakiSchedule
from rakikit.phantom import Ellipse, default_head_phantom
from rakikit.raki import NetworkConfig
from rakikit.vcc import reflected_index, vcc_pattern

from conftest import random_kspace


def reflect_oracle(ksp):
    """Loop-based reflection+conjugation, independent of the vectorized path."""
    n_c, n_y, n_x = ksp.shape
    out = np.empty_like(ksp)
    for c in range(n_c):
        for y in range(n_y):
            for x in range(n_x):
                yy = (2 * (n_y // 2) - y) % n_y
                xx = (2 * (n_x // 2) - x) % n_x
                out[c, y, x] = np.conj(ksp[c, yy, xx])
    return out


def real_coil_model():
    # real-valued sensitivities: DC plus conjugate harmonic pairs
    coils = []
    for h, (a, b) in enumerate([(1.0, 0.3), (0.8, 0.5), (1.2, -0.4), (0.9, 0.2)]):
        amp = complex(b, 0.1 * (h + 1))
        coils.append(
            (
                (0, 0, complex(a)),
                (h % 3 + 1, 0, amp),
                (-(h % 3 + 1), 0, np.conj(amp)),
            )
        )
    return CoilModel(tuple(coils))


class TestAugment:
    def test_doubles_coil_count(self):
        ksp = random_kspace((16, 8, 8), 0)
        assert augment_vcc(ksp).data.shape[0] == 32

    @pytest.mark.parametrize("shape", [(2, 8, 8), (2, 7, 9), (3, 6, 5)])
    def test_construction_invariant_bit_level(self, shape):
        ksp = random_kspace(shape, 1)
        stack = augment_vcc(ksp)
        assert np.array_equal(stack.data[shape[0] :], reflect_oracle(ksp))
        assert np.array_equal(stack.data[: shape[0]], ksp)

    def test_involution(self):
        ksp = random_kspace((2, 8, 6), 2)
        once = augment_vcc(ksp).data[2:]
        twice = augment_vcc(once).data[2:]
        assert np.array_equal(twice, ksp)

    def test_real_image_real_coils_virtual_equals_physical(self):
        img = render_phantom(default_head_phantom((32, 32)))
        ksp = simulate_kspace(img, real_coil_model(), 0.0, 0)
        stack = augment_vcc(ksp)
        assert np.max(np.abs(stack.data[4:] - ksp)) <= 1e-12 * np.max(np.abs(ksp))

    def test_reflected_index_fixed_points(self):
        # DC bin maps to itself; for even extents the edge row does too
        assert reflected_index(8, 16) == 8
        assert reflected_index(0, 16) == 0
        assert reflected_index(3, 16) == 13
        assert reflected_index(3, 7) == 3  # DC of odd extent


class TestPatternCompatibility:
    def test_offset_rejected(self):
        with pytest.raises(PatternCompatibilityError):
            vcc_pattern(SamplingPattern(4, offset=1), 64)

    def test_rate_must_divide_extent(self):
        with pytest.raises(PatternCompatibilityError):
            vcc_pattern(SamplingPattern(4), 66)

    def test_even_acs_trimmed_to_symmetric_core(self):
        p = vcc_pattern(SamplingPattern.centered(4, 18, 128), 128)
        assert (p.acs_start, p.acs_count) == (56, 17)

    def test_odd_acs_kept(self):
        p = vcc_pattern(SamplingPattern.centered(4, 17, 128), 128)
        assert (p.acs_start, p.acs_count) == (56, 17)


class TestVccReconstruct:
    def test_full_sampling_matches_plain(self):
        img = render_phantom(default_head_phantom((16, 16)))
        ksp = simulate_kspace(img, real_coil_model(), 0.0, 0)
        res = vcc_reconstruct(ksp, SamplingPattern(1), "grappa")
        plain = rss_combine(ifft2c(ksp))
        np.testing.assert_allclose(res.image, plain, atol=1e-12)

    def test_grappa_exactness_preserved(self):
        img = render_phantom(default_head_phantom((64, 48)))
        ksp = simulate_kspace(img, make_harmonic_array(8, 3, seed=1), 0.0, 0)
        pattern = SamplingPattern.centered(4, 16, 64)
        res = vcc_reconstruct(zero_fill(ksp, pattern), pattern, "grappa")
        ref = rss_combine(ifft2c(ksp))
        assert nmse(res.image, ref, make_mask(ref)) < 1e-10
        assert res.image.shape == (64, 48)
        assert np.all(res.image >= 0)

    def test_matches_plain_grappa_on_conjugate_symmetric_data(self):
        # with a real image and real coils the virtual coils duplicate the
        # physical rows, which cannot change a least-squares solution
        img = render_phantom(default_head_phantom((64, 48)))
        ksp = simulate_kspace(img, real_coil_model(), 0.0, 0)
        pattern = SamplingPattern.centered(2, 17, 64)
        from rakikit.grappa import grappa_reconstruct

        res = vcc_reconstruct(zero_fill(ksp, pattern), pattern, "grappa")
        plain = grappa_reconstruct(zero_fill(ksp, pattern), pattern)
        plain_img = rss_combine(ifft2c(plain))
        assert np.max(np.abs(res.image - plain_img)) <= 1e-8 * np.max(plain_img)

    def test_acquired_lines_preserved_all_methods(self, harmonic_ksp_small):
        pattern = SamplingPattern.centered(4, 17, 64)
        zf = zero_fill(harmonic_ksp_small, pattern)
        rows = pattern.acquired_rows(64)
        cfg = NetworkConfig(
            n_coils=16, rate=4, layer1_channels=8, layer2_channels=4
        )
        cfg47 = NetworkConfig(
            n_coils=16,
            rate=4,
            layer1_kernel=(4, 7),
            layer1_channels=8,
            layer2_channels=4,
        )
        cases = {
            "grappa": {},
            "igrappa": {"schedule": IrakiSchedule(n_iter=2, augmented_lines=40)},
            "raki": {"cfg": cfg, "steps": 2},
            "iraki": {
                "schedule": IrakiSchedule(n_iter=2, augmented_lines=40),
                "cfg": cfg47,
                "steps": 2,
            },
        }
        for method, opts in cases.items():
            res = vcc_reconstruct(zf, pattern, method, **opts)
            assert np.array_equal(
                res.physical_ksp[:, rows, :], zf[:, rows, :]
            ), method

    def test_unknown_method(self, harmonic_ksp_small):
        with pytest.raises(ValueError):
            vcc_reconstruct(
                harmonic_ksp_small, SamplingPattern.centered(4, 17, 64), "sense"
            )
