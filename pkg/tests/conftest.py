import numpy as np
import pytest

from rakikit import (
    SamplingPattern,
    make_harmonic_array,
    render_phantom,
    simulate_kspace,
    zero_fill,
)
from rakikit.phantom import default_head_phantom


@pytest.fixture(scope="session")
def harmonic_ksp_small():
    """Noiseless 64x48 phantom with an exactly linear 8-coil harmonic array."""
    img = render_phantom(default_head_phantom((64, 48)))
    coils = make_harmonic_array(8, 3, seed=1)
    return simulate_kspace(img, coils, 0.0, 0)


@pytest.fixture(scope="session")
def pattern_small():
    return SamplingPattern.centered(4, 16, 64)


@pytest.fixture(scope="session")
def zf_small(harmonic_ksp_small, pattern_small):
    return zero_fill(harmonic_ksp_small, pattern_small)


def random_kspace(shape, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
