"""Synthetic multi-coil ground truth for desk-scale verification.

The phantom is an additive ellipse image rendered pixelwise; coil
sensitivities are band-limited complex harmonics

    c_h(y, x) = sum_k a_k * exp(2j*pi*(m_k*y/n_y + n_k*x/n_x))

so that fully sampled coil k-spaces are circularly shifted copies of the
image spectrum. With phase-encode harmonic orders spanning 0..R-1 and a
full-column-rank amplitude matrix, every missing line of an R-fold
undersampled acquisition is an exact complex combination of acquired lines,
which gives the linear-interpolation exactness oracle used by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import fft2c
from .errors import DimensionMismatchError
from .rng import SplitMix64, derive_seed

# Substream labels for seed derivation (documented part of the noise contract).
STREAM_NOISE = 0x6E6F6973  # "nois"
STREAM_COILS = 0x636F696C  # "coil"
STREAM_WEIGHTS = 0x77657467  # "wetg"


@dataclass(frozen=True)
class Ellipse:
    center_y: float  # normalized coordinates in [-1, 1]
    center_x: float
    semi_y: float
    semi_x: float
    rotation: float = 0.0  # radians, counterclockwise
    intensity: float = 1.0


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int]  # (n_y, n_x)
    ellipses: tuple[Ellipse, ...]
    image_phase: tuple[float, ...] | None = None  # up to 6 polynomial coefficients
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        for e in self.ellipses:
            if not np.isfinite(e.intensity):
                raise ValueError("ellipse intensities must be finite")


@dataclass(frozen=True)
class CoilModel:
    """Per-coil harmonic terms, each a (pe_order, ro_order, amplitude) triple."""

    harmonics: tuple[tuple[tuple[int, int, complex], ...], ...]

    def __post_init__(self):
        if any(len(terms) == 0 for terms in self.harmonics):
            raise ValueError("every coil needs at least one harmonic term")
        if not any(
            m == 0 and n == 0 and a != 0
            for terms in self.harmonics
            for (m, n, a) in terms
        ):
            raise ValueError("at least one coil must carry a DC term")

    @property
    def n_coils(self) -> int:
        return len(self.harmonics)

    def sensitivity_maps(self, dims: tuple[int, int]) -> np.ndarray:
        # phase referenced to the image center (the DC pixel of the centered
        # FFT), so a pure order-m coil shifts the spectrum by exactly m bins
        n_y, n_x = dims
        y = (np.arange(n_y)[:, None] - n_y // 2) / n_y
        x = (np.arange(n_x)[None, :] - n_x // 2) / n_x
        maps = np.zeros((self.n_coils, n_y, n_x), dtype=np.complex128)
        for h, terms in enumerate(self.harmonics):
            for m, n, a in terms:
                maps[h] += a * np.exp(2j * np.pi * (m * y + n * x))
        return maps


def _normalized_grid(n_y: int, n_x: int):
    y = (2.0 * np.arange(n_y) + 1.0 - n_y) / n_y
    x = (2.0 * np.arange(n_x) + 1.0 - n_x) / n_x
    return y[:, None], x[None, :]


def render_phantom(spec: PhantomSpec) -> np.ndarray:
    """Pixelwise additive ellipse image, optionally with a polynomial phase.

    Returns a real float64 image when ``image_phase`` is None, complex128
    otherwise. Pixel centers live on a normalized [-1, 1] grid.
    """
    n_y, n_x = spec.dims
    yy, xx = _normalized_grid(n_y, n_x)
    img = np.zeros((n_y, n_x), dtype=np.float64)
    for e in spec.ellipses:
        dy = yy - e.center_y
        dx = xx - e.center_x
        c, s = np.cos(e.rotation), np.sin(e.rotation)
        u = c * dy + s * dx
        v = -s * dy + c * dx
        inside = (u / e.semi_y) ** 2 + (v / e.semi_x) ** 2 <= 1.0
        img[inside] += e.intensity
    if spec.image_phase is None:
        return img
    coef = np.zeros(6)
    coef[: len(spec.image_phase)] = spec.image_phase
    phase = (
        coef[0]
        + coef[1] * yy
        + coef[2] * xx
        + coef[3] * yy**2
        + coef[4] * yy * xx
        + coef[5] * xx**2
    )
    return img * np.exp(1j * phase)


def simulate_kspace(
    image, coils: CoilModel, noise_sigma: float = 0.0, seed: int = 0
) -> np.ndarray:
    """Fully sampled multi-coil k-space of ``image`` under the coil model.

    Per coil: fft2c(sensitivity * image) plus, when ``noise_sigma > 0``,
    i.i.d. complex Gaussian noise sigma*(g1 + i*g2). Noise is drawn from the
    documented SplitMix64 stream seeded with derive_seed(seed, STREAM_NOISE),
    coil by coil in index order, row-major within each coil, real part before
    imaginary part of each sample.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise DimensionMismatchError(f"image must be 2-D, got shape {image.shape}")
    maps = coils.sensitivity_maps(image.shape)
    ksp = fft2c(maps * image[None, :, :])
    if noise_sigma > 0:
        stream = SplitMix64(derive_seed(seed, STREAM_NOISE))
        noise = noise_sigma * stream.complex_normal(ksp.shape)
        ksp = ksp + noise
    return ksp


def make_harmonic_array(
    n_coils: int, max_pe_harmonic: int, seed: int = 0
) -> CoilModel:
    """Coil array whose sensitivities are pure phase-encode harmonics 0..max.

    The (n_coils, max_pe_harmonic+1) amplitude matrix is redrawn until its
    smallest singular value exceeds 1e-3 of the largest, guaranteeing the
    full column rank required by the linear-exactness oracle.
    """
    if max_pe_harmonic > n_coils - 1:
        raise ValueError("need max_pe_harmonic <= n_coils - 1 for full column rank")
    stream = SplitMix64(derive_seed(seed, STREAM_COILS))
    n_orders = max_pe_harmonic + 1
    while True:
        amp = stream.complex_normal((n_coils, n_orders))
        sv = np.linalg.svd(amp, compute_uv=False)
        if sv[-1] > 1e-3 * sv[0]:
            break
    harmonics = tuple(
        tuple((p, 0, complex(amp[h, p])) for p in range(n_orders))
        for h in range(n_coils)
    )
    return CoilModel(harmonics)


def make_2d_harmonic_array(
    n_coils: int, max_pe_harmonic: int, max_ro_harmonic: int, seed: int = 0
) -> CoilModel:
    """Generic smooth coil array with 2-D harmonic content.

    Unlike :func:`make_harmonic_array` this is NOT exactly solvable by a
    linear kernel at rates R <= max_pe_harmonic, which makes it the realistic
    configuration for noise-robustness experiments. Amplitudes decay with
    harmonic order so the sensitivities stay smooth.
    """
    stream = SplitMix64(derive_seed(seed, STREAM_COILS))
    coils = []
    for _ in range(n_coils):
        terms = []
        for m in range(max_pe_harmonic + 1):
            for n in range(-max_ro_harmonic, max_ro_harmonic + 1):
                a = complex(stream.complex_normal(1)[0]) / (1.0 + abs(m) + abs(n))
                terms.append((m, n, a))
        coils.append(tuple(terms))
    model = CoilModel(tuple(coils))
    # guarantee the DC invariant even if a draw lands exactly on zero
    assert any(m == 0 and n == 0 and a != 0 for t in model.harmonics for m, n, a in t)
    return model


def default_head_phantom(dims: tuple[int, int]) -> PhantomSpec:
    """A small head-like test object: skull shell, brain, ventricles, lesions."""
    ellipses = (
        Ellipse(0.0, 0.0, 0.86, 0.72, 0.0, 1.0),
        Ellipse(0.0, 0.0, 0.78, 0.64, 0.0, -0.2),
        Ellipse(-0.12, -0.18, 0.28, 0.14, 0.35, 0.35),
        Ellipse(-0.12, 0.18, 0.28, 0.14, -0.35, 0.35),
        Ellipse(0.35, 0.0, 0.18, 0.3, 0.0, -0.25),
        Ellipse(-0.45, 0.0, 0.08, 0.08, 0.0, 0.5),
        Ellipse(0.15, 0.4, 0.05, 0.05, 0.0, 0.6),
        Ellipse(0.3, -0.3, 0.04, 0.07, 0.6, 0.45),
    )
    return PhantomSpec(dims=dims, ellipses=ellipses)
