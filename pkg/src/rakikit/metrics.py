"""Reconstruction quality metrics on masked magnitude images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import UndefinedMetricError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    nmse: float
    psnr: float  # dB; +inf when the images agree exactly
    ssim: float
    mask_fraction: float
    empty_mask: bool = False

    def to_text(self) -> str:
        lines = [
            f"nmse = {self.nmse!r}",
            f"psnr = {self.psnr!r}",
            f"ssim = {self.ssim!r}",
            f"mask_fraction = {self.mask_fraction!r}",
            f"empty_mask = {int(self.empty_mask)}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricReport":
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
        return cls(
            nmse=float(values["nmse"]),
            psnr=float(values["psnr"]),
            ssim=float(values["ssim"]),
            mask_fraction=float(values["mask_fraction"]),
            empty_mask=bool(int(values.get("empty_mask", "0"))),
        )


def _as_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D magnitude image, got shape {arr.shape}")
    return arr


def make_mask(reference, threshold_fraction: float = 0.05) -> np.ndarray:
    """Support mask: pixels above threshold_fraction of the reference peak."""
    reference = _as_image(reference)
    if not 0 <= threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in [0, 1)")
    return reference > threshold_fraction * reference.max()


def _check_pair(recon, reference, mask):
    recon = _as_image(recon)
    reference = _as_image(reference)
    mask = np.asarray(mask, dtype=bool)
    if recon.shape != reference.shape or mask.shape != reference.shape:
        raise ValueError(
            f"shape mismatch: {recon.shape}, {reference.shape}, {mask.shape}"
        )
    if not mask.any():
        raise UndefinedMetricError("metric undefined on an empty mask")
    return recon, reference, mask


def nmse(recon, reference, mask) -> float:
    """Energy-normalized squared error over the mask."""
    recon, reference, mask = _check_pair(recon, reference, mask)
    denom = float(np.sum(reference[mask] ** 2))
    if denom == 0:
        raise UndefinedMetricError("reference has zero energy inside the mask")
    return float(np.sum((recon[mask] - reference[mask]) ** 2)) / denom


def psnr(recon, reference, mask) -> float:
    """20*log10(masked reference peak / masked RMSE); +inf on exact agreement."""
    recon, reference, mask = _check_pair(recon, reference, mask)
    peak = float(reference[mask].max())
    if peak <= 0:
        raise UndefinedMetricError("reference peak inside the mask is not positive")
    rmse = math.sqrt(float(np.mean((recon[mask] - reference[mask]) ** 2)))
    if rmse == 0:
        return float("inf")
    return 20.0 * math.log10(peak / rmse)


def _gaussian_kernel_1d(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2.0 * sigma**2))
    return k / k.sum()


def _local_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # symmetric (half-sample) boundary handling in both directions
    tmp = correlate1d(img, kernel, axis=0, mode="reflect")
    return correlate1d(tmp, kernel, axis=1, mode="reflect")


def ssim(recon, reference, mask) -> float:
    """Mean structural similarity over mask-centered Gaussian windows.

    11-tap Gaussian window with sigma 1.5, stabilizers K1 = 0.01, K2 = 0.03,
    dynamic range = reference maximum, symmetric boundary handling.
    """
    recon, reference, mask = _check_pair(recon, reference, mask)
    data_range = float(reference.max())
    if data_range <= 0:
        raise UndefinedMetricError("reference dynamic range is not positive")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    kernel = _gaussian_kernel_1d(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = _local_mean(recon, kernel)
    mu_y = _local_mean(reference, kernel)
    xx = _local_mean(recon * recon, kernel)
    yy = _local_mean(reference * reference, kernel)
    xy = _local_mean(recon * reference, kernel)
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    return float(np.mean(ssim_map[mask]))


def evaluate(recon, reference, threshold_fraction: float = 0.05) -> MetricReport:
    """All metrics on the thresholded reference mask; flags an empty mask."""
    reference = _as_image(reference)
    mask = make_mask(reference, threshold_fraction)
    fraction = float(mask.mean())
    if not mask.any():
        return MetricReport(
            nmse=float("nan"),
            psnr=float("nan"),
            ssim=float("nan"),
            mask_fraction=0.0,
            empty_mask=True,
        )
    return MetricReport(
        nmse=nmse(recon, reference, mask),
        psnr=psnr(recon, reference, mask),
        ssim=ssim(recon, reference, mask),
        mask_fraction=fraction,
    )
