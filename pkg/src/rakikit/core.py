"""Multi-coil k-space containers, index conventions and basic transforms.

Conventions used throughout the package:

* k-space arrays are complex128 of shape ``(n_coils, n_y, n_x)`` where ``y``
  is the phase-encode (undersampled) axis and ``x`` the readout axis;
* image stacks share the same layout after the centered inverse FFT;
* all internal math runs in double precision, the on-disk format stores
  single precision (two float32 per sample).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, FormatError


def as_kspace(data) -> np.ndarray:
    """Validate and return a (n_coils, n_y, n_x) complex128 array."""
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim != 3:
        raise DimensionMismatchError(
            f"k-space must be 3-D (coil, pe, ro), got shape {arr.shape}"
        )
    if min(arr.shape) < 1:
        raise DimensionMismatchError(f"all extents must be >= 1, got {arr.shape}")
    return arr


def central_start(extent: int, count: int) -> int:
    """Start row of a centered block: ceil((extent - count) / 2)."""
    return -((count - extent) // 2) if count < extent else 0


@dataclass(frozen=True)
class SamplingPattern:
    """Uniform undersampling along phase-encode plus a fully sampled ACS block.

    The acquired-line set is ``{y : (y - offset) % rate == 0}`` united with
    ``{acs_start, ..., acs_start + acs_count - 1}``.
    """

    rate: int
    offset: int = 0
    acs_start: int = 0
    acs_count: int = 0

    def __post_init__(self):
        if self.rate < 1:
            raise ValueError(f"rate must be >= 1, got {self.rate}")
        if not 0 <= self.offset < self.rate:
            raise ValueError(f"offset must lie in [0, rate), got {self.offset}")
        if self.acs_count < 0:
            raise ValueError(f"acs_count must be >= 0, got {self.acs_count}")

    @classmethod
    def centered(cls, rate: int, acs_count: int, n_y: int, offset: int = 0):
        """Pattern with the ACS block centered inside [0, n_y)."""
        return cls(rate, offset, central_start(n_y, acs_count), acs_count)

    def validate_extent(self, n_y: int):
        if self.acs_count > 0 and not (
            0 <= self.acs_start and self.acs_start + self.acs_count <= n_y
        ):
            raise DimensionMismatchError(
                f"ACS block [{self.acs_start}, {self.acs_start + self.acs_count})"
                f" exceeds phase-encode extent {n_y}"
            )
        if self.offset >= n_y:
            raise DimensionMismatchError(
                f"pattern offset {self.offset} exceeds phase-encode extent {n_y}"
            )

    def acquired_mask(self, n_y: int) -> np.ndarray:
        """Boolean mask over phase-encode rows, True where acquired."""
        self.validate_extent(n_y)
        y = np.arange(n_y)
        mask = (y - self.offset) % self.rate == 0
        if self.acs_count > 0:
            mask[self.acs_start : self.acs_start + self.acs_count] = True
        return mask

    def acquired_rows(self, n_y: int) -> np.ndarray:
        return np.flatnonzero(self.acquired_mask(n_y))

    def missing_rows(self, n_y: int) -> np.ndarray:
        return np.flatnonzero(~self.acquired_mask(n_y))

    def without_acs(self) -> "SamplingPattern":
        return SamplingPattern(self.rate, self.offset, 0, 0)


def zero_fill(ksp, pattern: SamplingPattern) -> np.ndarray:
    """Copy acquired lines verbatim, set every other line to exactly zero."""
    ksp = as_kspace(ksp)
    mask = pattern.acquired_mask(ksp.shape[1])
    out = np.zeros_like(ksp)
    out[:, mask, :] = ksp[:, mask, :]
    return out


def extract_central_lines(ksp, count: int) -> np.ndarray:
    """Central ``count`` phase-encode lines at full readout width."""
    ksp = as_kspace(ksp)
    n_y = ksp.shape[1]
    if count > n_y:
        raise ValueError(f"cannot extract {count} lines from extent {n_y}")
    start = central_start(n_y, count)
    return ksp[:, start : start + count, :].copy()


def reinsert_lines(recon, original, pattern: SamplingPattern) -> np.ndarray:
    """Restore every originally acquired line bit-exactly from ``original``."""
    recon = as_kspace(recon)
    original = as_kspace(original)
    if recon.shape != original.shape:
        raise DimensionMismatchError(
            f"shape mismatch: {recon.shape} vs {original.shape}"
        )
    mask = pattern.acquired_mask(recon.shape[1])
    out = recon.copy()
    out[:, mask, :] = original[:, mask, :]
    return out


def fft2c(x) -> np.ndarray:
    """Centered forward 2-D FFT with orthonormal scaling over the last two axes."""
    x = np.asarray(x, dtype=np.complex128)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(x, axes=axes), axes=axes, norm="ortho"),
        axes=axes,
    )


def ifft2c(ksp) -> np.ndarray:
    """Centered inverse 2-D FFT, exact inverse of :func:`fft2c`."""
    ksp = np.asarray(ksp, dtype=np.complex128)
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(ksp, axes=axes), axes=axes, norm="ortho"),
        axes=axes,
    )


def rss_combine(img, n_keep: int | None = None) -> np.ndarray:
    """Root-sum-of-squares combination of the first ``n_keep`` coil images."""
    img = as_kspace(img)
    n_coils = img.shape[0]
    if n_keep is None:
        n_keep = n_coils
    if not 1 <= n_keep <= n_coils:
        raise ValueError(f"n_keep must lie in [1, {n_coils}], got {n_keep}")
    return np.sqrt(np.sum(np.abs(img[:n_keep]) ** 2, axis=0))


# ---------------------------------------------------------------------------
# On-disk formats.
#
# KSP1: magic "KSP1" | u32 n_coils | u32 n_y | u32 n_x | payload of
#       n_coils*n_y*n_x samples, each two little-endian float32 (re, im),
#       coil-major, then row(y)-major, then x. No padding, no compression.
# IMG1: magic "IMG1" | u32 n_y | u32 n_x | n_y*n_x little-endian float64,
#       row-major. Used for real-valued magnitude images.
# ---------------------------------------------------------------------------

_KSP_MAGIC = b"KSP1"
_IMG_MAGIC = b"IMG1"
_MAX_SAMPLES = 2**31  # ~16 GiB payload; anything above is a corrupt header


def save_ksp(ksp, path):
    ksp = as_kspace(ksp)
    n_c, n_y, n_x = ksp.shape
    payload = np.empty((n_c, n_y, n_x, 2), dtype="<f4")
    payload[..., 0] = ksp.real
    payload[..., 1] = ksp.imag
    with open(path, "wb") as fh:
        fh.write(_KSP_MAGIC)
        fh.write(struct.pack("<III", n_c, n_y, n_x))
        fh.write(payload.tobytes())


def load_ksp(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _KSP_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {_KSP_MAGIC!r}", 0)
    if len(raw) < 16:
        raise FormatError("truncated header", len(raw))
    n_c, n_y, n_x = struct.unpack("<III", raw[4:16])
    n_samples = n_c * n_y * n_x
    if min(n_c, n_y, n_x) < 1 or n_samples > _MAX_SAMPLES:
        raise FormatError(f"implausible extents ({n_c}, {n_y}, {n_x})", 4)
    expected = 16 + 8 * n_samples
    if len(raw) != expected:
        raise FormatError(
            f"payload has {len(raw) - 16} bytes, expected {8 * n_samples}",
            min(len(raw), expected),
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=16).reshape(n_c, n_y, n_x, 2)
    return (flat[..., 0].astype(np.float64) + 1j * flat[..., 1]).astype(np.complex128)


def save_image(img, path):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatchError(f"image must be 2-D, got shape {img.shape}")
    with open(path, "wb") as fh:
        fh.write(_IMG_MAGIC)
        fh.write(struct.pack("<II", img.shape[0], img.shape[1]))
        fh.write(img.astype("<f8").tobytes())


def load_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _IMG_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {_IMG_MAGIC!r}", 0)
    if len(raw) < 12:
        raise FormatError("truncated header", len(raw))
    n_y, n_x = struct.unpack("<II", raw[4:12])
    if min(n_y, n_x) < 1 or n_y * n_x > _MAX_SAMPLES:
        raise FormatError(f"implausible extents ({n_y}, {n_x})", 4)
    expected = 12 + 8 * n_y * n_x
    if len(raw) != expected:
        raise FormatError(
            f"payload has {len(raw) - 12} bytes, expected {8 * n_y * n_x}",
            min(len(raw), expected),
        )
    return np.frombuffer(raw, dtype="<f8", offset=12).reshape(n_y, n_x).copy()


def save_pgm(img, path):
    """8-bit binary PGM of a nonnegative image, scaled to its own maximum."""
    img = np.asarray(img, dtype=np.float64)
    peak = img.max()
    scale = 255.0 / peak if peak > 0 else 0.0
    quantized = np.clip(np.round(img * scale), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(quantized.tobytes())
