"""Virtual conjugate coils: conjugate-symmetry augmentation of the coil stack.

A virtual coil holds the complex conjugate of the physical coil's k-space
reflected through the DC bin, which encodes image-phase information as extra
coil diversity. Reconstruction then runs on the doubled stack; the final
image combines the physical coils only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    SamplingPattern,
    as_kspace,
    central_start,
    ifft2c,
    reinsert_lines,
    rss_combine,
    zero_fill,
)
from .errors import PatternCompatibilityError
from .grappa import KernelGeometry, grappa_reconstruct, igrappa_reconstruct
from .iraki import IrakiSchedule, iraki_reconstruct
from .raki import NetworkConfig, raki_reconstruct


def reflected_index(n: int, extent: int) -> int:
    """Index of the frequency-negated bin under centered storage.

    Reflection about the DC bin (index extent//2); for even extents the
    edge (Nyquist) row maps to itself.
    """
    return (2 * (extent // 2) - n) % extent


def _reflection_indices(extent: int) -> np.ndarray:
    return (2 * (extent // 2) - np.arange(extent)) % extent


@dataclass(frozen=True)
class VccStack:
    """Doubled coil stack; coil h + n_physical = conj(reflect(coil h))."""

    data: np.ndarray
    n_physical: int


def augment_vcc(ksp) -> VccStack:
    ksp = as_kspace(ksp)
    n_c = ksp.shape[0]
    ry = _reflection_indices(ksp.shape[1])
    rx = _reflection_indices(ksp.shape[2])
    virtual = np.conj(ksp[:, ry[:, None], rx[None, :]])
    return VccStack(np.concatenate([ksp, virtual], axis=0), n_c)


def _symmetric_acs(pattern: SamplingPattern, n_y: int) -> SamplingPattern:
    """Largest centered ACS sub-block that reflection maps onto itself.

    Even-length centered blocks are off-center by one bin under reflection,
    so one edge row is dropped; odd-length centered blocks map to themselves.
    """
    if pattern.acs_count == 0:
        return pattern
    rows = np.arange(pattern.acs_start, pattern.acs_start + pattern.acs_count)
    reflected = set(_reflection_indices(n_y)[rows])
    common = sorted(set(rows) & reflected)
    if not common or np.any(np.diff(common) != 1):
        raise PatternCompatibilityError(
            "ACS block has no contiguous reflection-symmetric core; "
            "use a centered ACS block"
        )
    return SamplingPattern(pattern.rate, pattern.offset, common[0], len(common))


def vcc_pattern(pattern: SamplingPattern, n_y: int) -> SamplingPattern:
    """Effective pattern of the doubled stack, or raise if incompatible.

    The virtual coils are sampled on the reflected pattern; both halves share
    one pattern only when the uniform grid realigns under reflection
    (offset 0 and rate dividing the extent) and the ACS core is symmetric.
    """
    if pattern.offset != 0:
        raise PatternCompatibilityError(
            f"virtual-coil reconstruction requires grid offset 0, got "
            f"{pattern.offset}: the reflected grid would not realign"
        )
    if pattern.rate > 1 and n_y % pattern.rate != 0:
        raise PatternCompatibilityError(
            f"virtual-coil reconstruction requires the rate ({pattern.rate}) "
            f"to divide the phase-encode extent ({n_y})"
        )
    return _symmetric_acs(pattern, n_y)


@dataclass
class VccResult:
    image: np.ndarray
    physical_ksp: np.ndarray
    stack_ksp: np.ndarray


def vcc_reconstruct(
    ksp_us,
    pattern: SamplingPattern,
    method: str = "grappa",
    acs_block=None,
    **opts,
) -> VccResult:
    """Phase-constrained reconstruction on the doubled coil stack.

    Virtual coils are generated from the zero-filled data (and from the
    pre-scan block, when given) so reflected missing lines stay zero. After
    reconstruction, originally acquired lines are restored in the physical
    half and the image is the root-sum-of-squares of the physical coils.
    """
    ksp_us = as_kspace(ksp_us)
    n_c, n_y, _ = ksp_us.shape
    eff_pattern = vcc_pattern(pattern, n_y)
    zf = zero_fill(ksp_us, eff_pattern)
    stack = augment_vcc(zf).data
    stack_acs = None
    if acs_block is not None:
        stack_acs = augment_vcc(acs_block).data

    if method == "grappa":
        recon = grappa_reconstruct(
            stack,
            eff_pattern,
            opts.get("geom") or KernelGeometry(2, 5, pattern.rate),
            opts.get("tikhonov_lambda", 0.0),
            acs_block=stack_acs,
        )
    elif method == "igrappa":
        recon = igrappa_reconstruct(
            stack,
            eff_pattern,
            opts.get("schedule") or IrakiSchedule(),
            opts.get("geom") or KernelGeometry(2, 5, pattern.rate),
            opts.get("tikhonov_lambda", 0.0),
            acs_block=stack_acs,
        )
    elif method == "raki":
        cfg = opts.get("cfg") or NetworkConfig(n_coils=2 * n_c, rate=pattern.rate)
        recon, _, _ = raki_reconstruct(
            stack,
            eff_pattern,
            cfg,
            opts.get("eta", 5e-3),
            opts.get("steps", 250),
            opts.get("seed", 0),
            acs_block=stack_acs,
        )
    elif method == "iraki":
        cfg = opts.get("cfg") or NetworkConfig(
            n_coils=2 * n_c, rate=pattern.rate, layer1_kernel=(4, 7)
        )
        recon = iraki_reconstruct(
            stack,
            eff_pattern,
            opts.get("schedule"),
            opts.get("steps", 250),
            opts.get("seed", 0),
            acs_block=stack_acs,
            cfg=cfg,
            tikhonov_lambda=opts.get("tikhonov_lambda", 0.0),
        ).recon
    else:
        raise ValueError(f"unknown method {method!r}")

    physical = reinsert_lines(recon[:n_c], zero_fill(ksp_us, pattern), pattern)
    image = rss_combine(ifft2c(physical))
    return VccResult(image=image, physical_ksp=physical, stack_ksp=recon)
