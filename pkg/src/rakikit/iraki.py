"""Iterative network refinement on augmented calibration data.

Workflow: an initial linear reconstruction augments the scan-specific
calibration region to a wide central block; the network trains on that
block, re-interpolates the measured data, original lines are re-inserted,
and the refreshed central block feeds the next training stage at a linearly
decaying learning rate. Weights carry across stages, optimizer moments do
not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    SamplingPattern,
    as_kspace,
    extract_central_lines,
    ifft2c,
    reinsert_lines,
    rss_combine,
    zero_fill,
)
from .grappa import KernelGeometry, grappa_reconstruct
from .metrics import make_mask, nmse
from .raki import (
    NetworkConfig,
    TrainingProblem,
    TrainReport,
    init_weights,
    raki_interpolate,
)

_ETA0_DEFAULT = 5e-3
_DELTA_ETA = {4: 2e-4, 5: 3e-4}
_DELTA_ETA_DEFAULT = 2e-4


def _derived_n_iter(eta0: float, delta_eta: float) -> int:
    # floor of the ratio; the small epsilon absorbs binary rounding so an
    # integral ratio such as 5e-3 / 2e-4 stays exact
    return int(math.floor(eta0 / delta_eta + 1e-9))


@dataclass(frozen=True)
class IrakiSchedule:
    """Learning-rate ladder eta_j = eta0 - j*delta_eta for j < n_iter.

    ``n_iter`` defaults to floor(eta0 / delta_eta), which keeps every stage's
    rate strictly positive; it may be overridden downward (or to 0 for the
    degenerate linear-only path).
    """

    eta0: float = _ETA0_DEFAULT
    delta_eta: float = _DELTA_ETA_DEFAULT
    n_iter: int = -1  # -1 means derive from eta0/delta_eta
    augmented_lines: int = 65

    def __post_init__(self):
        if self.eta0 <= 0 or self.delta_eta <= 0:
            raise ValueError("eta0 and delta_eta must be > 0")
        if self.n_iter < 0:
            object.__setattr__(self, "n_iter", _derived_n_iter(self.eta0, self.delta_eta))
        if self.n_iter > 0 and self.eta0 - (self.n_iter - 1) * self.delta_eta <= 0:
            raise ValueError("every stage learning rate must stay > 0")
        if self.augmented_lines < 1:
            raise ValueError("augmented_lines must be >= 1")

    def learning_rates(self) -> np.ndarray:
        return self.eta0 - self.delta_eta * np.arange(self.n_iter)


def build_schedule(rate: int) -> IrakiSchedule:
    """Published schedule constants for a given undersampling rate."""
    if not 2 <= rate <= 8:
        raise ValueError(f"supported rates are 2..8, got {rate}")
    return IrakiSchedule(
        eta0=_ETA0_DEFAULT,
        delta_eta=_DELTA_ETA.get(rate, _DELTA_ETA_DEFAULT),
    )


@dataclass
class IrakiResult:
    recon: np.ndarray
    stage_reports: list[TrainReport] = field(default_factory=list)
    stage_etas: list[float] = field(default_factory=list)
    stage_nmse: list[float] | None = None
    stage_weights: list | None = None


def iraki_reconstruct(
    ksp_us,
    pattern: SamplingPattern,
    schedule: IrakiSchedule | None = None,
    steps_per_iter: int = 250,
    seed: int = 0,
    acs_block=None,
    grappa_geom: KernelGeometry | None = None,
    tikhonov_lambda: float = 0.0,
    cfg: NetworkConfig | None = None,
    keep_stage_weights: bool = False,
    reference_image=None,
) -> IrakiResult:
    """Full iterative reconstruction.

    ``acs_block`` switches to pre-scan calibration: the initial linear kernel
    is calibrated on that block and the pattern is expected to carry no ACS
    (nothing is re-inserted beyond the acquired grid). The augmented block of
    later stages always comes from the reconstruction being refined. With a
    ``reference_image`` (root-sum-of-squares magnitude), the per-stage
    reconstruction error is tracked in ``stage_nmse``.
    """
    ksp_us = as_kspace(ksp_us)
    if schedule is None:
        schedule = build_schedule(pattern.rate)
    if grappa_geom is None:
        grappa_geom = KernelGeometry(2, 5, pattern.rate)
    if cfg is None:
        cfg = NetworkConfig(
            n_coils=ksp_us.shape[0], rate=pattern.rate, layer1_kernel=(4, 7)
        )
    zf = zero_fill(ksp_us, pattern)
    recon = grappa_reconstruct(
        zf, pattern, grappa_geom, tikhonov_lambda, acs_block=acs_block
    )
    track_nmse = reference_image is not None
    result = IrakiResult(
        recon,
        stage_nmse=[] if track_nmse else None,
        stage_weights=[] if keep_stage_weights else None,
    )
    if schedule.n_iter == 0 or pattern.rate == 1:
        return result

    n_lines = min(schedule.augmented_lines, ksp_us.shape[1])
    weights = init_weights(cfg, seed)
    scale = float(np.max(np.abs(recon)))
    scale = scale if scale > 0 else 1.0
    for eta in schedule.learning_rates():
        block = extract_central_lines(recon, n_lines)
        problem = TrainingProblem(block, cfg, scale=scale)
        report = problem.run(weights, float(eta), steps_per_iter)
        result.stage_reports.append(report)
        result.stage_etas.append(float(eta))
        if keep_stage_weights:
            result.stage_weights.append(weights.copy())
        recon = reinsert_lines(
            raki_interpolate(zf, weights, cfg, pattern), zf, pattern
        )
        if track_nmse:
            image = rss_combine(ifft2c(recon))
            result.stage_nmse.append(
                nmse(image, reference_image, make_mask(reference_image))
            )
    result.recon = recon
    return result
