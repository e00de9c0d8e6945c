"""Two-stage denoising: low-resolution pass, then a conditional
high-resolution pass guided by the low-resolution result.

Adaptive lambda refinement (and the snapshot/resume machinery it needs)
applies only in the high-resolution stage; a constant lambda suffices at
low resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lam import adaptive_scalar, estimate_noise, refine
from .prior import MeanPredictor
from .resize import downsample, upsample_bicubic  # noqa: F401  (re-exported)
from .schedule import NoiseSchedule
from .solver import DenoiseConfig, denoise_runs, resume_runs

__all__ = [
    "CascadeConfig",
    "CascadeReport",
    "cascade_denoise",
    "cascade_denoise_report",
    "downsample",
    "upsample_bicubic",
]


@dataclass(frozen=True)
class CascadeConfig:
    """Downsampling factor plus the per-stage run recipes."""

    k: int
    lr_stage: DenoiseConfig
    hr_stage: DenoiseConfig

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("cascade factor k must be >= 2")


@dataclass(frozen=True)
class CascadeReport:
    """Diagnostics from one cascade run (resolved adaptive values)."""

    lr_result: np.ndarray
    coarse_result: np.ndarray
    noise_std: float
    resolved_scalar: float | None


def cascade_denoise(
    y0_hr: np.ndarray,
    cfg: CascadeConfig,
    lr_pred: MeanPredictor,
    hr_pred: MeanPredictor,
    lr_schedule: NoiseSchedule,
    hr_schedule: NoiseSchedule,
) -> np.ndarray:
    out, _ = cascade_denoise_report(y0_hr, cfg, lr_pred, hr_pred, lr_schedule, hr_schedule)
    return out


def cascade_denoise_report(
    y0_hr: np.ndarray,
    cfg: CascadeConfig,
    lr_pred: MeanPredictor,
    hr_pred: MeanPredictor,
    lr_schedule: NoiseSchedule,
    hr_schedule: NoiseSchedule,
) -> tuple[np.ndarray, CascadeReport]:
    """Full two-stage pipeline with diagnostics.

    The low-resolution stage denoises the block-mean reduction of the
    input; its averaged result conditions the high-resolution stage.  If
    the high-resolution lambda policy is adaptive and a rollback step is
    configured, the coarse runs are resumed with the refined policy and
    re-averaged.
    """
    if lr_pred.conditional:
        raise ValueError("low-resolution predictor must be unconditional")
    if not hr_pred.conditional:
        raise ValueError("high-resolution predictor must be conditional")
    y0_hr = np.asarray(y0_hr, dtype=np.float64)
    if y0_hr.shape[0] % cfg.k or y0_hr.shape[1] % cfg.k:
        raise ValueError(f"input shape {y0_hr.shape} not divisible by k={cfg.k}")

    y0_lr = downsample(y0_hr, cfg.k)
    lr_outs, _ = denoise_runs(y0_lr, lr_pred, lr_schedule, cfg.lr_stage)
    x0_lr = np.mean(lr_outs, axis=0)

    hr_outs, snapshots = denoise_runs(y0_hr, hr_pred, hr_schedule, cfg.hr_stage,
                                      condition=x0_lr)
    coarse = np.mean(hr_outs, axis=0)

    policy = cfg.hr_stage.lambda_policy
    adaptive = policy.variant != "constant"
    noise_std = float(estimate_noise(y0_hr, coarse).std())
    if not adaptive or cfg.hr_stage.rollback_step == 0:
        report = CascadeReport(x0_lr, coarse, noise_std, None)
        return coarse, report

    refined = refine(policy, y0_hr, coarse)
    refined_cfg = replace(cfg.hr_stage, lambda_policy=refined)
    resumed = resume_runs(snapshots, hr_pred, hr_schedule, refined_cfg, condition=x0_lr)
    out = np.mean(resumed, axis=0)
    scalar = None
    if policy.variant in ("adaptive_scalar", "combined"):
        scalar = adaptive_scalar(estimate_noise(y0_hr, coarse), policy.a, policy.b)
    report = CascadeReport(x0_lr, coarse, noise_std, scalar)
    return out, report
