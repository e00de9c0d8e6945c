"""Iterative MAP denoising inside the reverse process.

Each step blends the coupled noisy observation at the next timestep with
the predictor's reverse mean; the blend weight is the lambda policy value
over the reverse noise scale.  The timestep sub-sequence may skip steps,
in which case sigma is taken at the current (upper) timestep and lambda
at the target (lower) one.

Averaging repeats the whole run with shifted seeds; the runs are
independent and advance in lockstep so the predictor sees them as one
batch.  Snapshots allow resuming from a small timestep with a refined
lambda while replaying the identical noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lam import LambdaPolicy, lambda_at
from .forward import noise_draw
from .prior import MeanPredictor
from .schedule import NoiseSchedule, TauSchedule

__all__ = [
    "DenoiseConfig",
    "RunSnapshot",
    "map_update",
    "denoise",
    "denoise_runs",
    "denoise_average",
    "resume",
    "resume_runs",
]


@dataclass(frozen=True)
class DenoiseConfig:
    """One run's full recipe: timestep sub-sequence, lambda policy, number
    of averaged runs, snapshot timestep (0 disables), and base seed."""

    tau: TauSchedule
    lambda_policy: LambdaPolicy
    averaging: int = 1
    rollback_step: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.averaging < 1:
            raise ValueError("averaging count must be >= 1")
        if self.rollback_step < 0:
            raise ValueError("rollback step must be non-negative")
        if self.rollback_step >= self.tau.last:
            raise ValueError("rollback step must be below the top timestep")
        if self.rollback_step and self.rollback_step not in self.tau.taus:
            raise ValueError("rollback step must be a tau element (or 0)")


@dataclass(frozen=True)
class RunSnapshot:
    """State needed to re-enter one run at `timestep` with a different
    lambda policy.

    The seed is the reproducibility token: noise fields are keyed by
    (seed, timestep), so the remaining draws replay exactly.
    """

    timestep: int
    x_hat: np.ndarray
    y0: np.ndarray
    seed: int


def map_update(
    y_prev: np.ndarray,
    mu: np.ndarray,
    lam: float | np.ndarray,
    sigma_t: float,
) -> np.ndarray:
    """Closed-form minimizer of ||x - y_prev||^2 + (lam/sigma_t)||x - mu||^2:
    (y_prev + (lam/sigma_t) * mu) / (1 + lam/sigma_t), elementwise."""
    if sigma_t <= 0:
        raise ValueError("sigma_t must be positive (t=1 uses the deterministic branch)")
    if np.any(np.asarray(lam) < 0):
        raise ValueError("lambda must be non-negative")
    y_prev = np.asarray(y_prev, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if y_prev.shape != mu.shape:
        raise ValueError(f"shape mismatch: {y_prev.shape} vs {mu.shape}")
    w = lam / sigma_t
    return (y_prev + w * mu) / (1.0 + w)


def _coupled_batch(y0: np.ndarray, t: int, seeds: list[int], s: NoiseSchedule) -> np.ndarray:
    """Stacked observation chain y_t for each run seed, sharing y0."""
    abar = s.alpha_bar(t)
    eps = np.stack([noise_draw(seed, t, y0.shape) for seed in seeds])
    return np.sqrt(abar) * y0[None] + np.sqrt(1.0 - abar) * eps


def _iterate(
    xs: np.ndarray,
    y0: np.ndarray,
    start_index: int,
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    seeds: list[int],
    condition: np.ndarray | None,
) -> tuple[list[np.ndarray], list[RunSnapshot]]:
    """Run the stacked MAP iteration from tau[start_index] down to the
    final per-run outputs."""
    taus = cfg.tau.taus
    base = cfg.lambda_policy.resolved_base()
    snapshots: list[RunSnapshot] = []
    for i in range(start_index, 0, -1):
        t, t_prev = taus[i], taus[i - 1]
        mus = pred.predict_mu_batch(xs, t, condition)
        y_prev = _coupled_batch(y0, t_prev, seeds, s)
        xs = map_update(y_prev, mus, lambda_at(base, t_prev, s), s.sigma(t))
        if not np.all(np.isfinite(xs)):
            raise RuntimeError(f"non-finite state at timestep {t_prev}")
        if t_prev == cfg.rollback_step:
            snapshots.extend(
                RunSnapshot(t_prev, xs[j].copy(), y0, seeds[j])
                for j in range(len(seeds))
            )
    x0s = pred.predict_mu_batch(xs, 1, condition)
    if not np.all(np.isfinite(x0s)):
        raise RuntimeError("non-finite state at timestep 0")
    return list(x0s), snapshots


def denoise_runs(
    y0: np.ndarray,
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    condition: np.ndarray | None = None,
) -> tuple[list[np.ndarray], list[RunSnapshot]]:
    """The `averaging` independent runs (seeds seed+0..seed+R-1) and their
    snapshots, one per run when rollback is enabled.

    Each run initializes its top state from the coupled noisy observation
    at T (where the signal fraction is negligible), iterates map_update
    down the tau sub-sequence, and finishes with the deterministic t=1
    branch.
    """
    pred._check_condition(condition)
    y0 = np.asarray(y0, dtype=np.float64)
    T = cfg.tau.last
    if T != s.T:
        raise ValueError(f"tau ends at {T} but schedule has T={s.T}")
    seeds = [cfg.seed + i for i in range(cfg.averaging)]
    xs = _coupled_batch(y0, T, seeds, s)
    return _iterate(xs, y0, len(cfg.tau) - 1, pred, s, cfg, seeds, condition)


def denoise(
    y0: np.ndarray,
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    condition: np.ndarray | None = None,
) -> tuple[np.ndarray, list[RunSnapshot]]:
    """One full MAP denoising run (the averaging count is ignored)."""
    single = DenoiseConfig(tau=cfg.tau, lambda_policy=cfg.lambda_policy,
                           averaging=1, rollback_step=cfg.rollback_step,
                           seed=cfg.seed)
    outs, snaps = denoise_runs(y0, pred, s, single, condition)
    return outs[0], snaps


def denoise_average(
    y0: np.ndarray,
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    condition: np.ndarray | None = None,
) -> np.ndarray:
    """Arithmetic mean of the `averaging` independent runs."""
    outputs, _ = denoise_runs(y0, pred, s, cfg, condition)
    return np.mean(outputs, axis=0)


def resume_runs(
    snapshots: list[RunSnapshot],
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    condition: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Re-enter a group of runs at their shared snapshot timestep with
    cfg's (refined) lambda policy; noise draws replay from the stored
    seeds so only lambda changes."""
    if not snapshots:
        raise ValueError("no snapshots to resume from")
    pred._check_condition(condition)
    timestep = snapshots[0].timestep
    if any(sn.timestep != timestep for sn in snapshots):
        raise ValueError("snapshots must share one timestep")
    start = cfg.tau.index_of(timestep)
    xs = np.stack([sn.x_hat for sn in snapshots])
    seeds = [sn.seed for sn in snapshots]
    outs, _ = _iterate(xs, snapshots[0].y0, start, pred, s, cfg, seeds, condition)
    return outs


def resume(
    snapshot: RunSnapshot,
    pred: MeanPredictor,
    s: NoiseSchedule,
    cfg: DenoiseConfig,
    condition: np.ndarray | None = None,
) -> np.ndarray:
    """Single-run resume; see resume_runs."""
    return resume_runs([snapshot], pred, s, cfg, condition)[0]
