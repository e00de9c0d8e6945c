"""Variance schedules and accelerated sampling sub-sequences.

A schedule fixes the per-step noise rates beta_1..beta_T of the forward
process and the cumulative signal fractions alpha_bar_0..alpha_bar_T
derived from them.  Everything downstream (forward sampling, posterior
coefficients, the MAP solver) queries these tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NoiseSchedule",
    "TauSchedule",
    "linear_beta_schedule",
    "make_tau",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Tables beta_t (t=1..T) and alpha_bar_t (t=0..T) of a forward process.

    alpha_bars[0] is exactly 1 so that timestep 0 is the clean image;
    alpha_bars[t] = alpha_bars[t-1] * (1 - betas[t-1]).
    """

    betas: np.ndarray
    alpha_bars: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("all betas must lie in (0, 1)")
        if np.any(np.diff(betas) < 0.0):
            raise ValueError("betas must be non-decreasing")
        object.__setattr__(self, "betas", betas)
        if self.alpha_bars is None:
            abar = np.empty(betas.size + 1, dtype=np.float64)
            abar[0] = 1.0
            np.cumprod(1.0 - betas, out=abar[1:])
            object.__setattr__(self, "alpha_bars", abar)
        else:
            abar = np.asarray(self.alpha_bars, dtype=np.float64)
            if abar.shape != (betas.size + 1,):
                raise ValueError("alpha_bars must have length T + 1")
            if abar[0] != 1.0:
                raise ValueError("alpha_bars[0] must be exactly 1")
            object.__setattr__(self, "alpha_bars", abar)
        self.betas.setflags(write=False)
        self.alpha_bars.setflags(write=False)

    @property
    def T(self) -> int:
        return self.betas.size

    def _check_t(self, t: int, lo: int = 1) -> None:
        if not lo <= t <= self.T:
            raise ValueError(f"timestep {t} out of range [{lo}, {self.T}]")

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        self._check_t(t, lo=0)
        return float(self.alpha_bars[t])

    def sigma(self, t: int) -> float:
        """Reverse-process noise scale sqrt((1-abar_{t-1})/(1-abar_t) * beta_t).

        Zero at t=1 because abar_0 = 1: the last reverse step is deterministic.
        """
        self._check_t(t)
        num = 1.0 - self.alpha_bars[t - 1]
        den = 1.0 - self.alpha_bars[t]
        return float(np.sqrt(num / den * self.betas[t - 1]))

    def posterior_coefficients(self, t: int) -> tuple[float, float, float]:
        """Coefficients (on x0, on x_t) of the forward posterior mean, plus its
        variance beta_tilde_t = (1-abar_{t-1})/(1-abar_t) * beta_t."""
        self._check_t(t)
        abar_prev = self.alpha_bars[t - 1]
        abar = self.alpha_bars[t]
        beta = self.betas[t - 1]
        den = 1.0 - abar
        coef_x0 = float(np.sqrt(abar_prev) * beta / den)
        coef_xt = float(np.sqrt(1.0 - beta) * (1.0 - abar_prev) / den)
        beta_tilde = float((1.0 - abar_prev) / den * beta)
        return coef_x0, coef_xt, beta_tilde


def linear_beta_schedule(T: int, beta1: float, betaT: float) -> NoiseSchedule:
    """Schedule with betas spaced linearly from beta1 to betaT inclusive."""
    if T < 2:
        raise ValueError("T must be at least 2")
    if not (0.0 < beta1 <= betaT < 1.0):
        raise ValueError("need 0 < beta1 <= betaT < 1")
    betas = np.linspace(beta1, betaT, T, dtype=np.float64)
    return NoiseSchedule(betas=betas)


@dataclass(frozen=True)
class TauSchedule:
    """Strictly increasing sub-sequence of timesteps used for accelerated
    solving; always starts at 1 and ends at T."""

    taus: tuple[int, ...]

    def __post_init__(self):
        taus = tuple(int(t) for t in self.taus)
        if len(taus) < 2:
            raise ValueError("tau sub-sequence needs at least the endpoints 1 and T")
        if taus[0] != 1:
            raise ValueError("tau sub-sequence must start at 1")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau sub-sequence must be strictly increasing")
        object.__setattr__(self, "taus", taus)

    def __len__(self) -> int:
        return len(self.taus)

    @property
    def last(self) -> int:
        return self.taus[-1]

    def index_of(self, t: int) -> int:
        try:
            return self.taus.index(t)
        except ValueError:
            raise ValueError(f"timestep {t} is not in the tau sub-sequence") from None


def make_tau(T: int, dense_end: int, dense_stride: int, sparse_stride: int) -> TauSchedule:
    """Non-uniform timestep sub-sequence: dense strides up to ``dense_end``,
    sparse strides after, always including 1 and T.

    Denser sampling at small timesteps keeps the solver close to the noisy
    input where the likelihood matters most.
    """
    if not 1 <= dense_end <= T:
        raise ValueError("dense_end must lie in [1, T]")
    if dense_stride < 1 or sparse_stride < 1:
        raise ValueError("strides must be >= 1")
    steps = set(range(1, dense_end + 1, dense_stride))
    steps.update(range(dense_end + sparse_stride, T, sparse_stride))
    steps.add(T)
    return TauSchedule(taus=tuple(sorted(steps)))
