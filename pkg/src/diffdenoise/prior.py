"""Reverse-process mean predictors and ancestral sampling.

A mean predictor supplies mu(x_t, t[, condition]) — the mean of the
learned reverse transition — bound to one noise schedule.  Besides the
trainable network (see epsnet), a closed-form Gaussian predictor is
provided as a verification oracle: when the clean-image distribution is
an i.i.d. Gaussian around a known mean image, the exact reverse mean is
available analytically.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .forward import noise_draw, posterior_mean_tilde
from .schedule import NoiseSchedule

__all__ = [
    "MeanPredictor",
    "AnalyticGaussianPrior",
    "mu_from_eps",
    "ancestral_sample",
]


class MeanPredictor(ABC):
    """Contract for the reverse-process mean mu(x_t, t[, condition]).

    Implementations are deterministic in their inputs and bound to one
    NoiseSchedule; output shape always equals input shape.
    """

    schedule: NoiseSchedule

    @property
    @abstractmethod
    def conditional(self) -> bool:
        ...

    @abstractmethod
    def predict_mu(self, x_t: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        ...

    def predict_mu_batch(self, xs: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        """Reverse mean for a stack of states (N, H, W) at one timestep.

        Default applies predict_mu per state; implementations may batch.
        """
        return np.stack([self.predict_mu(x, t, condition) for x in xs])

    def _check_condition(self, condition: np.ndarray | None) -> None:
        if self.conditional and condition is None:
            raise ValueError("conditional predictor requires a condition image")


def mu_from_eps(x_t: np.ndarray, t: int, eps_hat: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Reverse mean from a predicted noise field:
    mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(1 - beta_t)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {eps_hat.shape}")
    beta = s.beta(t)
    abar = s.alpha_bar(t)
    return (x_t - beta / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(1.0 - beta)


class AnalyticGaussianPrior(MeanPredictor):
    """Exact reverse mean for an i.i.d. Gaussian clean-image distribution
    N(mean_image, prior_std^2) per pixel.

    E[x0 | x_t] is the conjugate-Gaussian posterior mean; the reverse mean
    follows by plugging it into the forward posterior.
    """

    def __init__(self, schedule: NoiseSchedule, mean_image: np.ndarray, prior_std: float):
        if prior_std <= 0:
            raise ValueError("prior_std must be positive")
        self.schedule = schedule
        self.mean_image = np.asarray(mean_image, dtype=np.float64)
        self.prior_std = float(prior_std)

    @property
    def conditional(self) -> bool:
        return False

    def posterior_x0(self, x_t: np.ndarray, t: int) -> np.ndarray:
        """E[x0 | x_t] under the Gaussian prior."""
        abar = self.schedule.alpha_bar(t)
        s2 = self.prior_std**2
        num = np.sqrt(abar) * s2 * x_t + (1.0 - abar) * self.mean_image
        return num / (abar * s2 + 1.0 - abar)

    def predict_mu(self, x_t: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.shape != self.mean_image.shape:
            raise ValueError(f"shape mismatch: {x_t.shape} vs {self.mean_image.shape}")
        return posterior_mean_tilde(x_t, self.posterior_x0(x_t, t), t, self.schedule)


def ancestral_sample(
    pred: MeanPredictor,
    s: NoiseSchedule,
    shape: tuple[int, int],
    condition: np.ndarray | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Generate one image by running the full reverse chain from pure noise.

    x_T is standard normal; each step adds sigma_t * z except the final
    deterministic step at t = 1.
    """
    pred._check_condition(condition)
    x = noise_draw(seed, s.T + 1, shape)
    for t in range(s.T, 0, -1):
        mu = pred.predict_mu(x, t, condition)
        sig = s.sigma(t)
        if t > 1:
            x = mu + sig * noise_draw(seed, t, shape)
        else:
            x = mu
    return x
