"""Forward-process sampling and the coupled noisy-observation chain.

Images are plain 2-D float64 numpy arrays with values treated as
intensities.  Noise draws are counter-based: each (seed, timestep) pair
maps to an independent, reproducible standard-normal field, so clean and
noisy chains can share the exact same epsilon at every step.
"""

from __future__ import annotations

import numpy as np

from .schedule import NoiseSchedule

__all__ = [
    "noise_draw",
    "sample_forward",
    "coupled_noisy",
    "posterior_mean_tilde",
]


def noise_draw(seed: int, t: int, shape: tuple[int, ...]) -> np.ndarray:
    """Standard-normal field keyed by (seed, timestep); same key, same field."""
    rng = np.random.default_rng([int(seed), int(t)])
    return rng.standard_normal(shape)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def sample_forward(x0: np.ndarray, t: int, eps: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Noisy state at timestep t: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_shapes(x0, eps)
    abar = s.alpha_bar(t)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def coupled_noisy(y0: np.ndarray, t: int, eps: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Observation chain at timestep t, built with the *same* eps as the clean
    chain so that y_t - x_t = sqrt(abar_t) * (y0 - x0) holds exactly."""
    return sample_forward(y0, t, eps, s)


def posterior_mean_tilde(x_t: np.ndarray, x0: np.ndarray, t: int, s: NoiseSchedule) -> np.ndarray:
    """Mean of the forward posterior q(x_{t-1} | x_t, x0)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    _check_shapes(x_t, x0)
    coef_x0, coef_xt, _ = s.posterior_coefficients(t)
    return coef_x0 * x0 + coef_xt * x_t
