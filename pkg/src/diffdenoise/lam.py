"""Likelihood/prior trade-off scheduling and adaptive refinement.

The solver weights the prior term at timestep t by a base value scaled
with sqrt(alpha_bar_t).  The base is either a constant, a scalar derived
from the estimated noise level of a coarse pass (adaptive-scalar), a
per-pixel map proportional to the estimated noise (adaptive-map), or the
combination of both.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .schedule import NoiseSchedule

__all__ = [
    "LambdaPolicy",
    "lambda_at",
    "estimate_noise",
    "adaptive_scalar",
    "adaptive_map",
    "refine",
    "VARIANTS",
]

VARIANTS = ("constant", "adaptive_scalar", "adaptive_map", "combined")


@dataclass(frozen=True)
class LambdaPolicy:
    """Trade-off policy.

    lambda0 is the provisional constant base used for the coarse pass in
    every variant; a, b parameterize the adaptive scalar (a * std + b),
    c the adaptive per-pixel map (c * noise estimate).  After refine() the
    resolved base (scalar or map) is stored in `base`.
    """

    variant: str = "constant"
    lambda0: float = 0.01
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    base: float | np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown lambda variant {self.variant!r}")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be non-negative")
        if self.variant in ("adaptive_map", "combined") and self.c < 0:
            raise ValueError("c must be non-negative")

    @property
    def resolved(self) -> bool:
        return self.base is not None

    def resolved_base(self) -> float | np.ndarray:
        """Base to feed the solver; provisional constant until refined."""
        return self.base if self.base is not None else self.lambda0


def lambda_at(policy_base: float | np.ndarray, t: int, s: NoiseSchedule) -> float | np.ndarray:
    """Base scaled by sqrt(alpha_bar_t); elementwise for map bases."""
    if np.any(np.asarray(policy_base) < 0):
        raise ValueError("lambda base must be non-negative")
    return policy_base * np.sqrt(s.alpha_bar(t))


def estimate_noise(y0: np.ndarray, x0_hat: np.ndarray) -> np.ndarray:
    """Noise estimate from a coarse denoising result: |y0 - x0_hat|."""
    y0 = np.asarray(y0, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    if y0.shape != x0_hat.shape:
        raise ValueError(f"shape mismatch: {y0.shape} vs {x0_hat.shape}")
    return np.abs(y0 - x0_hat)


def adaptive_scalar(n_hat: np.ndarray, a: float, b: float) -> float:
    """a * std(n_hat) + b, clamped below at 0 (population std over pixels)."""
    n_hat = np.asarray(n_hat, dtype=np.float64)
    if n_hat.size == 0:
        raise ValueError("empty noise estimate")
    return max(a * float(n_hat.std()) + b, 0.0)


def adaptive_map(n_hat: np.ndarray, c: float) -> np.ndarray:
    """Per-pixel base c * n_hat; consumed elementwise by the solver."""
    if c < 0:
        raise ValueError("c must be non-negative")
    return c * np.asarray(n_hat, dtype=np.float64)


def refine(policy: LambdaPolicy, y0: np.ndarray, x0_hat_coarse: np.ndarray) -> LambdaPolicy:
    """Resolve a policy's base from the coarse pass.

    constant: identity.  adaptive_scalar / adaptive_map: per their formulas.
    combined: the scalar sets the global level and the map its spatial
    distribution (map normalized to unit mean, then scaled).
    """
    if policy.variant == "constant":
        return replace(policy, base=policy.lambda0)
    n_hat = estimate_noise(y0, x0_hat_coarse)
    if policy.variant == "adaptive_scalar":
        return replace(policy, base=adaptive_scalar(n_hat, policy.a, policy.b))
    if policy.variant == "adaptive_map":
        return replace(policy, base=adaptive_map(n_hat, policy.c))
    scalar = adaptive_scalar(n_hat, policy.a, policy.b)
    m = adaptive_map(n_hat, policy.c)
    mean = float(m.mean())
    base = scalar * m / mean if mean > 0 else scalar
    return replace(policy, base=base)
