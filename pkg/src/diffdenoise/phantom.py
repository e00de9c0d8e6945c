"""Synthetic test data: anti-aliased ellipse phantoms and noise models.

Phantoms are piecewise-smooth images with sharp edges, standing in for
tomographic anatomy while allowing analytic checks (ellipse areas are
known in closed form).  Corruption is additive; the variable-level model
draws one noise level per image to emulate inputs of varying quality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhantomSpec",
    "NoiseModel",
    "generate_phantoms",
    "corrupt",
]

_SUBGRID = 4  # anti-aliasing subsamples per pixel edge


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for a family of random ellipse phantoms."""

    width: int = 64
    height: int = 64
    n_ellipses: tuple[int, int] = (3, 6)
    intensity: tuple[float, float] = (0.15, 0.45)
    background: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("phantom dimensions must be positive")
        if self.n_ellipses[0] < 1 or self.n_ellipses[1] < self.n_ellipses[0]:
            raise ValueError("need at least one ellipse and a valid count range")
        lo, hi = self.intensity
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError("ellipse intensities must lie in [0, 1]")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background must lie in [0, 1]")


def ellipse_coverage(width: int, height: int, cx: float, cy: float,
                     ax: float, ay: float, angle: float) -> np.ndarray:
    """Per-pixel coverage fraction of an ellipse, anti-aliased by subpixel
    sampling.  Coordinates are in pixel units, pixel centers at i + 0.5."""
    sub = (np.arange(_SUBGRID) + 0.5) / _SUBGRID
    xs = np.add.outer(np.arange(width), sub).ravel()  # (W*SUB,)
    ys = np.add.outer(np.arange(height), sub).ravel()
    dx = xs[None, :] - cx  # (1, W*SUB)
    dy = ys[:, None] - cy  # (H*SUB, 1)
    ca, sa = np.cos(angle), np.sin(angle)
    u = (dx * ca + dy * sa) / ax
    v = (-dx * sa + dy * ca) / ay
    inside = (u * u + v * v) <= 1.0
    return inside.reshape(height, _SUBGRID, width, _SUBGRID).mean(axis=(1, 3))


def _one_phantom(spec: PhantomSpec, rng: np.random.Generator) -> np.ndarray:
    img = np.full((spec.height, spec.width), spec.background, dtype=np.float64)
    count = int(rng.integers(spec.n_ellipses[0], spec.n_ellipses[1] + 1))
    w, h = spec.width, spec.height
    for _ in range(count):
        cx = rng.uniform(0.2 * w, 0.8 * w)
        cy = rng.uniform(0.2 * h, 0.8 * h)
        ax = rng.uniform(0.08 * w, 0.3 * w)
        ay = rng.uniform(0.08 * h, 0.3 * h)
        angle = rng.uniform(0.0, np.pi)
        amp = rng.uniform(*spec.intensity) * rng.choice([-1.0, 1.0])
        img += amp * ellipse_coverage(w, h, cx, cy, ax, ay, angle)
    return np.clip(img, 0.0, 1.0)


def generate_phantoms(spec: PhantomSpec, count: int) -> list[np.ndarray]:
    """`count` phantoms, deterministic per (spec.seed, image index)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [
        _one_phantom(spec, np.random.default_rng([spec.seed, i]))
        for i in range(count)
    ]


@dataclass(frozen=True)
class NoiseModel:
    """Additive corruption model.

    kind: "gaussian" (fixed sigma), "variable_gaussian" (one sigma per
    image, uniform in [sigma_min, sigma_max]) or "signal_dependent"
    (per-pixel sigma = base + gain * intensity).
    """

    kind: str = "gaussian"
    sigma: float = 0.1
    sigma_min: float = 0.05
    sigma_max: float = 0.15
    base: float = 0.05
    gain: float = 0.1

    def __post_init__(self):
        if self.kind not in ("gaussian", "variable_gaussian", "signal_dependent"):
            raise ValueError(f"unknown noise model {self.kind!r}")
        if min(self.sigma, self.sigma_min, self.sigma_max, self.base) <= 0:
            raise ValueError("noise scales must be positive")
        if self.sigma_max < self.sigma_min:
            raise ValueError("sigma_max must be >= sigma_min")


def corrupt(x0: np.ndarray, nm: NoiseModel, seed: int) -> np.ndarray:
    """x0 plus model noise; same seed, same noise field."""
    x0 = np.asarray(x0, dtype=np.float64)
    rng = np.random.default_rng([seed])
    if nm.kind == "gaussian":
        sigma: float | np.ndarray = nm.sigma
    elif nm.kind == "variable_gaussian":
        sigma = rng.uniform(nm.sigma_min, nm.sigma_max)
    else:
        sigma = nm.base + nm.gain * np.clip(x0, 0.0, None)
    return x0 + sigma * rng.standard_normal(x0.shape)
