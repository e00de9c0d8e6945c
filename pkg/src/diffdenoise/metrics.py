"""Image quality metrics over a configurable intensity window.

Both metrics clamp inputs to the window before comparing, mirroring
windowed evaluation of radiological images.  The structural similarity
uses the canonical 11x11 Gaussian weighting (sigma 1.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricWindow", "psnr", "ssim", "mse"]


@dataclass(frozen=True)
class MetricWindow:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("window needs hi > lo")

    @property
    def range(self) -> float:
        return self.hi - self.lo

    def clamp(self, img: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(img, dtype=np.float64), self.lo, self.hi)


def _check(x: np.ndarray, ref: np.ndarray) -> None:
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")


def mse(x: np.ndarray, ref: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check(x, ref)
    return float(np.mean((x - ref) ** 2))


def psnr(x: np.ndarray, ref: np.ndarray, w: MetricWindow = MetricWindow()) -> float:
    """Peak signal-to-noise ratio in dB after clamping to the window;
    +inf for identical clamped images."""
    a = w.clamp(x)
    b = w.clamp(ref)
    _check(a, b)
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(w.range**2 / err)


_WIN = 11
_SIGMA = 1.5


def _gaussian_kernel() -> np.ndarray:
    r = _WIN // 2
    d = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(d**2) / (2.0 * _SIGMA**2))
    return g / g.sum()


def _filter(img: np.ndarray) -> np.ndarray:
    # separable Gaussian with symmetric (reflecting) boundary
    g = _gaussian_kernel()
    r = _WIN // 2
    padded = np.pad(img, r, mode="symmetric")
    rows = np.apply_along_axis(lambda m: np.convolve(m, g, mode="valid"), 1, padded)
    return np.apply_along_axis(lambda m: np.convolve(m, g, mode="valid"), 0, rows)


def ssim(x: np.ndarray, ref: np.ndarray, w: MetricWindow = MetricWindow()) -> float:
    """Mean local structural similarity with Gaussian weights; the border
    where the window does not fully fit is excluded from the mean."""
    a = w.clamp(x)
    b = w.clamp(ref)
    _check(a, b)
    if min(a.shape) < _WIN:
        raise ValueError(f"image smaller than the {_WIN}x{_WIN} ssim window")
    L = w.range
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    mu_a = _filter(a)
    mu_b = _filter(b)
    var_a = _filter(a * a) - mu_a**2
    var_b = _filter(b * b) - mu_b**2
    cov = _filter(a * b) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    r = _WIN // 2
    return float(s[r:-r, r:-r].mean())
