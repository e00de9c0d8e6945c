"""Resolution changes between cascade stages.

Downsampling is a k-by-k block mean; upsampling is separable bicubic
interpolation with the Catmull-Rom kernel (a = -0.5) and edge-clamped
sample coordinates.
"""

from __future__ import annotations

import numpy as np

__all__ = ["downsample", "upsample_bicubic"]


def downsample(img: np.ndarray, k: int) -> np.ndarray:
    """k-by-k block-mean reduction; dimensions must be divisible by k."""
    img = np.asarray(img, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return img.copy()
    h, w = img.shape
    if h % k or w % k:
        raise ValueError(f"image shape {img.shape} not divisible by k={k}")
    return img.reshape(h // k, k, w // k, k).mean(axis=(1, 3))


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom: a = -0.5
    a = -0.5
    ax = np.abs(x)
    ax2 = ax * ax
    ax3 = ax2 * ax
    out = np.zeros_like(ax)
    near = ax <= 1.0
    far = (ax > 1.0) & (ax < 2.0)
    out[near] = (a + 2.0) * ax3[near] - (a + 3.0) * ax2[near] + 1.0
    out[far] = a * ax3[far] - 5.0 * a * ax2[far] + 8.0 * a * ax[far] - 4.0 * a
    return out


def _axis_weights(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray]:
    # Pixel-center alignment: src = (dst + 0.5) * n_src / n_dst - 0.5
    dst = np.arange(n_dst, dtype=np.float64)
    src = (dst + 0.5) * (n_src / n_dst) - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    offsets = np.array([-1, 0, 1, 2], dtype=np.int64)
    idx = base[:, None] + offsets[None, :]
    w = _cubic_kernel(frac[:, None] - offsets[None, :].astype(np.float64))
    idx = np.clip(idx, 0, n_src - 1)  # edge clamp
    return idx, w


def upsample_bicubic(img: np.ndarray, k: int) -> np.ndarray:
    """Bicubic interpolation to k-times dimensions."""
    img = np.asarray(img, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return img.copy()
    h, w = img.shape
    ridx, rw = _axis_weights(h, h * k)
    cidx, cw = _axis_weights(w, w * k)
    rows = np.einsum("im,imj->ij", rw, img[ridx, :])  # (H*k, W)
    return np.einsum("jm,ijm->ij", cw, rows[:, cidx])  # (H*k, W*k)
