"""On-disk formats: image datasets, viewable PNGs, and lossless sidecars.

Datasets are a single binary file: versioned header (magic, count,
width, height) followed by contiguous little-endian float32 pixels.
Individual results are written twice: a 16-bit grayscale PNG for
inspection and a raw float32 sidecar for exact re-evaluation.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "write_dataset",
    "read_dataset",
    "write_image",
    "read_raw",
]

_DATASET_MAGIC = b"DDDS"
_RAW_MAGIC = b"DDRW"
_VERSION = 1


def write_dataset(path: str, images: list[np.ndarray]) -> None:
    if not images:
        raise ValueError("refusing to write an empty dataset")
    h, w = images[0].shape
    if any(img.shape != (h, w) for img in images):
        raise ValueError("all dataset images must share one shape")
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(struct.pack("<IIII", _VERSION, len(images), w, h))
        for img in images:
            fh.write(np.asarray(img, dtype="<f4").tobytes())


def read_dataset(path: str) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset file")
        version, count, w, h = struct.unpack("<IIII", fh.read(16))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported dataset version {version}")
        out = []
        for _ in range(count):
            data = np.frombuffer(fh.read(4 * w * h), dtype="<f4")
            out.append(data.reshape(h, w).astype(np.float64))
        return out


def write_image(path_base: str, img: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> None:
    """Write `<base>.png` (16-bit grayscale, clamped to [lo, hi]) and
    `<base>.raw` (lossless float32)."""
    img = np.asarray(img, dtype=np.float64)
    scaled = np.clip((img - lo) / (hi - lo), 0.0, 1.0)
    q = np.round(scaled * 65535.0).astype(np.uint32).astype(np.uint16)
    PILImage.fromarray(q).save(path_base + ".png")  # uint16 -> 16-bit grayscale
    h, w = img.shape
    with open(path_base + ".raw", "wb") as fh:
        fh.write(_RAW_MAGIC)
        fh.write(struct.pack("<III", _VERSION, w, h))
        fh.write(img.astype("<f4").tobytes())


def read_raw(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _RAW_MAGIC:
            raise ValueError(f"{path}: not a raw image sidecar")
        version, w, h = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported sidecar version {version}")
        return np.frombuffer(fh.read(4 * w * h), dtype="<f4").reshape(h, w).astype(np.float64)
