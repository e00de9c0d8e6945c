"""Trainable noise-prediction network and its mean-predictor wrapper.

A small convolutional net predicts the injected noise eps from (x_t, t);
the reverse mean is recovered analytically (see prior.mu_from_eps).  The
conditional variant takes a low-resolution guide image, bicubic-upsampled
and concatenated channel-wise at the input.
"""

from __future__ import annotations

import math
import struct

import numpy as np
import torch
from torch import nn

from .prior import MeanPredictor, mu_from_eps
from .resize import upsample_bicubic
from .schedule import NoiseSchedule

__all__ = [
    "EpsPredictorNet",
    "EpsMeanPredictor",
    "train_eps_predictor",
    "save_checkpoint",
    "load_checkpoint",
]

_MAGIC = b"DDEP"
_VERSION = 1


def _timestep_embedding(t: torch.Tensor, dim: int,
                        dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape (batch, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=dtype) / half)
    args = t.to(dtype)[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class EpsPredictorNet(nn.Module):
    """Small dilated CNN with a per-layer additive timestep embedding."""

    def __init__(self, conditional: bool = False, base_channels: int = 48,
                 n_hidden: int = 3, emb_dim: int = 32):
        super().__init__()
        if not 1 <= n_hidden <= 3:
            raise ValueError("n_hidden must be in [1, 3]")
        if base_channels > 64:
            raise ValueError("base_channels must be <= 64")
        self.conditional = conditional
        self.base_channels = base_channels
        self.n_hidden = n_hidden
        self.emb_dim = emb_dim
        in_ch = 2 if conditional else 1
        c = base_channels
        self.embed = nn.Sequential(
            nn.Linear(emb_dim, emb_dim), nn.SiLU(), nn.Linear(emb_dim, emb_dim)
        )
        self.conv_in = nn.Conv2d(in_ch, c, 3, padding=1)
        self.hidden = nn.ModuleList(
            nn.Conv2d(c, c, 3, padding=2, dilation=2) for _ in range(n_hidden)
        )
        self.time_proj = nn.ModuleList(
            nn.Linear(emb_dim, c) for _ in range(n_hidden + 1)
        )
        self.conv_out = nn.Conv2d(c, 1, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        emb = self.embed(_timestep_embedding(t, self.emb_dim, x.dtype))
        h = self.act(self.conv_in(x) + self.time_proj[0](emb)[:, :, None, None])
        for conv, proj in zip(self.hidden, self.time_proj[1:]):
            h = self.act(conv(h) + proj(emb)[:, :, None, None])
        return self.conv_out(h)


class EpsMeanPredictor(MeanPredictor):
    """MeanPredictor backed by a trained EpsPredictorNet."""

    def __init__(self, net: EpsPredictorNet, schedule: NoiseSchedule):
        self.net = net.eval()
        self.schedule = schedule

    @property
    def conditional(self) -> bool:
        return self.net.conditional

    def _full_res_condition(self, condition: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
        cond = np.asarray(condition, dtype=np.float64)
        if cond.shape == shape:
            return cond
        k = shape[0] // cond.shape[0]
        if k < 1 or cond.shape[0] * k != shape[0] or cond.shape[1] * k != shape[1]:
            raise ValueError(f"condition shape {cond.shape} incompatible with input {shape}")
        return upsample_bicubic(cond, k)

    def predict_mu(self, x_t: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        return self.predict_mu_batch(np.asarray(x_t)[None], t, condition)[0]

    def predict_mu_batch(self, xs: np.ndarray, t: int, condition: np.ndarray | None = None) -> np.ndarray:
        self._check_condition(condition)
        xs = np.asarray(xs, dtype=np.float64)
        batch = torch.from_numpy(xs[:, None].astype(np.float32))
        if self.conditional:
            cond = self._full_res_condition(condition, xs.shape[1:])
            cond_t = torch.from_numpy(cond[None, None].astype(np.float32))
            batch = torch.cat([batch, cond_t.expand(xs.shape[0], -1, -1, -1)], dim=1)
        tt = torch.full((xs.shape[0],), t, dtype=torch.long)
        with torch.no_grad():
            eps_hat = self.net(batch, tt)[:, 0].numpy().astype(np.float64)
        out = np.empty_like(xs)
        for i in range(xs.shape[0]):
            out[i] = mu_from_eps(xs[i], t, eps_hat[i], self.schedule)
        return out


def diffusion_loss(net: EpsPredictorNet, x0: torch.Tensor, t: torch.Tensor,
                   eps: torch.Tensor, alpha_bars: torch.Tensor,
                   cond: torch.Tensor | None = None) -> torch.Tensor:
    """Mean-squared noise-matching loss on a batch.

    x0: (B, 1, H, W); t: (B,) integer timesteps; eps: like x0;
    cond: (B, 1, H, W) already at full resolution, or None.
    """
    abar = alpha_bars[t].to(x0.dtype)[:, None, None, None]
    x_t = torch.sqrt(abar) * x0 + torch.sqrt(1.0 - abar) * eps
    inp = x_t if cond is None else torch.cat([x_t, cond], dim=1)
    eps_hat = net(inp, t)
    return ((eps_hat - eps) ** 2).mean()


def train_eps_predictor(
    net: EpsPredictorNet,
    dataset: list[np.ndarray],
    s: NoiseSchedule,
    steps: int,
    lr: float = 2e-3,
    seed: int = 0,
    batch_size: int = 16,
    cond_images: list[np.ndarray] | None = None,
    loss_csv: str | None = None,
) -> EpsPredictorNet:
    """Run `steps` Adam updates of the noise-matching objective.

    Timesteps are drawn uniformly in [1, T].  For a conditional net,
    cond_images must align with dataset (one guide per image); guides are
    upsampled once to the training resolution.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if net.conditional and cond_images is None:
        raise ValueError("conditional net requires cond_images")
    if steps == 0:
        return net
    images = torch.from_numpy(np.stack(dataset).astype(np.float32))[:, None]
    conds = None
    if net.conditional:
        ups = []
        for c, x in zip(cond_images, dataset):
            k = x.shape[0] // c.shape[0]
            ups.append(upsample_bicubic(c, k) if k > 1 else c)
        conds = torch.from_numpy(np.stack(ups).astype(np.float32))[:, None]
    alpha_bars = torch.from_numpy(s.alpha_bars.copy())
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    net.train()
    rows = []
    for step in range(steps):
        idx = torch.randint(0, images.shape[0], (batch_size,), generator=gen)
        t = torch.randint(1, s.T + 1, (batch_size,), generator=gen)
        eps = torch.randn(batch_size, 1, *images.shape[2:], generator=gen)
        loss = diffusion_loss(net, images[idx], t, eps, alpha_bars,
                              None if conds is None else conds[idx])
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"non-finite training loss at step {step}: {loss.item()!r}"
            )
        opt.zero_grad()
        loss.backward()
        opt.step()
        rows.append((step, float(loss.item())))
    net.eval()
    if loss_csv is not None:
        with open(loss_csv, "w") as fh:
            fh.write("# diffdenoise training log v1\n")
            fh.write("step,loss\n")
            for step, value in rows:
                fh.write(f"{step},{value:.8g}\n")
    return net


def save_checkpoint(net: EpsPredictorNet, path: str) -> None:
    """Write net parameters: versioned header with layer shapes, then flat
    little-endian float32 data."""
    state = net.state_dict()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IBIII", _VERSION, int(net.conditional),
                             net.base_channels, net.n_hidden, net.emb_dim))
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        for tensor in state.values():
            fh.write(tensor.numpy().astype("<f4").tobytes())


def load_checkpoint(path: str, conditional: bool | None = None) -> EpsPredictorNet:
    """Rebuild a net from a checkpoint.

    Passing `conditional` asserts the expected variant; a mismatch is an
    error rather than a silently misshaped model.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a diffdenoise checkpoint")
        version, cond_flag, base_channels, n_hidden, emb_dim = struct.unpack(
            "<IBIII", fh.read(17)
        )
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        is_cond = bool(cond_flag)
        if conditional is not None and conditional != is_cond:
            kind = "conditional" if is_cond else "unconditional"
            raise ValueError(f"{path}: checkpoint is {kind}, expected otherwise")
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            shapes.append((name, dims))
        state = {}
        for name, dims in shapes:
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(dims)
            state[name] = torch.from_numpy(data.copy())
    net = EpsPredictorNet(conditional=is_cond, base_channels=base_channels,
                          n_hidden=n_hidden, emb_dim=emb_dim)
    net.load_state_dict(state)
    net.eval()
    return net
