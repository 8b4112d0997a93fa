"""Score network backbone for univariate time-series windows.

The network maps a perturbed window and a diffusion step index to a
noise prediction of the same shape; the score estimate is the noise
prediction divided by -std(t) (kernel-variance weighting makes the DSM
objective exactly noise prediction, which keeps targets O(1) at every
noise level).

Pipeline: width-1 input convolution to C channels, additive injection of
three embeddings (diffusion step, absolute time, learnable position), one
self-attention encoder layer over the temporal axis, a stack of gated
residual blocks with skip aggregation, and a two-stage width-1 output
projection whose final layer is zero-initialized so the initial score
field is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from .container import read_array_container, write_array_container
from .errors import DataError

__all__ = [
    "ScoreNetConfig",
    "ScoreNet",
    "diffusion_step_embedding",
    "init_scorenet",
    "time_to_step",
    "save_scorenet",
    "load_scorenet",
]


@dataclass(frozen=True)
class ScoreNetConfig:
    length: int
    channels: int = 128
    diff_embed_dim: int = 256
    feat_embed_dim: int = 64
    time_embed_dim: int = 128
    n_res_blocks: int = 4
    n_heads: int = 8

    def __post_init__(self):
        for name in (
            "length",
            "channels",
            "diff_embed_dim",
            "feat_embed_dim",
            "time_embed_dim",
            "n_res_blocks",
            "n_heads",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.channels % self.n_heads:
            raise ValueError(
                f"channels ({self.channels}) must be divisible by "
                f"n_heads ({self.n_heads})"
            )
        if self.diff_embed_dim % 2:
            raise ValueError("diff_embed_dim must be even")


def diffusion_step_embedding(steps: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal table for integer diffusion steps.

    angle_j = step * 10^(-4 j / (dim/2 - 1)) for j in [0, dim/2); output is
    [sin(angles), cos(angles)] per step, shape (batch, dim).
    """
    if dim % 2:
        raise ValueError("embedding dimension must be even")
    half = dim // 2
    steps = steps.float().unsqueeze(-1)
    exponents = torch.arange(half, dtype=torch.float32, device=steps.device)
    denom = max(half - 1, 1)
    freqs = torch.pow(10.0, -4.0 * exponents / denom)
    angles = steps * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


def time_to_step(t, n_steps: int, horizon: float = 1.0):
    """Map continuous time in [0, horizon] to the nearest of n_steps indices."""
    idx = np.rint(np.asarray(t, dtype=float) / horizon * (n_steps - 1))
    return np.clip(idx, 0, n_steps - 1).astype(np.int64)


def _sinusoid_table(length: int, dim: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(pos * div)
    table[:, 1::2] = torch.cos(pos * div)
    return table


class GatedResidualBlock(nn.Module):
    """Convolution -> tanh (x) sigmoid gate -> residual + skip outputs.

    The diffusion-step embedding is re-injected additively before the
    convolution, so every block stays conditioned on the noise level.
    """

    def __init__(self, channels: int, diff_embed_dim: int):
        super().__init__()
        self.step_proj = nn.Linear(diff_embed_dim, channels)
        self.conv = nn.Conv1d(channels, 2 * channels, kernel_size=3, padding=1)
        self.out_proj = nn.Conv1d(channels, 2 * channels, kernel_size=1)

    def forward(self, x, step_emb):
        h = x + self.step_proj(step_emb).unsqueeze(-1)
        h = self.conv(h)
        gate, filt = torch.chunk(h, 2, dim=1)
        h = torch.tanh(gate) * torch.sigmoid(filt)
        h = self.out_proj(h)
        residual, skip = torch.chunk(h, 2, dim=1)
        return (x + residual) / math.sqrt(2.0), skip


class ScoreNet(nn.Module):
    def __init__(self, config: ScoreNetConfig):
        super().__init__()
        self.config = config
        c, d = config.channels, config.diff_embed_dim

        self.input_proj = nn.Conv1d(1, c, kernel_size=1)

        self.diff_mlp = nn.Sequential(
            nn.Linear(d, d), nn.SiLU(), nn.Linear(d, d), nn.SiLU()
        )
        self.diff_to_channels = nn.Linear(d, c)

        self.register_buffer(
            "time_table",
            _sinusoid_table(config.length, config.time_embed_dim),
            persistent=False,
        )
        self.time_vector = nn.Parameter(torch.empty(config.time_embed_dim))
        self.time_proj = nn.Linear(config.time_embed_dim, c)

        self.pos_table = nn.Parameter(torch.empty(config.length, config.feat_embed_dim))
        self.feat_bias = nn.Parameter(torch.empty(config.feat_embed_dim))
        self.pos_proj = nn.Linear(config.feat_embed_dim, c)

        self.encoder = nn.TransformerEncoderLayer(
            d_model=c,
            nhead=config.n_heads,
            dim_feedforward=4 * c,
            dropout=0.0,
            activation="gelu",
            batch_first=True,
        )

        self.blocks = nn.ModuleList(
            GatedResidualBlock(c, d) for _ in range(config.n_res_blocks)
        )

        self.out_proj1 = nn.Conv1d(c, c, kernel_size=1)
        self.out_proj2 = nn.Conv1d(c, 1, kernel_size=1)

        bound_feat = 1.0 / math.sqrt(config.feat_embed_dim)
        nn.init.uniform_(self.pos_table, -bound_feat, bound_feat)
        nn.init.uniform_(self.feat_bias, -bound_feat, bound_feat)
        bound_time = 1.0 / math.sqrt(config.time_embed_dim)
        nn.init.uniform_(self.time_vector, -bound_time, bound_time)
        nn.init.zeros_(self.out_proj2.weight)
        nn.init.zeros_(self.out_proj2.bias)

    def forward(self, x: torch.Tensor, step: torch.Tensor) -> torch.Tensor:
        if x.dim() != 3 or x.shape[1] != 1 or x.shape[2] != self.config.length:
            raise ValueError(
                f"expected input of shape (batch, 1, {self.config.length}), "
                f"got {tuple(x.shape)}"
            )
        if step.dim() != 1 or step.shape[0] != x.shape[0]:
            raise ValueError("step must be a vector with one entry per batch item")
        if not torch.isfinite(x).all():
            raise ValueError("non-finite values in network input")
        if (step < 0).any():
            raise ValueError("diffusion step indices must be nonnegative")

        step_emb = diffusion_step_embedding(step, self.config.diff_embed_dim)
        step_emb = self.diff_mlp(step_emb.to(x.dtype))

        h = self.input_proj(x)
        h = h + self.diff_to_channels(step_emb).unsqueeze(-1)
        time_emb = self.time_proj(self.time_table + self.time_vector)
        h = h + time_emb.t().unsqueeze(0)
        pos_emb = self.pos_proj(self.pos_table + self.feat_bias)
        h = h + pos_emb.t().unsqueeze(0)

        h = self.encoder(h.transpose(1, 2)).transpose(1, 2)

        skips = torch.zeros_like(h)
        for block in self.blocks:
            h, skip = block(h, step_emb)
            skips = skips + skip
        h = skips / math.sqrt(len(self.blocks))

        h = torch.relu(self.out_proj1(h))
        return self.out_proj2(h)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def init_scorenet(config: ScoreNetConfig, seed: int) -> ScoreNet:
    """Construct a network with parameters deterministically derived from seed."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        net = ScoreNet(config)
    return net


_CHECKPOINT_KIND = "gbmdiff.scorenet"


def save_scorenet(net: ScoreNet, path):
    header = {"kind": _CHECKPOINT_KIND, "config": asdict(net.config)}
    arrays = {
        name: tensor.detach().cpu().numpy() for name, tensor in net.state_dict().items()
    }
    write_array_container(path, header, arrays)


def load_scorenet(path) -> ScoreNet:
    header, arrays = read_array_container(path)
    if header.get("kind") != _CHECKPOINT_KIND:
        raise DataError(f"{path}: not a score-network checkpoint")
    config = ScoreNetConfig(**header["config"])
    net = ScoreNet(config)
    state = {name: torch.from_numpy(arr.copy()) for name, arr in arrays.items()}
    net.load_state_dict(state, strict=True)
    return net
