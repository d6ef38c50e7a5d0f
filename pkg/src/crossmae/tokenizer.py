"""Patch tokenization, per-modality linear projections and positional tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, InputError
from .masking import MODALITIES, MaskPlan


@dataclass(frozen=True)
class PatchGrid:
    image_size: int = 224
    patch_size: int = 16
    channels: int = 3

    def __post_init__(self) -> None:
        if self.patch_size < 1 or self.image_size % self.patch_size:
            raise ConfigError(f"patch size {self.patch_size} must divide image size {self.image_size}")

    @property
    def side(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.side**2

    @property
    def patch_dim(self) -> int:
        return self.patch_size**2 * self.channels


def patchify(images, patch_size: int = 16):
    """``(..., H, W, C) -> (..., P, p*p*C)``; rows in raster order, pixels flattened (y, x, c).

    Works on numpy arrays and torch tensors alike.
    """
    if images.ndim < 3:
        raise InputError(f"expected (..., H, W, C) input, got shape {tuple(images.shape)}")
    *lead, h, w, c = images.shape
    p = patch_size
    if h != w or h % p:
        raise InputError(f"image {h}x{w} is not square or not divisible by patch size {p}")
    g = h // p
    x = images.reshape(*lead, g, p, g, p, c).swapaxes(-4, -3)
    return x.reshape(*lead, g * g, p * p * c)


def unpatchify(patches, patch_size: int = 16, channels: int = 3):
    """Inverse of :func:`patchify`."""
    *lead, n, d = patches.shape
    p = patch_size
    g = int(round(n**0.5))
    if g * g != n or d != p * p * channels:
        raise InputError(f"cannot unpatchify {n} patches of dim {d} with patch size {p}")
    x = patches.reshape(*lead, g, g, p, p, channels).swapaxes(-4, -3)
    return x.reshape(*lead, g * p, g * p, channels)


def _sincos_1d(dim: int, pos: np.ndarray) -> np.ndarray:
    omega = 1.0 / 10000 ** (np.arange(dim // 2, dtype=np.float64) / (dim / 2.0))
    out = np.einsum("m,d->md", pos.reshape(-1).astype(np.float64), omega)
    return np.concatenate([np.sin(out), np.cos(out)], axis=1)


def sincos_pos_embed_2d(dim: int, grid_side: int) -> np.ndarray:
    """Fixed 2-D sine-cosine table, shape ``(grid_side**2, dim)``; half the channels per axis."""
    if dim % 4:
        raise ConfigError(f"positional embedding width {dim} must be divisible by 4")
    ys, xs = np.meshgrid(np.arange(grid_side), np.arange(grid_side), indexing="ij")
    return np.concatenate([_sincos_1d(dim // 2, ys), _sincos_1d(dim // 2, xs)], axis=1)


class ModalityEmbedding(nn.Module):
    """Per-modality ``patches @ W_m + b_m + pos_m``.

    Parameters live under ``proj.<modality>``; positional tables are
    fixed buffers named ``pos_<modality>``.
    """

    def __init__(self, grid: PatchGrid, dim: int, modalities=MODALITIES):
        super().__init__()
        self.grid = grid
        self.dim = dim
        self.proj = nn.ModuleDict({m: nn.Linear(grid.patch_dim, dim) for m in modalities})
        table = torch.from_numpy(sincos_pos_embed_2d(dim, grid.side)).float()
        for m in modalities:
            self.register_buffer(f"pos_{m}", table.clone())

    def pos(self, modality: str) -> torch.Tensor:
        return getattr(self, f"pos_{modality}")

    def forward(self, patches: torch.Tensor, modality: str) -> torch.Tensor:
        if patches.shape[-1] != self.grid.patch_dim:
            raise ConfigError(f"patch dim {patches.shape[-1]} != {self.grid.patch_dim}")
        return self.proj[modality](patches) + self.pos(modality)


def embed(patches: torch.Tensor, modality: str, params: ModalityEmbedding) -> torch.Tensor:
    return params(patches, modality)


def gather_visible(tokens, indices):
    """Select rows ``indices`` (ascending) from a ``(P, D)`` sequence."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= tokens.shape[0]):
        raise IndexError(f"token index out of range for sequence of length {tokens.shape[0]}")
    indices = np.sort(indices)
    if isinstance(tokens, torch.Tensor):
        return tokens[torch.from_numpy(indices)]
    return tokens[indices]


def gather_plan(sat_tokens, uav_tokens, plan: MaskPlan):
    """Encoder input for one sample: visible satellite tokens then visible UAV tokens."""
    parts = [gather_visible(sat_tokens, plan.visible_sat), gather_visible(uav_tokens, plan.visible_uav)]
    if isinstance(sat_tokens, torch.Tensor):
        return torch.cat(parts, dim=0)
    return np.concatenate(parts, axis=0)
