"""Multimodal masked autoencoder over satellite and UAV patch tokens.

Layout of one forward pass::

    patchify -> per-modality projection + position table
             -> gather visible (sat first, then uav, ascending index)
             -> shared pre-norm transformer encoder
             -> one decoder per modality: queries for all P positions
                (projected latents where visible, mask token where hidden),
                each layer = cross-attention onto every latent, then
                self-attention, then MLP
             -> linear head to raw pixels

Visibility is passed around as boolean masks of shape ``(B, P)`` per
modality; every row of a batch must expose the same total number of tokens.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, DegenerateBatchError, NumericError
from .masking import MODALITIES, MaskPlan
from .tokenizer import ModalityEmbedding, PatchGrid, patchify, sincos_pos_embed_2d


@dataclass(frozen=True)
class ModelConfig:
    image_size: int = 224
    patch_size: int = 16
    channels: int = 3
    embed_dim: int = 128
    depth: int = 4
    heads: int = 4
    decoder_dim: int = 256
    decoder_depth: int = 2
    decoder_heads: int = 8
    mlp_ratio: float = 4.0

    def __post_init__(self) -> None:
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if self.decoder_dim % self.decoder_heads:
            raise ConfigError(f"decoder_dim {self.decoder_dim} not divisible by heads {self.decoder_heads}")
        if self.embed_dim % 4 or self.decoder_dim % 4:
            raise ConfigError("embedding widths must be divisible by 4 for 2-D sin-cos tables")
        if self.depth < 0 or self.decoder_depth < 0:
            raise ConfigError("depths must be non-negative")
        PatchGrid(self.image_size, self.patch_size, self.channels)

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.image_size, self.patch_size, self.channels)

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_count(cfg: ModelConfig) -> int:
    """Closed-form trainable parameter count for ``cfg``.

    Per attention: 4 * (w*w + w) (q, k, v, out); per MLP with hidden h:
    2*w*h + h + w; per LayerNorm: 2*w.
    """
    d, dd, pd = cfg.embed_dim, cfg.decoder_dim, cfg.grid.patch_dim
    hid, dhid = int(d * cfg.mlp_ratio), int(dd * cfg.mlp_ratio)
    attn = lambda w: 4 * (w * w + w)  # noqa: E731
    mlp = lambda w, h: 2 * w * h + h + w  # noqa: E731
    enc_block = 2 * 2 * d + attn(d) + mlp(d, hid)
    dec_layer = 4 * 2 * dd + 2 * attn(dd) + mlp(dd, dhid)
    decoder = 2 * d + (d * dd + dd) + dd + cfg.decoder_depth * dec_layer + 2 * dd + (dd * pd + pd)
    n_mod = len(MODALITIES)
    return n_mod * (pd * d + d) + cfg.depth * enc_block + n_mod * decoder


class Attention(nn.Module):
    """Multi-head scaled dot-product attention; ``context=None`` means self-attention."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, context: torch.Tensor | None = None) -> torch.Tensor:
        context = x if context is None else context
        b, n, d = x.shape
        m = context.shape[1]
        h = self.heads
        if m == 0:
            return torch.zeros_like(x)
        q = self.q(x).reshape(b, n, h, d // h).transpose(1, 2)
        k = self.k(context).reshape(b, m, h, d // h).transpose(1, 2)
        v = self.v(context).reshape(b, m, h, d // h).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(d // h), dim=-1)
        return self.out((attn @ v).transpose(1, 2).reshape(b, n, d))


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class DecoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm_q = nn.LayerNorm(dim)
        self.norm_ctx = nn.LayerNorm(dim)
        self.cross = Attention(dim, heads)
        self.norm_self = nn.LayerNorm(dim)
        self.self_attn = Attention(dim, heads)
        self.norm_mlp = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        x = x + self.cross(self.norm_q(x), self.norm_ctx(context))
        x = x + self.self_attn(self.norm_self(x))
        return x + self.mlp(self.norm_mlp(x))


class ModalityDecoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        grid = cfg.grid
        self.num_tokens = grid.num_patches
        self.context_norm = nn.LayerNorm(cfg.embed_dim)
        self.embed = nn.Linear(cfg.embed_dim, cfg.decoder_dim)
        self.mask_token = nn.Parameter(torch.zeros(cfg.decoder_dim))
        self.register_buffer("pos", torch.from_numpy(sincos_pos_embed_2d(cfg.decoder_dim, grid.side)).float())
        self.layers = nn.ModuleList(
            DecoderLayer(cfg.decoder_dim, cfg.decoder_heads, cfg.mlp_ratio) for _ in range(cfg.decoder_depth)
        )
        self.norm = nn.LayerNorm(cfg.decoder_dim)
        self.head = nn.Linear(cfg.decoder_dim, grid.patch_dim)

    def forward(self, latents: torch.Tensor, visible: torch.Tensor, own: int) -> torch.Tensor:
        """Predict all P patches of modality number ``own``.

        ``visible`` is the concatenated ``(B, n_mod * P)`` visibility mask that
        produced ``latents``.
        """
        b, n, _ = latents.shape
        p = self.num_tokens
        ctx = self.embed(self.context_norm(latents))
        pos_index = torch.arange(visible.shape[1], device=latents.device) % p
        ctx_pos = self.pos[pos_index.expand(b, -1)[visible].reshape(b, n)]
        context = ctx + ctx_pos

        scattered = torch.zeros(b, visible.shape[1], ctx.shape[-1], dtype=ctx.dtype, device=ctx.device)
        scattered = scattered.masked_scatter(visible[..., None], ctx)
        own_vis = visible[:, own * p : (own + 1) * p]
        own_ctx = scattered[:, own * p : (own + 1) * p]
        x = torch.where(own_vis[..., None], own_ctx, self.mask_token.expand(b, p, -1)) + self.pos

        for layer in self.layers:
            x = layer(x, context)
        return self.head(self.norm(x))


@dataclass
class LossReport:
    total: torch.Tensor
    per_modality: dict[str, torch.Tensor]
    masked_counts: dict[str, int]

    def item(self) -> dict[str, float]:
        out = {"total": self.total.item()}
        out.update({f"loss_{m}": v.item() for m, v in self.per_modality.items()})
        return out


class CrossModalMAE(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.grid = cfg.grid
        self.modalities = MODALITIES
        self.tokens = ModalityEmbedding(self.grid, cfg.embed_dim, MODALITIES)
        self.blocks = nn.ModuleList(EncoderBlock(cfg.embed_dim, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth))
        self.decoders = nn.ModuleDict({m: ModalityDecoder(cfg) for m in MODALITIES})
        self.apply(_init_weights)
        for dec in self.decoders.values():
            nn.init.normal_(dec.mask_token, std=0.02)

    @property
    def proj(self) -> nn.ModuleDict:
        return self.tokens.proj

    def zero_output_heads(self) -> None:
        with torch.no_grad():
            for dec in self.decoders.values():
                dec.head.weight.zero_()
                dec.head.bias.zero_()

    def no_weight_decay(self) -> set[str]:
        """Names of parameters excluded from weight decay."""
        return {
            name
            for name, p in self.named_parameters()
            if p.ndim < 2 or name.endswith("mask_token") or ".pos" in name
        }

    def encode(self, tokens: torch.Tensor) -> torch.Tensor:
        x = tokens
        for blk in self.blocks:
            x = blk(x)
        if not torch.isfinite(x).all():
            raise NumericError("non-finite encoder activations")
        return x

    def decode(self, latents: torch.Tensor, visible: torch.Tensor, modality: str) -> torch.Tensor:
        return self.decoders[modality](latents, visible, self.modalities.index(modality))

    def embed_visible(
        self, images: dict[str, torch.Tensor], visible: dict[str, torch.Tensor]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Embed both modalities and gather the visible tokens.

        Returns the ``(B, N, D)`` encoder input and the concatenated
        ``(B, n_mod * P)`` visibility mask. A modality with no visible token
        in the whole batch is never read.
        """
        b = visible[self.modalities[0]].shape[0]
        p = self.grid.num_patches
        vis = torch.cat([visible[m] for m in self.modalities], dim=1)
        counts = vis.sum(dim=1)
        if counts.numel() and (counts != counts[0]).any():
            raise ConfigError("every sample in a batch must expose the same number of tokens")
        n = int(counts[0]) if counts.numel() else 0
        dtype = next(self.parameters()).dtype
        parts = []
        for m in self.modalities:
            if visible[m].any():
                parts.append(self.tokens(patchify(images[m], self.grid.patch_size), m))
            else:
                parts.append(torch.zeros(b, p, self.cfg.embed_dim, dtype=dtype))
        tokens = torch.cat(parts, dim=1)[vis].reshape(b, n, self.cfg.embed_dim)
        return tokens, vis

    def forward(
        self, images: dict[str, torch.Tensor], visible: dict[str, torch.Tensor], modalities: Sequence[str] | None = None
    ) -> dict[str, torch.Tensor]:
        """Per-token pixel predictions ``(B, P, patch_dim)`` for each requested modality."""
        tokens, vis = self.embed_visible(images, visible)
        latents = self.encode(tokens)
        return {m: self.decode(latents, vis, m) for m in (modalities or self.modalities)}


def _init_weights(m: nn.Module) -> None:
    if isinstance(m, nn.Linear):
        nn.init.xavier_uniform_(m.weight)
        nn.init.zeros_(m.bias)
    elif isinstance(m, nn.LayerNorm):
        nn.init.ones_(m.weight)
        nn.init.zeros_(m.bias)


def build_model(cfg: ModelConfig, seed: int | None = None) -> CrossModalMAE:
    """Construct a model; with ``seed`` the initialisation is reproducible."""
    if seed is None:
        return CrossModalMAE(cfg)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return CrossModalMAE(cfg)


def masked_loss(
    preds: dict[str, torch.Tensor], targets: dict[str, torch.Tensor], visible: dict[str, torch.Tensor]
) -> LossReport:
    """Masked-token MSE per modality (mean over tokens and pixels); total is their mean.

    Modalities without masked tokens are left out of the mean.
    """
    per_mod, counts = {}, {}
    for m, pred in preds.items():
        hidden = ~visible[m]
        counts[m] = int(hidden.sum())
        if counts[m] == 0:
            per_mod[m] = pred.new_zeros(())
            continue
        per_token = ((pred - targets[m]) ** 2).mean(dim=-1)
        per_mod[m] = per_token[hidden].mean()
    active = [per_mod[m] for m in preds if counts[m] > 0]
    if not active:
        raise DegenerateBatchError("no masked tokens in any modality")
    return LossReport(torch.stack(active).mean(), per_mod, counts)


def plans_to_masks(plans: Sequence[MaskPlan], device=None) -> dict[str, torch.Tensor]:
    return {
        m: torch.from_numpy(np.stack([plan.visible_mask(m) for plan in plans])).to(device or "cpu")
        for m in MODALITIES
    }


def images_to_tensor(images: Sequence[np.ndarray], dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(np.stack(images)).to(dtype)


def forward_train(
    model: CrossModalMAE, images: dict[str, torch.Tensor], plans: Sequence[MaskPlan] | dict[str, torch.Tensor]
) -> LossReport:
    """Full training objective for a batch of ``(B, H, W, C)`` images per modality.

    ``plans`` is either one :class:`MaskPlan` per sample or the boolean
    ``(B, P)`` visibility masks themselves.
    """
    visible = plans if isinstance(plans, dict) else plans_to_masks(plans)
    preds = model(images, visible)
    targets = {m: patchify(images[m], model.grid.patch_size) for m in preds}
    return masked_loss(preds, targets, visible)
