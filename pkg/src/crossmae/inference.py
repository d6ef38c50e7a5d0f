"""Pseudo-UAV generation, masking-ratio sweeps, tint augmentation and mosaics."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import torch

from .datagen import PlotPair
from .errors import ConfigError, InputError
from .masking import MaskingConfig, MaskPlan
from .model import CrossModalMAE, ModelConfig, images_to_tensor, plans_to_masks
from .rng import stream
from .tokenizer import unpatchify

logger = logging.getLogger(__name__)

MODES = ("pseudo_uav", "pseudo_sat", "conditioned")


@dataclass(frozen=True)
class TintSpec:
    scales: tuple[float, float, float] = (1.0, 1.0, 1.0)
    brightness: float = 1.0
    contrast: float = 1.0
    preset: str = "custom"

    def __post_init__(self) -> None:
        if len(self.scales) != 3 or min(self.scales) <= 0:
            raise ConfigError(f"tint scales must be three positive numbers, got {self.scales}")
        if self.brightness <= 0 or self.contrast <= 0:
            raise ConfigError("brightness and contrast factors must be positive")

    @classmethod
    def from_preset(cls, name: str) -> "TintSpec":
        try:
            scales, brightness, contrast = TINT_PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown tint preset {name!r}; choose from {sorted(TINT_PRESETS)}") from None
        return cls(scales, brightness, contrast, name)


# time-of-day presets: (channel scales, brightness, contrast)
TINT_PRESETS = {
    "morning": ((1.05, 1.00, 0.95), 0.9, 0.95),
    "afternoon": ((1.00, 1.00, 0.98), 1.1, 1.05),
    "evening": ((1.10, 0.95, 0.90), 0.7, 0.9),
}


def apply_tint(image: np.ndarray, spec: TintSpec) -> np.ndarray:
    """Channel tint, then brightness, then contrast about the per-channel image mean."""
    if image.min() < 0 or image.max() > 1:
        raise InputError("image values must lie in [0, 1]")
    bright = spec.brightness * (image * np.asarray(spec.scales))
    mean = bright.mean(axis=(0, 1), keepdims=True)
    return np.clip(spec.contrast * (bright - mean) + mean, 0.0, 1.0)


@dataclass
class GenerationRequest:
    pairs: Sequence[PlotPair]
    mode: str = "pseudo_uav"
    uav_indices: Sequence[int] | None = None
    num_conditioning: int = 2
    tint: TintSpec | None = None
    seed: int = 0
    batch_size: int = 16

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown generation mode {self.mode!r}")


@dataclass
class GenerationResult:
    images: np.ndarray  # (N, H, W, 3), clipped to [0, 1]
    mse: np.ndarray  # per-image full-frame MSE against the real target
    target: str
    uav_indices: list[np.ndarray] = field(default_factory=list)


def _plan_for(mode: str, p: int, uav_idx: np.ndarray | None) -> MaskPlan:
    if mode == "pseudo_uav":
        return MaskPlan.pseudo_uav(p)
    if mode == "pseudo_sat":
        return MaskPlan.pseudo_sat(p)
    return MaskPlan(np.arange(p), uav_idx, p)


@torch.no_grad()
def generate(model: CrossModalMAE, req: GenerationRequest) -> GenerationResult:
    """Reconstruct the target modality for every pair.

    ``pseudo_uav`` exposes all satellite tokens and no UAV token;
    ``pseudo_sat`` is the mirror; ``conditioned`` adds ``uav_indices`` (or
    ``num_conditioning`` seeded random) UAV patches, optionally tinted.
    """
    grid = model.grid
    p = grid.num_patches
    if req.pairs and req.pairs[0].sat_image.shape[0] != grid.image_size:
        raise ConfigError(
            f"input size {req.pairs[0].sat_image.shape[0]} does not match checkpoint size {grid.image_size}"
        )
    target = "sat" if req.mode == "pseudo_sat" else "uav"
    dtype = next(model.parameters()).dtype
    rng = stream(req.seed, "conditioning")
    model.eval()

    outs, mses, cond = [], [], []
    for start in range(0, len(req.pairs), req.batch_size):
        batch = req.pairs[start : start + req.batch_size]
        plans = []
        for _ in batch:
            idx = None
            if req.mode == "conditioned":
                if req.uav_indices is not None:
                    idx = np.asarray(req.uav_indices, dtype=np.int64)
                else:
                    idx = np.sort(rng.choice(p, size=req.num_conditioning, replace=False))
                if not 1 <= len(idx) <= p:
                    raise ConfigError(f"conditioned mode needs 1..{p} UAV patches, got {len(idx)}")
                cond.append(idx)
            plans.append(_plan_for(req.mode, p, idx))
        uav_in = [p_.uav_image if req.tint is None else apply_tint(p_.uav_image, req.tint) for p_ in batch]
        images = {"sat": images_to_tensor([p_.sat_image for p_ in batch], dtype), "uav": images_to_tensor(uav_in, dtype)}
        pred = model(images, plans_to_masks(plans), modalities=[target])[target]
        pred = unpatchify(pred, grid.patch_size, grid.channels).clamp(0.0, 1.0).double().numpy()
        real = np.stack([getattr(p_, f"{target}_image") for p_ in batch])
        mses.extend(((pred - real) ** 2).mean(axis=(1, 2, 3)).tolist())
        outs.append(pred)
    images = np.concatenate(outs) if outs else np.zeros((0, grid.image_size, grid.image_size, 3))
    return GenerationResult(images=images, mse=np.asarray(mses), target=target, uav_indices=cond)


def per_location_mse(pairs: Sequence[PlotPair], mse: np.ndarray) -> dict[int, float]:
    df = pd.DataFrame({"location_id": [p.location_id for p in pairs], "mse": mse})
    return df.groupby("location_id")["mse"].mean().to_dict()


@dataclass(frozen=True)
class SweepSpec:
    alphas: tuple[tuple[float, float], ...]
    eval_split: str = "all"  # "all" or "holdout"

    def __post_init__(self) -> None:
        if not self.alphas:
            raise ConfigError("sweep grid is empty")
        if self.eval_split not in ("all", "holdout"):
            raise ConfigError(f"unknown eval split {self.eval_split!r}")


def run_sweep(
    spec: SweepSpec,
    pairs: Sequence[PlotPair],
    train_cfg,
    model_cfg: ModelConfig,
    *,
    total_visible: int = 66,
    cache_dir: Path | None = None,
) -> pd.DataFrame:
    """Pretrain once per concentration pair and tabulate pseudo-UAV reconstruction MSE.

    Columns: ``alpha_sat, alpha_uav, uav_tokens_pct, mean_mse`` and one
    ``mse_loc<id>`` column per evaluated location; ``mean_mse`` averages the
    per-location means.
    """
    from .trainer import config_hash, load_checkpoint, train

    if cache_dir is None and os.environ.get("CROSSMAE_CACHE"):
        cache_dir = os.environ["CROSSMAE_CACHE"]
    cache_dir = Path(cache_dir) if cache_dir else None
    if spec.eval_split == "holdout":
        if train_cfg.holdout_location is None:
            raise ConfigError("holdout evaluation requires holdout_location in the training config")
        eval_pairs = [p for p in pairs if p.location_id == train_cfg.holdout_location]
    else:
        eval_pairs = list(pairs)

    rows = []
    for a_sat, a_uav in spec.alphas:
        mask_cfg = MaskingConfig(a_sat, a_uav, total_visible, model_cfg.grid.num_patches)
        key = config_hash(model_cfg, train_cfg, mask_cfg)
        ckpt = cache_dir / "sweep" / key / "checkpoint.pt" if cache_dir else None
        if ckpt is not None and ckpt.exists():
            model, _ = load_checkpoint(ckpt)
            logger.info("reusing cached checkpoint %s", ckpt)
        else:
            result = train(pairs, model_cfg, train_cfg, mask_cfg, out_dir=ckpt.parent if ckpt else None)
            model = result.model
        gen = generate(model, GenerationRequest(eval_pairs, "pseudo_uav"))
        by_loc = per_location_mse(eval_pairs, gen.mse)
        row = {
            "alpha_sat": a_sat,
            "alpha_uav": a_uav,
            "uav_tokens_pct": 100.0 * a_uav / (a_sat + a_uav),
            "mean_mse": float(np.mean(list(by_loc.values()))),
        }
        row.update({f"mse_loc{loc}": v for loc, v in sorted(by_loc.items())})
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Rendering


def _downscale(image: np.ndarray, factor: int) -> np.ndarray:
    if factor <= 1:
        return image
    h, w, c = image.shape
    h2, w2 = h // factor, w // factor
    return image[: h2 * factor, : w2 * factor].reshape(h2, factor, w2, factor, c).mean(axis=(1, 3))


def field_mosaic(
    pairs: Sequence[PlotPair], images: np.ndarray | Sequence[np.ndarray], *, background: float = 1.0, gap: int = 4
) -> np.ndarray:
    """Place subplot images back into the field layout.

    Each plot occupies one grid cell at ``(field_row, field_col)`` with its
    subplots side by side in ``subplot_id`` order.
    """
    if len(pairs) != len(images):
        raise InputError("pairs and images differ in length")
    if not len(pairs):
        raise InputError("nothing to render")
    s = images[0].shape[0]
    n_sub = max(p.subplot_id for p in pairs) + 1
    rows = max(max(p.field_row for p in pairs), 0) + 1
    cols = max(max(p.field_col for p in pairs), 0) + 1
    cell_h, cell_w = s + gap, n_sub * s + gap
    canvas = np.full((rows * cell_h, cols * cell_w, 3), background)
    for i, (p, img) in enumerate(zip(pairs, images)):
        r = p.field_row if p.field_row >= 0 else 0
        c = p.field_col if p.field_col >= 0 else i
        if c >= cols:
            raise InputError("plots without field coordinates need a field layout")
        y, x = r * cell_h, c * cell_w + p.subplot_id * s
        canvas[y : y + s, x : x + s] = img
    return canvas


def comparison_figure(
    pairs: Sequence[PlotPair], predicted: np.ndarray, *, location_id: int | None = None, scale: int = 4, gap: int = 16
) -> np.ndarray:
    """Rows per timepoint; columns real satellite | real UAV | predicted UAV."""
    loc = pairs[0].location_id if location_id is None else location_id
    idx = [i for i, p in enumerate(pairs) if p.location_id == loc]
    timepoints = sorted({pairs[i].timepoint_id for i in idx})
    rows = []
    for t in timepoints:
        sel = [i for i in idx if pairs[i].timepoint_id == t]
        sub = [pairs[i] for i in sel]
        panels = [
            field_mosaic(sub, [p.sat_image for p in sub]),
            field_mosaic(sub, [p.uav_image for p in sub]),
            field_mosaic(sub, [predicted[i] for i in sel]),
        ]
        panels = [_downscale(pn, scale) for pn in panels]
        h = panels[0].shape[0]
        spacer = np.ones((h, gap, 3))
        rows.append(np.concatenate([panels[0], spacer, panels[1], spacer, panels[2]], axis=1))
    width = max(r.shape[1] for r in rows)
    out = []
    for r in rows:
        pad = np.ones((r.shape[0], width - r.shape[1], 3))
        out.extend([np.concatenate([r, pad], axis=1), np.ones((gap, width, 3))])
    return np.concatenate(out[:-1], axis=0)


def render_mask_plan(
    sat: np.ndarray, uav: np.ndarray, plan: MaskPlan, patch_size: int = 16, *, gray: float = 0.5, gap: int = 8
) -> np.ndarray:
    """Side-by-side satellite/UAV view with hidden patches grayed out."""
    panels = []
    side = sat.shape[0] // patch_size
    for modality, img in (("sat", sat), ("uav", uav)):
        shown = img.copy()
        for t in plan.masked(modality):
            y, x = divmod(int(t), side)
            block = shown[y * patch_size : (y + 1) * patch_size, x * patch_size : (x + 1) * patch_size]
            block[...] = 0.25 * block + 0.75 * gray
        panels.append(shown)
    spacer = np.ones((sat.shape[0], gap, 3))
    return np.concatenate([panels[0], spacer, panels[1]], axis=1)
