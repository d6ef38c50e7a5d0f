"""Pretraining loop: AdamW, linear warmup then cosine decay, location hold-out."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .datagen import PlotPair
from .errors import ConfigError, InputError, NumericError
from .masking import MODALITIES, MaskingConfig, sample_mask_batch
from .model import CrossModalMAE, ModelConfig, build_model, forward_train, images_to_tensor
from .rng import int_seed, stream

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "crossmae-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    base_lr: float = 1e-4
    warmup_epochs: float = 40
    warmup_start_lr: float = 1e-6
    min_lr: float = 0.0
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.95)
    seed: int = 0
    mask_seed: int | None = None
    holdout_location: int | None = None
    checkpoint_every: int = 0
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ConfigError(f"warmup_epochs {self.warmup_epochs} outside [0, {self.epochs}]")
        if min(self.base_lr, self.warmup_start_lr, self.min_lr, self.weight_decay) < 0:
            raise ConfigError("learning rates and weight decay must be non-negative")
        object.__setattr__(self, "betas", tuple(self.betas))

    def to_dict(self) -> dict:
        return asdict(self)


def lr_at(epoch: float, cfg: TrainConfig = TrainConfig()) -> float:
    """Learning rate at fractional epoch ``epoch``.

    Linear from ``warmup_start_lr`` to ``base_lr`` over the warmup, then a
    half-cosine from ``base_lr`` down to ``min_lr`` at ``epochs``.
    """
    if not 0 <= epoch <= cfg.epochs:
        raise InputError(f"epoch {epoch} outside [0, {cfg.epochs}]")
    w = cfg.warmup_epochs
    if epoch < w:
        return cfg.warmup_start_lr + (cfg.base_lr - cfg.warmup_start_lr) * epoch / w
    if cfg.epochs == w:
        return cfg.base_lr
    progress = (epoch - w) / (cfg.epochs - w)
    return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


def config_hash(*configs) -> str:
    blob = json.dumps([c.to_dict() if hasattr(c, "to_dict") else asdict(c) for c in configs], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class TrainLog:
    config_hash: str
    epochs: list[dict] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)

    @property
    def lr_trace(self) -> list[float]:
        return [lr for rec in self.epochs for lr in rec["lrs"]]

    def losses(self, key: str = "loss") -> np.ndarray:
        return np.array([rec[key] for rec in self.epochs])


@dataclass
class TrainResult:
    model: CrossModalMAE
    log: TrainLog
    checkpoint: Path | None


def param_groups(model: CrossModalMAE, weight_decay: float) -> list[dict]:
    skip = model.no_weight_decay()
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        if p.requires_grad:
            (no_decay if name in skip else decay).append(p)
    return [{"params": decay, "weight_decay": weight_decay}, {"params": no_decay, "weight_decay": 0.0}]


def save_checkpoint(
    path: Path,
    model: CrossModalMAE,
    *,
    train_cfg: TrainConfig | None = None,
    mask_cfg: MaskingConfig | None = None,
    epoch: int | None = None,
    extra: dict | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.cfg.to_dict(),
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
        "train_config": train_cfg.to_dict() if train_cfg else None,
        "mask_config": asdict(mask_cfg) if mask_cfg else None,
        "epoch": epoch,
        "rng_state": torch.get_rng_state(),
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path: Path) -> tuple[CrossModalMAE, dict]:
    path = Path(path)
    if not path.exists():
        from .errors import MissingInputError

        raise MissingInputError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"{path} is not a checkpoint")
    if int(payload["version"]) > CHECKPOINT_VERSION:
        raise InputError(f"checkpoint version {payload['version']} is newer than supported")
    model = CrossModalMAE(ModelConfig(**payload["model_config"]))
    sd = payload["state_dict"]
    dtype = next(iter(sd.values())).dtype
    model.to(dtype)
    model.load_state_dict(sd)
    model.eval()
    return model, payload


def split_pairs(pairs: Sequence[PlotPair], holdout_location: int | None) -> list[PlotPair]:
    if holdout_location is None:
        return list(pairs)
    return [p for p in pairs if p.location_id != holdout_location]


def train(
    pairs: Sequence[PlotPair],
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    mask_cfg: MaskingConfig | None = None,
    out_dir: Path | None = None,
    *,
    dtype: torch.dtype = torch.float32,
) -> TrainResult:
    """Pretrain a model on ``pairs`` minus the held-out location.

    Sample order and mask draws depend only on ``(seed, epoch)``. With
    ``out_dir`` a JSON-lines log and checkpoints are written there.
    """
    mask_cfg = mask_cfg or MaskingConfig(tokens_per_modality=model_cfg.grid.num_patches)
    if mask_cfg.tokens_per_modality != model_cfg.grid.num_patches:
        raise ConfigError("masking grid does not match model patch grid")
    data = split_pairs(pairs, train_cfg.holdout_location)
    if not data:
        raise ConfigError("training split is empty after hold-out filtering")

    model = build_model(model_cfg, seed=int_seed(train_cfg.seed, "init") % 2**31).to(dtype)
    optim = torch.optim.AdamW(
        param_groups(model, train_cfg.weight_decay), lr=train_cfg.warmup_start_lr, betas=train_cfg.betas
    )
    images = {
        "sat": images_to_tensor([p.sat_image for p in data], dtype),
        "uav": images_to_tensor([p.uav_image for p in data], dtype),
    }
    n = len(data)
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    location_counts = dict(sorted(Counter(p.location_id for p in data).items()))
    log = TrainLog(config_hash=config_hash(model_cfg, train_cfg, mask_cfg))

    out_dir = Path(out_dir) if out_dir else None
    log_fh = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_dir / "train_log.jsonl", "w")
    last_good = copy.deepcopy(model.state_dict())
    step = 0
    final_ckpt = None
    try:
        for epoch in range(train_cfg.epochs):
            if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
                break
            t0 = time.perf_counter()
            order = stream(train_cfg.seed, "data", epoch).permutation(n)
            mask_rng = stream(
                train_cfg.seed if train_cfg.mask_seed is None else train_cfg.mask_seed, "mask", epoch
            )
            model.train()
            sums = {"loss": 0.0, "loss_sat": 0.0, "loss_uav": 0.0}
            lrs = []
            for s in range(steps_per_epoch):
                if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
                    break
                idx = torch.from_numpy(order[s * train_cfg.batch_size : (s + 1) * train_cfg.batch_size])
                draw = sample_mask_batch(mask_cfg, mask_rng, len(idx))
                plans = {m: torch.from_numpy(v) for m, v in draw.visible.items()}
                lr = lr_at(epoch + (s + 0.5) / steps_per_epoch, train_cfg)
                for group in optim.param_groups:
                    group["lr"] = lr
                report = forward_train(model, {m: images[m][idx] for m in MODALITIES}, plans)
                if not torch.isfinite(report.total):
                    model.load_state_dict(last_good)
                    if out_dir:
                        save_checkpoint(out_dir / "last_good.pt", model, train_cfg=train_cfg, mask_cfg=mask_cfg)
                    raise NumericError(f"non-finite loss at epoch {epoch}, step {s}")
                optim.zero_grad(set_to_none=True)
                report.total.backward()
                optim.step()
                stats = report.item()
                sums["loss"] += stats["total"] * len(idx)
                for m in MODALITIES:
                    sums[f"loss_{m}"] += stats[f"loss_{m}"] * len(idx)
                lrs.append(lr)
                step += 1
            seen = min(n, len(lrs) * train_cfg.batch_size)
            record = {
                "epoch": epoch,
                **{k: v / seen for k, v in sums.items()},
                "lr": lrs[-1],
                "lrs": lrs,
                "steps": len(lrs),
                "wall_time": time.perf_counter() - t0,
                "n_samples": n,
                "samples_per_location": location_counts,
            }
            log.epochs.append(record)
            last_good = copy.deepcopy(model.state_dict())
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            logger.info("epoch %d loss %.5f lr %.3g", epoch, record["loss"], record["lr"])
            if out_dir and train_cfg.checkpoint_every and (epoch + 1) % train_cfg.checkpoint_every == 0:
                path = save_checkpoint(
                    out_dir / f"checkpoint-{epoch:04d}.pt", model, train_cfg=train_cfg, mask_cfg=mask_cfg, epoch=epoch
                )
                log.checkpoints.append(str(path))
        if out_dir:
            final_ckpt = save_checkpoint(
                out_dir / "checkpoint.pt",
                model,
                train_cfg=train_cfg,
                mask_cfg=mask_cfg,
                epoch=len(log.epochs) - 1,
                extra={"config_hash": log.config_hash},
            )
            log.checkpoints.append(str(final_ckpt))
            with open(out_dir / "train_summary.json", "w") as fh:
                json.dump(
                    {
                        "config_hash": log.config_hash,
                        "checkpoints": log.checkpoints,
                        "model_config": model_cfg.to_dict(),
                        "train_config": train_cfg.to_dict(),
                        "mask_config": asdict(mask_cfg),
                        "samples_per_location": location_counts,
                    },
                    fh,
                    indent=2,
                )
    finally:
        if log_fh:
            log_fh.close()
    model.eval()
    return TrainResult(model=model, log=log, checkpoint=final_ckpt)
