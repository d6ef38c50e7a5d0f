"""Dirichlet allocation of a fixed visible-token budget across two modalities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

MODALITIES = ("sat", "uav")


@dataclass(frozen=True)
class MaskingConfig:
    alpha_sat: float = 0.9
    alpha_uav: float = 0.1
    total_visible: int = 66
    tokens_per_modality: int = 196

    def __post_init__(self) -> None:
        if not (self.alpha_sat > 0 and self.alpha_uav > 0):
            raise ConfigError(f"Dirichlet concentrations must be positive, got ({self.alpha_sat}, {self.alpha_uav})")
        if self.tokens_per_modality < 1:
            raise ConfigError("tokens_per_modality must be positive")
        if not 0 <= self.total_visible <= 2 * self.tokens_per_modality:
            raise ConfigError(
                f"total_visible={self.total_visible} outside [0, {2 * self.tokens_per_modality}]"
            )

    @property
    def expected_sat_fraction(self) -> float:
        return self.alpha_sat / (self.alpha_sat + self.alpha_uav)


@dataclass(frozen=True)
class ModalityProportions:
    lambda_sat: float
    lambda_uav: float

    def __post_init__(self) -> None:
        if self.lambda_sat < 0 or self.lambda_uav < 0:
            raise InputError("proportions must be non-negative")
        if abs(self.lambda_sat + self.lambda_uav - 1.0) > 1e-12:
            raise InputError("proportions must sum to one")


@dataclass(frozen=True)
class MaskPlan:
    """Sorted visible token indices per modality for one sample."""

    visible_sat: np.ndarray
    visible_uav: np.ndarray
    num_tokens: int
    lambda_draw: ModalityProportions | None = None

    def __post_init__(self) -> None:
        for name in ("visible_sat", "visible_uav"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.ndim != 1:
                raise InputError(f"{name} must be one-dimensional")
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_tokens):
                raise InputError(f"{name} has indices outside [0, {self.num_tokens})")
            idx = np.sort(idx)
            if np.any(np.diff(idx) == 0):
                raise InputError(f"{name} contains duplicates")
            object.__setattr__(self, name, idx)

    def visible(self, modality: str) -> np.ndarray:
        return self.visible_sat if modality == "sat" else self.visible_uav

    def masked(self, modality: str) -> np.ndarray:
        keep = np.ones(self.num_tokens, dtype=bool)
        keep[self.visible(modality)] = False
        return np.flatnonzero(keep)

    def visible_mask(self, modality: str) -> np.ndarray:
        out = np.zeros(self.num_tokens, dtype=bool)
        out[self.visible(modality)] = True
        return out

    @property
    def total_visible(self) -> int:
        return len(self.visible_sat) + len(self.visible_uav)

    @classmethod
    def from_counts(cls, n_sat: int, n_uav: int, num_tokens: int) -> "MaskPlan":
        """Deterministic plan exposing the first ``n_sat``/``n_uav`` tokens."""
        return cls(np.arange(n_sat), np.arange(n_uav), num_tokens)

    @classmethod
    def pseudo_uav(cls, num_tokens: int) -> "MaskPlan":
        return cls(np.arange(num_tokens), np.arange(0), num_tokens)

    @classmethod
    def pseudo_sat(cls, num_tokens: int) -> "MaskPlan":
        return cls(np.arange(0), np.arange(num_tokens), num_tokens)


def sample_proportions(cfg: MaskingConfig, rng: np.random.Generator) -> ModalityProportions:
    # two-component Dirichlet == Beta on the first coordinate
    lam = float(rng.beta(cfg.alpha_sat, cfg.alpha_uav))
    return ModalityProportions(lam, 1.0 - lam)


def allocate_tokens(lam: ModalityProportions, cfg: MaskingConfig) -> tuple[int, int]:
    """Floor to satellite, remainder to UAV; clamped so neither exceeds the grid."""
    total, p = cfg.total_visible, cfg.tokens_per_modality
    n_sat = min(math.floor(lam.lambda_sat * total), p)
    n_uav = total - n_sat
    if n_uav > p:
        n_uav = p
        n_sat = total - p
    return n_sat, n_uav


def select_visible(
    n_sat: int, n_uav: int, cfg: MaskingConfig, rng: np.random.Generator, lam: ModalityProportions | None = None
) -> MaskPlan:
    p = cfg.tokens_per_modality
    if not (0 <= n_sat <= p and 0 <= n_uav <= p):
        raise AssertionError(f"token counts ({n_sat}, {n_uav}) exceed grid size {p}")
    sat = np.sort(rng.choice(p, size=n_sat, replace=False))
    uav = np.sort(rng.choice(p, size=n_uav, replace=False))
    return MaskPlan(sat, uav, p, lam)


def sample_mask_plan(cfg: MaskingConfig, rng: np.random.Generator) -> MaskPlan:
    """Draw proportions, allocate the budget and choose visible indices."""
    lam = sample_proportions(cfg, rng)
    n_sat, n_uav = allocate_tokens(lam, cfg)
    return select_visible(n_sat, n_uav, cfg, rng, lam)


@dataclass(frozen=True)
class MaskBatch:
    """Vectorized draws for ``n`` samples: proportions, counts and boolean visibility."""

    lambda_sat: np.ndarray  # (n,)
    n_sat: np.ndarray  # (n,)
    n_uav: np.ndarray  # (n,)
    visible: dict  # modality -> (n, P) bool

    def __len__(self) -> int:
        return len(self.lambda_sat)

    def plans(self) -> list[MaskPlan]:
        p = self.visible["sat"].shape[1]
        return [
            MaskPlan(
                np.flatnonzero(self.visible["sat"][i]),
                np.flatnonzero(self.visible["uav"][i]),
                p,
                ModalityProportions(float(self.lambda_sat[i]), 1.0 - float(self.lambda_sat[i])),
            )
            for i in range(len(self))
        ]


def allocate_batch(lambda_sat: np.ndarray, cfg: MaskingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`allocate_tokens`."""
    total, p = cfg.total_visible, cfg.tokens_per_modality
    n_sat = np.minimum(np.floor(np.asarray(lambda_sat, dtype=np.float64) * total).astype(np.int64), p)
    n_sat = np.maximum(n_sat, total - p)
    return n_sat, total - n_sat


def _random_subsets(counts: np.ndarray, p: int, rng: np.random.Generator) -> np.ndarray:
    # ranks of iid uniform keys form a uniform random permutation per row
    ranks = rng.random((len(counts), p)).argsort(axis=1).argsort(axis=1)
    return ranks < counts[:, None]


def sample_mask_batch(cfg: MaskingConfig, rng: np.random.Generator, n: int) -> MaskBatch:
    """Independent mask draws for ``n`` samples (one proportion per sample)."""
    lam = rng.beta(cfg.alpha_sat, cfg.alpha_uav, size=n)
    n_sat, n_uav = allocate_batch(lam, cfg)
    p = cfg.tokens_per_modality
    return MaskBatch(lam, n_sat, n_uav, {"sat": _random_subsets(n_sat, p, rng), "uav": _random_subsets(n_uav, p, rng)})


def beta_moments(alpha_sat: float, alpha_uav: float) -> tuple[float, float]:
    """Mean and variance of the satellite proportion under Dir(alpha_sat, alpha_uav)."""
    s = alpha_sat + alpha_uav
    return alpha_sat / s, alpha_sat * alpha_uav / (s * s * (s + 1))
