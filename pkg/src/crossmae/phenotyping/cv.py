"""Genotype-grouped cross-validation over the replicate axis.

Rows of each genotype are assigned to replicate slots, giving an
``M x G`` table of row positions (``M`` = replicates kept per genotype).
Folds partition the slot axis, so every genotype contributes to every
training fold and no row is ever both train and test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..rng import stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvSplit:
    fold: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    test_slots: np.ndarray


def _hashable(key):
    if isinstance(key, np.ndarray):
        key = key.tolist()
    if isinstance(key, (list, tuple)):
        return tuple(_hashable(k) for k in key)
    return key.item() if isinstance(key, np.generic) else key


def replicate_slots(
    genotypes: Sequence, keys: Sequence | None = None, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Assign rows to an ``(M, G)`` slot table.

    Rows are ordered by ``keys`` within each genotype before the seeded
    shuffle, so the result does not depend on input row order. Genotypes with
    more than ``M_min`` rows lose a seeded random subset of them.

    Returns ``(slots, genotype_labels)``; ``slots[r, g]`` is a row position.
    """
    genotypes = np.asarray(genotypes)
    if keys is None:
        rank = np.arange(len(genotypes))
    else:
        keys = list(keys)
        if len(keys) != len(genotypes):
            raise ConfigError("keys and genotypes differ in length")
        if len(set(map(_hashable, keys))) != len(keys):
            raise ConfigError("row keys must be unique")
        rank = np.empty(len(keys), dtype=np.int64)
        rank[sorted(range(len(keys)), key=lambda i: _hashable(keys[i]))] = np.arange(len(keys))
    labels, counts = np.unique(genotypes, return_counts=True)
    if labels.size == 0:
        raise ConfigError("no rows to split")
    m = int(counts.min())
    if m < 2:
        raise ConfigError(f"genotype {labels[counts.argmin()]!r} has {m} replicate(s); need at least 2")
    if (counts != m).any():
        logger.info("truncating genotypes to %d replicates (%d rows dropped)", m, int((counts - m).sum()))
    rng = stream(seed, "cv")
    slots = np.empty((m, labels.size), dtype=np.int64)
    for j, g in enumerate(labels):
        rows = np.flatnonzero(genotypes == g)
        rows = rows[np.argsort(rank[rows], kind="stable")]
        slots[:, j] = rows[rng.permutation(rows.size)[:m]]
    return slots, labels


def reshape_mgf(X: np.ndarray, genotypes: Sequence, keys: Sequence | None = None, seed: int = 0) -> np.ndarray:
    """Reorganize an ``N x F`` matrix into ``M x G x F``."""
    slots, _ = replicate_slots(genotypes, keys, seed)
    return np.asarray(X)[slots]


def build_cv(
    genotypes: Sequence, n_folds: int = 5, seed: int = 0, keys: Sequence | None = None
) -> list[CvSplit]:
    """Folds over the replicate axis; returns row positions for train and test."""
    slots, _ = replicate_slots(genotypes, keys, seed)
    m = slots.shape[0]
    k = min(n_folds, m)
    if k < n_folds:
        logger.warning("only %d replicates per genotype; using %d folds instead of %d", m, k, n_folds)
    splits = []
    for f, test_slots in enumerate(np.array_split(np.arange(m), k)):
        train_slots = np.setdiff1d(np.arange(m), test_slots)
        splits.append(
            CvSplit(
                fold=f,
                train_idx=np.sort(slots[train_slots].ravel()),
                test_idx=np.sort(slots[test_slots].ravel()),
                test_slots=test_slots,
            )
        )
    return splits
