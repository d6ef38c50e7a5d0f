"""Per-plot band and index summary statistics.

Column names are ``<source>_<band|index>_<stat>`` with stats in the order
min, mean, max, std (population). Within a source, bands come first
(red, green, blue[, nir]) and then indices (GLI, NGRDI[, NDVI, GNDVI, SAVI]);
NIR-based columns exist only for sources carrying the satellite NIR band.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from ..datagen import PlotPair
from ..errors import ConfigError, FeatureAvailabilityError, InputError
from .indices import INDICES, RGB_INDICES, NIR_INDICES, compute_index

STATS = ("min", "mean", "max", "std")
META_COLUMNS = (
    "location_id",
    "timepoint_id",
    "plot_id",
    "subplot_id",
    "genotype_id",
    "nitrogen_level",
    "yield_value",
)

# modality set -> ((source, with_nir), ...)
MODALITY_SETS: dict[str, tuple[tuple[str, bool], ...]] = {
    "sat_rgb": (("sat", False),),
    "uav_rgb": (("uav", False),),
    "pred_uav_rgb": (("pred_uav", False),),
    "pred_sat_rgb": (("pred_sat", False),),
    "sat_rgbnir": (("sat", True),),
    "sat_rgbnir+pred_uav_rgb": (("sat", True), ("pred_uav", False)),
}


def summarize(values: np.ndarray) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InputError("cannot summarize an empty image")
    return {"min": float(v.min()), "mean": float(v.mean()), "max": float(v.max()), "std": float(v.std())}


def image_bands(rgb: np.ndarray, nir: np.ndarray | None = None) -> dict[str, np.ndarray]:
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.size == 0:
        raise InputError(f"expected a non-empty HxWx3 image, got {rgb.shape}")
    bands = {"red": rgb[..., 0], "green": rgb[..., 1], "blue": rgb[..., 2]}
    if nir is not None:
        bands["nir"] = nir[..., 0] if nir.ndim == 3 else nir
    return bands


def source_columns(source: str, with_nir: bool) -> list[str]:
    bands = ["red", "green", "blue"] + (["nir"] if with_nir else [])
    indices = list(RGB_INDICES) + (list(NIR_INDICES) if with_nir else [])
    return [f"{source}_{name}_{stat}" for name in bands + indices for stat in STATS]


def feature_columns(modality_set: str) -> list[str]:
    try:
        sources = MODALITY_SETS[modality_set]
    except KeyError:
        raise ConfigError(f"unknown modality set {modality_set!r}; choose from {sorted(MODALITY_SETS)}") from None
    return [c for src, nir in sources for c in source_columns(src, nir)]


def extract_features(sources: Mapping[str, Mapping[str, np.ndarray]], with_nir: Mapping[str, bool] | None = None) -> dict[str, float]:
    """Summary statistics for every band and index of every source.

    ``sources`` maps a source name to its band arrays (see :func:`image_bands`).
    Indices needing NIR are computed only where ``with_nir[source]`` is true,
    and requesting them without an NIR band is an error.
    """
    if not sources:
        raise InputError("at least one modality is required")
    with_nir = with_nir or {s: "nir" in b for s, b in sources.items()}
    row: dict[str, float] = {}
    for src, bands in sources.items():
        nir = with_nir.get(src, False)
        if nir and "nir" not in bands:
            raise FeatureAvailabilityError(f"source {src!r} has no NIR band")
        names = ["red", "green", "blue"] + (["nir"] if nir else [])
        for b in names:
            for stat, v in summarize(bands[b]).items():
                row[f"{src}_{b}_{stat}"] = v
        for idx in list(RGB_INDICES) + (list(NIR_INDICES) if nir else []):
            for stat, v in summarize(compute_index(bands, INDICES[idx])).items():
                row[f"{src}_{idx}_{stat}"] = v
    return row


def _source_image(pair: PlotPair, source: str, predictions: Mapping[str, np.ndarray] | None, i: int) -> np.ndarray:
    if source == "sat":
        return pair.sat_image
    if source == "uav":
        return pair.uav_image
    if predictions is None or source not in predictions:
        raise FeatureAvailabilityError(f"source {source!r} requires generated predictions")
    return predictions[source][i]


def feature_table(
    pairs: Sequence[PlotPair],
    modality_set: str,
    predictions: Mapping[str, np.ndarray] | None = None,
    *,
    aggregate: str = "subplot",
    exclude_missing_yield: bool = True,
) -> pd.DataFrame:
    """One feature row per subplot (or per plot with ``aggregate='plot-mean'``)."""
    columns = feature_columns(modality_set)
    sources = MODALITY_SETS[modality_set]
    records = []
    for i, pair in enumerate(pairs):
        if exclude_missing_yield and not pair.has_yield:
            continue
        band_sets, nir_flags = {}, {}
        for src, nir in sources:
            if nir and pair.sat_nir is None:
                raise FeatureAvailabilityError(f"plot {pair.plot_id} lacks the satellite NIR band")
            band_sets[src] = image_bands(_source_image(pair, src, predictions, i), pair.sat_nir if nir else None)
            nir_flags[src] = nir
        row = extract_features(band_sets, nir_flags)
        row.update(
            location_id=pair.location_id,
            timepoint_id=pair.timepoint_id,
            plot_id=pair.plot_id,
            subplot_id=pair.subplot_id,
            genotype_id=pair.genotype_id,
            nitrogen_level=pair.nitrogen_level,
            yield_value=np.nan if pair.yield_value is None else pair.yield_value,
        )
        records.append(row)
    df = pd.DataFrame.from_records(records, columns=columns + list(META_COLUMNS))
    if aggregate == "subplot":
        return df
    if aggregate != "plot-mean":
        raise ConfigError(f"unknown aggregation {aggregate!r}")
    keys = ["location_id", "timepoint_id", "plot_id"]
    meta = df.groupby(keys, sort=True)[["genotype_id", "nitrogen_level", "yield_value"]].first()
    feats = df.groupby(keys, sort=True)[columns].mean()
    out = feats.join(meta).reset_index()
    out["subplot_id"] = -1
    return out[columns + list(META_COLUMNS)]
