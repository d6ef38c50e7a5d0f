"""Synthetic satellite/UAV plot pairs, plot cropping and dataset I/O.

Synthetic scenes carry a latent canopy state per plot. UAV renderings are
drawn from that state; satellite renderings are the same UAV rendering passed
through :func:`degrade` (Gaussian blur, decimation, bilinear re-upsampling),
so a cross-modal correspondence exists by construction.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DimensionMismatchError, InputError, MissingInputError
from .rng import stream

logger = logging.getLogger(__name__)

IMAGE_SIZE = 224
NITROGEN_LEVELS = ("low", "medium", "high")
MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = (
    "sat_path",
    "uav_path",
    "location_id",
    "timepoint_id",
    "genotype_id",
    "nitrogen_level",
    "yield_value",
    "plot_id",
    "field_row",
    "field_col",
)
MISSING = "missing"

# yield = YIELD_BASE + YIELD_PER_DENSITY * canopy + YIELD_PER_NITROGEN * level_index
YIELD_BASE = 2.0
YIELD_PER_DENSITY = 8.0
YIELD_PER_NITROGEN = 1.5

SOIL_RGB = np.array([0.50, 0.40, 0.30])
SOIL_NIR = 0.25
LEAF_NIR = 0.65


def yield_function(canopy_density: float, nitrogen_level: str) -> float:
    """Noise-free yield, monotone in both canopy density and nitrogen level."""
    level = NITROGEN_LEVELS.index(nitrogen_level)
    return YIELD_BASE + YIELD_PER_DENSITY * canopy_density + YIELD_PER_NITROGEN * level


@dataclass(frozen=True)
class SceneGenConfig:
    rows: int = 4
    cols: int = 4
    n_genotypes: int = 4
    n_replicates: int = 4
    yield_noise: float = 0.5
    density_noise: float = 0.05
    blur_sigma: float = 4.0
    downsample: int = 4
    plot_size: int = IMAGE_SIZE
    plot_aspect: int = 3
    pixel_noise: float = 0.01
    location_id: int = 0

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.n_genotypes < 2:
            raise ConfigError("need at least 2 genotypes")
        if self.n_replicates < 2:
            raise ConfigError("need at least 2 replicates per genotype")
        if self.n_genotypes * self.n_replicates > self.rows * self.cols:
            raise ConfigError(
                f"{self.n_genotypes} genotypes x {self.n_replicates} replicates "
                f"exceeds grid capacity {self.rows * self.cols}"
            )
        if min(self.yield_noise, self.density_noise, self.blur_sigma, self.pixel_noise) < 0:
            raise ConfigError("noise scales and blur sigma must be non-negative")
        if self.downsample < 1 or self.plot_size < 1 or self.plot_aspect < 1:
            raise ConfigError("downsample, plot_size and plot_aspect must be positive")


@dataclass(frozen=True)
class PlotState:
    plot_id: int
    row: int
    col: int
    genotype_id: int
    nitrogen_level: str
    canopy_density: float
    yield_value: float


@dataclass(frozen=True)
class Scene:
    config: SceneGenConfig
    seed: int
    plots: tuple[PlotState, ...]

    @property
    def grid(self) -> tuple[int, int]:
        return self.config.rows, self.config.cols


@dataclass
class PlotPair:
    """One co-registered square satellite/UAV sample plus agronomic labels.

    ``yield_value`` is ``None`` when the measurement is missing.
    """

    sat_image: np.ndarray
    uav_image: np.ndarray
    genotype_id: int
    nitrogen_level: str
    yield_value: float | None
    location_id: int
    timepoint_id: int
    sat_nir: np.ndarray | None = None
    plot_id: int = -1
    subplot_id: int = 0
    field_row: int = -1
    field_col: int = -1

    def __post_init__(self) -> None:
        if self.sat_image.shape != self.uav_image.shape:
            raise DimensionMismatchError(
                f"satellite {self.sat_image.shape} and UAV {self.uav_image.shape} differ"
            )
        h, w = self.sat_image.shape[:2]
        if h != w or self.sat_image.ndim != 3 or self.sat_image.shape[2] != 3:
            raise DimensionMismatchError(f"expected square HxWx3 images, got {self.sat_image.shape}")
        if self.sat_nir is not None and self.sat_nir.shape[:2] != (h, w):
            raise DimensionMismatchError("NIR band does not match satellite image size")
        for name in ("sat_image", "uav_image", "sat_nir"):
            arr = getattr(self, name)
            if arr is None:
                continue
            if np.isnan(arr).any():
                raise InputError(f"{name} contains NaN pixels")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise InputError(f"{name} values outside [0, 1]")
        if self.nitrogen_level not in NITROGEN_LEVELS:
            raise InputError(f"unknown nitrogen level {self.nitrogen_level!r}")

    @property
    def has_yield(self) -> bool:
        return self.yield_value is not None

    @property
    def nitrogen_index(self) -> int:
        return NITROGEN_LEVELS.index(self.nitrogen_level)


# ---------------------------------------------------------------------------
# Scene generation


def generate_scene(config: SceneGenConfig, seed: int) -> Scene:
    """Lay out ``n_genotypes * n_replicates`` plots on the field grid.

    Genotype effects depend only on ``seed`` so that scenes for different
    locations generated with the same seed share genotypes; layout and
    nitrogen assignment additionally depend on ``config.location_id``.
    """
    config.validate()
    g_rng = stream(seed, "genotype")
    genotype_effect = g_rng.uniform(0.3, 0.7, size=config.n_genotypes)
    rng = stream(seed, "layout", config.location_id)

    n_plots = config.n_genotypes * config.n_replicates
    cells = rng.permutation(config.rows * config.cols)[:n_plots]
    cells.sort()
    genotypes = rng.permutation(np.repeat(np.arange(config.n_genotypes), config.n_replicates))
    levels = rng.integers(0, len(NITROGEN_LEVELS), size=n_plots)
    density_eps = rng.standard_normal(n_plots)
    yield_eps = rng.standard_normal(n_plots)

    plots = []
    for i, cell in enumerate(cells):
        g = int(genotypes[i])
        level = int(levels[i])
        density = genotype_effect[g] + 0.1 * (level - 1) + config.density_noise * density_eps[i]
        density = float(np.clip(density, 0.0, 1.0))
        nitrogen = NITROGEN_LEVELS[level]
        y = yield_function(density, nitrogen) + config.yield_noise * yield_eps[i]
        plots.append(
            PlotState(
                plot_id=i,
                row=int(cell // config.cols),
                col=int(cell % config.cols),
                genotype_id=g,
                nitrogen_level=nitrogen,
                canopy_density=density,
                yield_value=float(max(y, 0.0)),
            )
        )
    return Scene(config=config, seed=seed, plots=tuple(plots))


def resize_bilinear(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of an HxWxC array (half-pixel centres, no antialiasing)."""
    if image.shape[:2] == tuple(size):
        return image.copy()
    t = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float64)).permute(2, 0, 1)[None]
    out = F.interpolate(t, size=size, mode="bilinear", align_corners=False)
    return out[0].permute(1, 2, 0).numpy()


def degrade(image: np.ndarray, sigma: float = 4.0, factor: int = 4) -> np.ndarray:
    """Satellite-like degradation: blur, decimate by ``factor``, upsample back."""
    h, w = image.shape[:2]
    blurred = gaussian_filter(image, sigma=(sigma, sigma, 0), mode="reflect") if sigma > 0 else image
    if factor > 1:
        small = blurred[factor // 2 :: factor, factor // 2 :: factor]
        blurred = resize_bilinear(small, (h, w))
    return np.clip(blurred, 0.0, 1.0)


def render_plot(
    scene: Scene, plot: PlotState, timepoint: int = 0, n_timepoints: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render the raw (long-axis horizontal) plot images.

    Returns ``(sat_rgb, sat_nir, uav_rgb)``; all arrays are
    ``plot_size x plot_size*plot_aspect`` and lie in [0, 1].
    """
    cfg = scene.config
    h, w = cfg.plot_size, cfg.plot_size * cfg.plot_aspect
    rng = stream(scene.seed, "texture", cfg.location_id, plot.plot_id)
    t_rng = stream(scene.seed, "texture-t", cfg.location_id, plot.plot_id, timepoint)

    growth = (timepoint + 1) / n_timepoints
    density = plot.canopy_density * (0.4 + 0.6 * growth)

    # crop rows run along the long axis; texture is shared across timepoints
    y = np.arange(h)[:, None]
    period = max(h // 6, 2)
    phase = rng.uniform(0, 2 * np.pi)
    rows = 0.5 + 0.5 * np.cos(2 * np.pi * y / period + phase)
    texture = gaussian_filter(rng.standard_normal((h, w)), sigma=3.0)
    texture /= texture.std() + 1e-12
    jitter = gaussian_filter(t_rng.standard_normal((h, w)), sigma=3.0)
    jitter /= jitter.std() + 1e-12
    veg = np.clip(density * (0.4 + 1.2 * rows) + 0.15 * texture + 0.05 * jitter, 0.0, 1.0)

    n_idx = NITROGEN_LEVELS.index(plot.nitrogen_level)
    leaf = np.array([0.12, 0.38 + 0.06 * n_idx, 0.10])
    uav = (1 - veg)[..., None] * SOIL_RGB + veg[..., None] * leaf
    uav = uav + cfg.pixel_noise * t_rng.standard_normal(uav.shape)
    uav = np.clip(uav, 0.0, 1.0)
    nir = ((1 - veg) * SOIL_NIR + veg * LEAF_NIR)[..., None]

    sat = degrade(uav, cfg.blur_sigma, cfg.downsample)
    sat_nir = degrade(nir, cfg.blur_sigma, cfg.downsample)
    return sat, sat_nir, uav


# ---------------------------------------------------------------------------
# Plot cropping


def crop_offsets(long_side: int, short_side: int) -> tuple[int, int, int]:
    """Long-axis offsets of the three square subplot crops."""
    if long_side < 1 or short_side < 1:
        raise InputError("plot dimensions must be positive")
    if long_side < short_side:
        raise InputError("long side shorter than short side")
    return 0, (long_side - short_side) // 2, long_side - short_side


def crop_subplots(raw: np.ndarray) -> list[np.ndarray]:
    """Cut three squares of side ``min(H, W)`` at the start, centre and end of the long axis."""
    if raw.ndim != 3 or raw.shape[0] < 1 or raw.shape[1] < 1:
        raise InputError(f"expected a non-empty HxWxC array, got shape {raw.shape}")
    h, w = raw.shape[:2]
    s = min(h, w)
    offsets = crop_offsets(max(h, w), s)
    if w >= h:
        return [raw[:, o : o + s].copy() for o in offsets]
    return [raw[o : o + s, :].copy() for o in offsets]


def plot_to_pairs(
    sat_raw: np.ndarray,
    uav_raw: np.ndarray,
    *,
    size: int = IMAGE_SIZE,
    aspect_tol: float = 0.02,
    **labels,
) -> list[PlotPair]:
    """Crop a raw plot pair into three resized subplot :class:`PlotPair` samples.

    The two rasters may have different pixel resolutions but must cover the
    same footprint, i.e. agree in aspect ratio within ``aspect_tol``.
    """
    ar_sat = sat_raw.shape[1] / sat_raw.shape[0]
    ar_uav = uav_raw.shape[1] / uav_raw.shape[0]
    if abs(ar_sat - ar_uav) > aspect_tol * max(ar_sat, ar_uav):
        raise DimensionMismatchError(
            f"satellite {sat_raw.shape[:2]} and UAV {uav_raw.shape[:2]} footprints differ"
        )
    if sat_raw.shape[2] not in (3, 4) or uav_raw.shape[2] < 3:
        raise InputError("satellite needs 3 or 4 channels, UAV at least 3")
    pairs = []
    sat_crops = crop_subplots(sat_raw)
    uav_crops = crop_subplots(uav_raw[..., :3])
    for k, (s, u) in enumerate(zip(sat_crops, uav_crops)):
        s = np.clip(resize_bilinear(s, (size, size)), 0.0, 1.0)
        u = np.clip(resize_bilinear(u, (size, size)), 0.0, 1.0)
        nir = s[..., 3:4] if s.shape[2] == 4 else None
        pairs.append(PlotPair(sat_image=s[..., :3], uav_image=u, sat_nir=nir, subplot_id=k, **labels))
    return pairs


def scene_pairs(scene: Scene, timepoint: int = 0, n_timepoints: int = 1) -> list[PlotPair]:
    """Render every plot of a scene and crop it into subplot pairs."""
    pairs = []
    for plot in scene.plots:
        sat, nir, uav = render_plot(scene, plot, timepoint, n_timepoints)
        pairs.extend(
            plot_to_pairs(
                np.concatenate([sat, nir], axis=2),
                uav,
                genotype_id=plot.genotype_id,
                nitrogen_level=plot.nitrogen_level,
                yield_value=plot.yield_value,
                location_id=scene.config.location_id,
                timepoint_id=timepoint,
                plot_id=plot.plot_id,
                field_row=plot.row,
                field_col=plot.col,
            )
        )
    return pairs


# ---------------------------------------------------------------------------
# Dataset I/O


def read_raster(path: Path) -> np.ndarray:
    """Read an 8/16-bit (or float) raster as HxWxC float64 in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"image not found: {path}")
    if path.suffix.lower() in (".tif", ".tiff"):
        import tifffile

        arr = tifffile.imread(path)
    else:
        arr = np.asarray(Image.open(path))
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.dtype == np.uint8:
        out = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        out = arr.astype(np.float64) / 65535.0
    elif np.issubdtype(arr.dtype, np.floating):
        out = arr.astype(np.float64)
    else:
        raise InputError(f"unsupported pixel type {arr.dtype} in {path}")
    if np.isnan(out).any():
        raise InputError(f"NaN pixels in {path}")
    return out


def write_raster(path: Path, image: np.ndarray, bit_depth: int = 16) -> None:
    """Write an HxWxC [0, 1] array losslessly (TIFF, or PNG for 8-bit RGB)."""
    path = Path(path)
    scale = {8: 255, 16: 65535}[bit_depth]
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    arr = np.round(np.clip(image, 0.0, 1.0) * scale).astype(dtype)
    if path.suffix.lower() in (".tif", ".tiff"):
        import tifffile

        tifffile.imwrite(path, arr, photometric="rgb" if arr.shape[2] == 3 else "minisblack", planarconfig="contig")
    else:
        Image.fromarray(arr[..., 0] if arr.shape[2] == 1 else arr).save(path)


def write_synthetic_dataset(
    out_dir: Path,
    config: SceneGenConfig,
    seed: int,
    n_locations: int = 1,
    n_timepoints: int = 1,
    missing_yield_fraction: float = 0.0,
) -> Path:
    """Render scenes for each location/timepoint and write rasters plus a manifest."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    miss_rng = stream(seed, "missing-yield")
    records = []
    for loc in range(n_locations):
        cfg = SceneGenConfig(**{**config.__dict__, "location_id": loc})
        scene = generate_scene(cfg, seed)
        missing = miss_rng.random(len(scene.plots)) < missing_yield_fraction
        for t in range(n_timepoints):
            for plot in scene.plots:
                sat, nir, uav = render_plot(scene, plot, t, n_timepoints)
                stem = f"L{loc}_T{t}_P{plot.plot_id:04d}"
                sat_path = Path("images") / f"{stem}_sat.tif"
                uav_path = Path("images") / f"{stem}_uav.tif"
                write_raster(out_dir / sat_path, np.concatenate([sat, nir], axis=2))
                write_raster(out_dir / uav_path, uav)
                records.append(
                    {
                        "sat_path": sat_path.as_posix(),
                        "uav_path": uav_path.as_posix(),
                        "location_id": loc,
                        "timepoint_id": t,
                        "genotype_id": plot.genotype_id,
                        "nitrogen_level": plot.nitrogen_level,
                        "yield_value": MISSING if missing[plot.plot_id] else repr(plot.yield_value),
                        "plot_id": plot.plot_id,
                        "field_row": plot.row,
                        "field_col": plot.col,
                    }
                )
    write_manifest(out_dir / MANIFEST_NAME, records)
    return out_dir / MANIFEST_NAME


def write_manifest(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec.get(k, "") for k in MANIFEST_FIELDS})


def read_manifest(path: Path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise MissingInputError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    required = MANIFEST_FIELDS[:7]
    for i, row in enumerate(rows):
        absent = [k for k in required if k not in row or row[k] is None]
        if absent:
            raise InputError(f"manifest row {i} lacks fields {absent}")
    return rows


@dataclass(frozen=True)
class SplitSpec:
    """Location-based split: ``part`` is ``train``, ``eval`` or ``all``."""

    part: str = "all"
    holdout_location: int | None = None

    def keep(self, location_id: int) -> bool:
        if self.part == "all" or self.holdout_location is None:
            return True
        if self.part == "train":
            return location_id != self.holdout_location
        if self.part == "eval":
            return location_id == self.holdout_location
        raise ConfigError(f"unknown split part {self.part!r}")


def _parse_yield(value: str) -> float | None:
    value = (value or "").strip()
    if value.lower() in ("", MISSING, "nan", "na"):
        return None
    return float(value)


def load_dataset(
    path: Path, split: SplitSpec = SplitSpec(), *, subplots: bool = True, size: int = IMAGE_SIZE
) -> list[PlotPair]:
    """Load the manifest at ``path`` and return the pairs selected by ``split``.

    With ``subplots=True`` each record is cropped into three square subplots;
    otherwise each record must already be square and is only resized.
    Plots with missing yield are kept (``yield_value is None``).
    """
    path = Path(path)
    root = path if path.is_dir() else path.parent
    rows = read_manifest(path)
    locations = {int(r["location_id"]) for r in rows}
    if split.holdout_location is not None and split.holdout_location not in locations:
        raise InputError(f"unknown location id {split.holdout_location}; have {sorted(locations)}")

    pairs: list[PlotPair] = []
    for i, row in enumerate(rows):
        loc = int(row["location_id"])
        if not split.keep(loc):
            continue
        sat = read_raster(root / row["sat_path"])
        uav = read_raster(root / row["uav_path"])
        labels = dict(
            genotype_id=int(row["genotype_id"]),
            nitrogen_level=row["nitrogen_level"].strip(),
            yield_value=_parse_yield(row["yield_value"]),
            location_id=loc,
            timepoint_id=int(row["timepoint_id"]),
            plot_id=int(row.get("plot_id") or i),
            field_row=int(row.get("field_row") or -1),
            field_col=int(row.get("field_col") or -1),
        )
        if subplots:
            pairs.extend(plot_to_pairs(sat, uav, size=size, **labels))
            continue
        if sat.shape[:2] != uav.shape[:2] or sat.shape[0] != sat.shape[1]:
            raise DimensionMismatchError(
                f"record {i}: satellite {sat.shape[:2]} and UAV {uav.shape[:2]} must be equal squares"
            )
        sat = np.clip(resize_bilinear(sat, (size, size)), 0.0, 1.0)
        uav = np.clip(resize_bilinear(uav[..., :3], (size, size)), 0.0, 1.0)
        nir = sat[..., 3:4] if sat.shape[2] == 4 else None
        pairs.append(PlotPair(sat_image=sat[..., :3], uav_image=uav, sat_nir=nir, **labels))
    logger.info("loaded %d pairs from %s (%s)", len(pairs), path, split)
    return pairs


def downstream_pairs(pairs: Sequence[PlotPair]) -> list[PlotPair]:
    """Pairs usable for yield-supervised analyses (missing yields excluded)."""
    return [p for p in pairs if p.has_yield]
