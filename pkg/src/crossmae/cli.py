"""``crossmae`` command line: one entry point, one subcommand per pipeline stage.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 missing input,
4 configuration error, 5 invalid input data, 6 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, CrossMAEError, MissingInputError

logger = logging.getLogger("crossmae")

MANIFEST_FILE = "run_manifest.json"


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def resolve_config(defaults: dict, file_cfg: dict, overrides: dict) -> dict:
    """Merge ``section -> key -> value`` mappings: flag > file > default.

    ``overrides`` uses dotted keys (``train.epochs``); ``None`` means unset.
    """
    out = {sec: dict(vals) for sec, vals in defaults.items()}
    for sec, vals in file_cfg.items():
        if sec not in out:
            raise ConfigError(f"unknown config section {sec!r}")
        if not isinstance(vals, dict):
            raise ConfigError(f"config section {sec!r} must be a mapping")
        for key, v in vals.items():
            if key not in out[sec]:
                raise ConfigError(f"unknown config key {sec}.{key}")
            out[sec][key] = v
    for dotted, v in overrides.items():
        if v is None:
            continue
        sec, key = dotted.split(".", 1)
        out[sec][key] = v
    return out


def _coerce(value: Any, default: Any) -> Any:
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return tuple(float(v) for v in value)
    return value


def build_dataclass(cls, values: dict):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in values:
            default = f.default if f.default is not dataclasses.MISSING else None
            try:
                kwargs[f.name] = _coerce(values[f.name], default)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {f.name}: {values[f.name]!r}") from exc
    return cls(**kwargs)


def _defaults(cls) -> dict:
    return {f.name: f.default for f in dataclasses.fields(cls)}


def pretrain_defaults() -> dict:
    from .masking import MaskingConfig
    from .model import ModelConfig
    from .trainer import TrainConfig

    mask = _defaults(MaskingConfig)
    mask.pop("tokens_per_modality")
    mask["seed"] = None
    return {"model": _defaults(ModelConfig), "train": _defaults(TrainConfig), "mask": mask}


def build_configs(resolved: dict):
    from .masking import MaskingConfig
    from .model import ModelConfig
    from .trainer import TrainConfig

    model_cfg = build_dataclass(ModelConfig, resolved["model"])
    train_vals = dict(resolved["train"])
    if resolved["mask"].get("seed") is not None:
        train_vals["mask_seed"] = resolved["mask"]["seed"]
    train_cfg = build_dataclass(TrainConfig, train_vals)
    mask_cfg = build_dataclass(
        MaskingConfig, {**resolved["mask"], "tokens_per_modality": model_cfg.grid.num_patches}
    )
    return model_cfg, train_cfg, mask_cfg


# ---------------------------------------------------------------------------
# run bookkeeping


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    config: dict
    seeds: dict
    inputs: dict
    outputs: dict
    artifact_hashes: dict = dataclasses.field(default_factory=dict)
    tool_version: str = __version__
    python: str = platform.python_version()
    timestamp: float = dataclasses.field(default_factory=time.time)

    def write(self, directory: Path) -> Path:
        for name, p in self.outputs.items():
            files = [Path(p)] if Path(p).is_file() else sorted(Path(p).rglob("*")) if Path(p).is_dir() else []
            for f in files:
                if f.is_file() and f.name != MANIFEST_FILE and not f.name.endswith(".lock"):
                    self.artifact_hashes[str(f)] = _sha256(f)
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_FILE
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=str))
        return path


@contextmanager
def output_lock(target: Path):
    """Refuse concurrent runs writing the same output."""
    from filelock import FileLock, Timeout

    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(target) + ".lock")
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise CrossMAEError(f"another run is writing {target}") from None
    try:
        yield
    finally:
        lock.release()
        Path(str(target) + ".lock").unlink(missing_ok=True)


def _manifest_dir(out: Path) -> Path:
    out = Path(out)
    return out if out.suffix == "" else out.parent


def _write_df(df, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.10g")
    return path


# ---------------------------------------------------------------------------
# subcommands


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 4x4, got {text!r}") from None


def cmd_synth(args) -> int:
    from .datagen import SceneGenConfig, write_synthetic_dataset

    rows, cols = args.grid
    cfg = SceneGenConfig(
        rows=rows,
        cols=cols,
        n_genotypes=args.genotypes,
        n_replicates=args.replicates,
        yield_noise=args.yield_noise,
        blur_sigma=args.blur_sigma,
        plot_size=args.plot_size,
    )
    cfg.validate()
    out = Path(args.out)
    with output_lock(out):
        manifest = write_synthetic_dataset(
            out, cfg, args.seed, args.locations, args.timepoints, args.missing_yield_fraction
        )
        RunManifest(
            "datagen synth",
            {"scene": dataclasses.asdict(cfg), "locations": args.locations, "timepoints": args.timepoints},
            {"data": args.seed},
            {},
            {"manifest": str(manifest)},
        ).write(out)
    print(manifest)
    return 0


def _pretrain_overrides(args) -> dict:
    return {
        "train.epochs": args.epochs,
        "train.batch_size": args.batch_size,
        "train.base_lr": args.base_lr,
        "train.warmup_epochs": args.warmup_epochs,
        "train.seed": args.seed,
        "train.holdout_location": args.holdout,
        "mask.alpha_sat": args.alpha_sat,
        "mask.alpha_uav": args.alpha_uav,
        "mask.total_visible": args.total_visible,
        "model.embed_dim": args.embed_dim,
        "model.depth": args.depth,
        "model.heads": args.heads,
        "model.decoder_dim": args.decoder_dim,
        "model.decoder_heads": args.decoder_heads,
    }


def _add_pretrain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON file with model/train/mask sections")
    p.add_argument("--data", required=True, help="dataset directory or manifest")
    p.add_argument("--holdout", type=int, help="location id excluded from training")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--base-lr", type=float)
    p.add_argument("--warmup-epochs", type=float)
    p.add_argument("--alpha-sat", type=float)
    p.add_argument("--alpha-uav", type=float)
    p.add_argument("--total-visible", type=int)
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--decoder-dim", type=int)
    p.add_argument("--decoder-heads", type=int)


def cmd_pretrain(args) -> int:
    from .datagen import load_dataset
    from .trainer import train

    resolved = resolve_config(pretrain_defaults(), load_config_file(args.config), _pretrain_overrides(args))
    model_cfg, train_cfg, mask_cfg = build_configs(resolved)
    pairs = load_dataset(args.data, size=model_cfg.image_size)
    out = Path(args.out)
    with output_lock(out):
        result = train(pairs, model_cfg, train_cfg, mask_cfg, out_dir=out)
        RunManifest(
            "pretrain",
            resolved,
            {"seed": train_cfg.seed},
            {"data": str(args.data), "config": args.config},
            {"checkpoint": str(result.checkpoint), "log": str(out / "train_log.jsonl")},
        ).write(out)
    first, last = result.log.epochs[0]["loss"], result.log.epochs[-1]["loss"]
    print(f"{result.checkpoint}  loss {first:.5f} -> {last:.5f}")
    return 0


def _prediction_name(p) -> str:
    return f"L{p.location_id}_T{p.timepoint_id}_P{p.plot_id:04d}_S{p.subplot_id}.tif"


def cmd_generate(args) -> int:
    import pandas as pd

    from .datagen import SplitSpec, load_dataset, read_manifest, write_raster
    from .inference import GenerationRequest, TintSpec, comparison_figure, generate
    from .trainer import load_checkpoint

    model, payload = load_checkpoint(args.ckpt)
    split = SplitSpec(args.split, args.holdout)
    pairs = load_dataset(args.data, split, size=model.grid.image_size)
    tint = TintSpec.from_preset(args.tint) if args.tint else None
    req = GenerationRequest(
        pairs,
        args.mode,
        uav_indices=args.uav_indices,
        num_conditioning=args.k,
        tint=tint,
        seed=args.seed,
    )
    rows = read_manifest(args.data)
    bit_depth = args.bit_depth or _input_bit_depth(args.data, rows)
    out = Path(args.out)
    with output_lock(out):
        result = generate(model, req)
        (out / "pred").mkdir(parents=True, exist_ok=True)
        records = []
        for p, img, mse in zip(pairs, result.images, result.mse):
            name = Path("pred") / _prediction_name(p)
            write_raster(out / name, img, bit_depth)
            records.append(
                dict(
                    location_id=p.location_id,
                    timepoint_id=p.timepoint_id,
                    plot_id=p.plot_id,
                    subplot_id=p.subplot_id,
                    path=name.as_posix(),
                    target=result.target,
                    mse=mse,
                )
            )
        _write_df(pd.DataFrame(records), out / "predictions.csv")
        figures = {}
        if args.mode == "pseudo_uav" and any(p.field_row >= 0 for p in pairs):
            for loc in sorted({p.location_id for p in pairs}):
                fig = comparison_figure(pairs, result.images, location_id=loc, scale=args.mosaic_scale)
                path = out / f"mosaic_L{loc}.png"
                write_raster(path, fig, 8)
                figures[f"mosaic_L{loc}"] = str(path)
        RunManifest(
            "generate",
            {"mode": args.mode, "tint": args.tint, "k": args.k, "split": args.split, "holdout": args.holdout},
            {"conditioning": args.seed},
            {"ckpt": str(args.ckpt), "data": str(args.data)},
            {"predictions": str(out / "predictions.csv"), "pred": str(out / "pred"), **figures},
        ).write(out)
    print(f"{len(pairs)} images, mean MSE {float(np.mean(result.mse)):.5f}")
    return 0


def _input_bit_depth(data, rows) -> int:
    root = Path(data) if Path(data).is_dir() else Path(data).parent
    if not rows:
        return 16
    path = root / rows[0]["uav_path"]
    if path.suffix.lower() in (".tif", ".tiff"):
        import tifffile

        dtype = tifffile.TiffFile(path).pages[0].dtype
    else:
        from PIL import Image

        dtype = np.asarray(Image.open(path)).dtype
    return 8 if dtype == np.uint8 else 16


def _read_alpha_grid(path: str) -> tuple[tuple[float, float], ...]:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"grid file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        import pandas as pd

        df = pd.read_csv(path)
        return tuple((float(a), float(b)) for a, b in zip(df["alpha_sat"], df["alpha_uav"]))
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("alphas", [])
    try:
        return tuple((float(a), float(b)) for a, b in data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: expected a list of [alpha_sat, alpha_uav] pairs") from exc


def cmd_sweep(args) -> int:
    from .datagen import load_dataset
    from .inference import SweepSpec, run_sweep

    resolved = resolve_config(pretrain_defaults(), load_config_file(args.config), _pretrain_overrides(args))
    model_cfg, train_cfg, mask_cfg = build_configs(resolved)
    spec = SweepSpec(_read_alpha_grid(args.grid), args.eval_split)
    pairs = load_dataset(args.data, size=model_cfg.image_size)
    out = Path(args.out)
    with output_lock(out):
        table = run_sweep(
            spec, pairs, train_cfg, model_cfg, total_visible=mask_cfg.total_visible, cache_dir=args.cache
        )
        _write_df(table, out)
        RunManifest(
            "sweep",
            {**resolved, "alphas": spec.alphas, "eval_split": spec.eval_split},
            {"seed": train_cfg.seed},
            {"data": str(args.data), "grid": str(args.grid)},
            {"table": str(out)},
        ).write(_manifest_dir(out) / f"{out.stem}_manifest")
    print(table.to_string(index=False))
    return 0


def cmd_maskdemo(args) -> int:
    from .datagen import SceneGenConfig, generate_scene, load_dataset, scene_pairs, write_raster
    from .inference import render_mask_plan
    from .masking import MaskingConfig, sample_mask_plan
    from .rng import stream

    cfg = MaskingConfig(args.alpha_sat, args.alpha_uav, args.total_visible, (224 // 16) ** 2)
    if args.data:
        pairs = load_dataset(args.data)[: args.samples]
    else:
        scene = generate_scene(SceneGenConfig(rows=2, cols=2, n_genotypes=2, n_replicates=2), args.seed)
        pairs = scene_pairs(scene)[: args.samples]
    rng = stream(args.seed, "mask")
    panels = []
    for p in pairs:
        plan = sample_mask_plan(cfg, rng)
        panels.append(render_mask_plan(p.sat_image, p.uav_image, plan))
        panels.append(np.ones((8, panels[-1].shape[1], 3)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_raster(out, np.concatenate(panels[:-1], axis=0), 8)
    RunManifest(
        "maskdemo", dataclasses.asdict(cfg), {"mask": args.seed}, {"data": args.data}, {"figure": str(out)}
    ).write(_manifest_dir(out) / f"{out.stem}_manifest")
    print(out)
    return 0


def _load_predictions(pred_dir: Path, pairs) -> dict[str, np.ndarray]:
    import pandas as pd

    from .datagen import read_raster

    pred_dir = Path(pred_dir)
    index = pred_dir / "predictions.csv"
    if not index.exists():
        raise MissingInputError(f"no predictions.csv in {pred_dir}")
    df = pd.read_csv(index)
    key = ["location_id", "timepoint_id", "plot_id", "subplot_id"]
    lookup = {tuple(r[k] for k in key): r for r in df.to_dict("records")}
    out: dict[str, list] = {}
    for p in pairs:
        rec = lookup.get((p.location_id, p.timepoint_id, p.plot_id, p.subplot_id))
        if rec is None:
            raise MissingInputError(f"no prediction for plot {p.plot_id} subplot {p.subplot_id}")
        out.setdefault(f"pred_{rec['target']}", []).append(read_raster(pred_dir / rec["path"]))
    return {k: np.stack(v) for k, v in out.items()}


def cmd_features(args) -> int:
    from .datagen import load_dataset
    from .phenotyping.features import MODALITY_SETS, feature_table

    pairs = load_dataset(args.data)
    pairs = [p for p in pairs if p.has_yield]
    preds = _load_predictions(args.pred, pairs) if args.pred else None
    out = Path(args.out)
    sets = args.modality_set or list(MODALITY_SETS)
    written = {}
    with output_lock(out):
        for s in sets:
            needs_pred = any(src.startswith("pred_") for src, _ in MODALITY_SETS.get(s, ()))
            if needs_pred and preds is None:
                raise ConfigError(f"modality set {s!r} needs --pred")
            df = feature_table(pairs, s, preds, aggregate=args.aggregate)
            df.insert(0, "modality_set", s)
            path = out if out.suffix == ".csv" and len(sets) == 1 else out / f"features_{s}.csv"
            written[s] = str(_write_df(df, path))
        RunManifest(
            "features",
            {"modality_sets": sets, "aggregate": args.aggregate},
            {},
            {"data": str(args.data), "pred": args.pred},
            written,
        ).write(_manifest_dir(out) if out.suffix else out)
    for s, p in written.items():
        print(f"{s}: {p}")
    return 0


TASK_ALIASES = {"yield": "yield_regression", "nitrogen": "nitrogen_classification"}


def _feature_files(paths: Sequence[str]) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("features_*.csv")))
        elif p.exists():
            files.append(p)
        else:
            raise MissingInputError(f"features file not found: {p}")
    if not files:
        raise MissingInputError("no feature tables found")
    return files


def cmd_evaluate(args) -> int:
    import pandas as pd

    from .phenotyping.evaluate import evaluate_table, summarize_report

    task = TASK_ALIASES[args.task]
    family = "logistic" if task == "nitrogen_classification" and args.model in ("lasso", "pls", "linear") else args.model
    if family != args.model:
        logger.warning("%s is regression-only; using logistic regression for %s", args.model, task)
    files = _feature_files(args.features)
    tables = {}
    for f in files:
        df = pd.read_csv(f)
        set_name = str(df["modality_set"].iloc[0]) if "modality_set" in df and len(df) else f.stem
        tables[set_name] = df
    out = Path(args.out)
    with output_lock(out):
        per_fold = evaluate_table(tables, task, family, seed=args.seed, n_candidates=args.candidates)
        _write_df(per_fold, out)
        summary = summarize_report(per_fold)
        summary_path = _write_df(summary, out.with_name(out.stem + "_summary.csv"))
        RunManifest(
            "evaluate",
            {"task": task, "model": family, "candidates": args.candidates},
            {"search": args.seed},
            {"features": [str(f) for f in files]},
            {"per_fold": str(out), "summary": str(summary_path)},
        ).write(_manifest_dir(out) / f"{out.stem}_manifest")
    print(summary.to_string(index=False))
    return 0


def cmd_report(args) -> int:
    import pandas as pd

    from .phenotyping.report import comparison_tables, model_comparison_chart

    frames = []
    for p in args.eval:
        if not Path(p).exists():
            raise MissingInputError(f"evaluation table not found: {p}")
        frames.append(pd.read_csv(p))
    per_fold = pd.concat(frames, ignore_index=True)
    out = Path(args.out)
    written = {}
    with output_lock(out):
        out.mkdir(parents=True, exist_ok=True)
        for name, table in comparison_tables(per_fold, args.model).items():
            path = out / f"table_{name}.csv"
            table.to_csv(path)
            written[name] = str(path)
        written["chart"] = str(model_comparison_chart(per_fold, out / "model_comparison.png"))
        if args.sweep:
            if not Path(args.sweep).exists():
                raise MissingInputError(f"sweep table not found: {args.sweep}")
            sweep = pd.read_csv(args.sweep)
            written["sweep"] = str(_write_df(sweep, out / "table_masking_sweep.csv"))
        RunManifest("report", {"model": args.model}, {}, {"eval": args.eval, "sweep": args.sweep}, written).write(out)
    for k, v in written.items():
        print(f"{k}: {v}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossmae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"crossmae {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    dg = sub.add_parser("datagen", help="dataset synthesis")
    dg_sub = dg.add_subparsers(dest="datagen_command", required=True, metavar="ACTION")
    p = dg_sub.add_parser("synth", help="render a synthetic paired dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=_parse_grid, default=(4, 4), help="field grid ROWSxCOLS")
    p.add_argument("--genotypes", type=int, default=4)
    p.add_argument("--replicates", type=int, default=4)
    p.add_argument("--locations", type=int, default=2)
    p.add_argument("--timepoints", type=int, default=1)
    p.add_argument("--missing-yield-fraction", type=float, default=0.0)
    p.add_argument("--yield-noise", type=float, default=0.5)
    p.add_argument("--blur-sigma", type=float, default=4.0)
    p.add_argument("--plot-size", type=int, default=224)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="pretrain the cross-modal masked autoencoder")
    _add_pretrain_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("generate", help="reconstruct pseudo-UAV (or pseudo-satellite) imagery")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("pseudo_uav", "pseudo_sat", "conditioned"), default="pseudo_uav")
    p.add_argument("--tint", choices=("morning", "afternoon", "evening"))
    p.add_argument("--k", type=int, default=2, help="UAV patches given in conditioned mode")
    p.add_argument("--uav-indices", type=int, nargs="+")
    p.add_argument("--split", choices=("all", "train", "eval"), default="all")
    p.add_argument("--holdout", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", type=int, choices=(8, 16))
    p.add_argument("--mosaic-scale", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep", help="reconstruction MSE across Dirichlet concentration pairs")
    _add_pretrain_flags(p)
    p.add_argument("--grid", required=True, help="CSV (alpha_sat,alpha_uav) or YAML list of pairs")
    p.add_argument("--eval-split", choices=("all", "holdout"), default="all")
    p.add_argument("--cache", default=os.environ.get("CROSSMAE_CACHE"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("maskdemo", help="render sampled masks over a plot pair")
    p.add_argument("--data")
    p.add_argument("--alpha-sat", type=float, default=0.9)
    p.add_argument("--alpha-uav", type=float, default=0.1)
    p.add_argument("--total-visible", type=int, default=66)
    p.add_argument("--samples", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_maskdemo)

    p = sub.add_parser("features", help="per-plot band/index statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--modality-set", action="append", help="repeatable; default: all sets")
    p.add_argument("--pred", help="output directory of `generate`")
    p.add_argument("--aggregate", choices=("subplot", "plot-mean"), default="subplot")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("evaluate", help="genotype-grouped CV evaluation")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--task", choices=tuple(TASK_ALIASES), required=True)
    p.add_argument("--model", choices=("pls", "svm", "lasso", "gboost", "xgboost", "linear", "logistic"), default="xgboost")
    p.add_argument("--candidates", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="comparison tables and chart")
    p.add_argument("--eval", nargs="+", required=True)
    p.add_argument("--sweep")
    p.add_argument("--model")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except CrossMAEError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error [MissingInput]: {exc}", file=sys.stderr)
        return MissingInputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
