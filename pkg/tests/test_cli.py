import json
import pathlib

import pandas as pd
import pytest
import yaml

from crossmae import cli
from crossmae.cli import build_configs, main, pretrain_defaults, resolve_config
from crossmae.errors import ConfigError


def test_help(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for sub in ("datagen", "pretrain", "generate", "sweep", "maskdemo", "features", "evaluate", "report"):
        assert sub in out


def test_unknown_subcommand():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_precedence_flag_over_file_over_default():
    defaults = pretrain_defaults()
    resolved = resolve_config(
        defaults,
        {"train": {"epochs": 70, "batch_size": 3}, "mask": {"alpha_sat": 1.5}},
        {"train.epochs": 90, "train.base_lr": None},
    )
    assert resolved["train"]["epochs"] == 90  # flag
    assert resolved["train"]["batch_size"] == 3  # file
    assert resolved["train"]["base_lr"] == 1e-4  # default
    _, train_cfg, mask_cfg = build_configs(resolved)
    assert train_cfg.epochs == 90 and mask_cfg.alpha_sat == 1.5 and mask_cfg.alpha_uav == 0.1


def test_yaml_scientific_strings_are_coerced():
    resolved = resolve_config(pretrain_defaults(), yaml.safe_load("train: {base_lr: 1e-3}"), {})
    assert build_configs(resolved)[1].base_lr == 1e-3


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        resolve_config(pretrain_defaults(), {"train": {"epochz": 1}}, {})
    with pytest.raises(ConfigError):
        resolve_config(pretrain_defaults(), {"optimizer": {}}, {})


def test_exit_codes(tmp_path):
    assert main(["pretrain", "--data", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 3
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: [1, 2")
    assert main(["pretrain", "--config", str(bad), "--data", str(tmp_path), "--out", str(tmp_path / "o")]) == 4
    assert main(["generate", "--ckpt", str(tmp_path / "x.pt"), "--data", str(tmp_path), "--out", str(tmp_path / "g")]) == 3


def test_lock_refuses_concurrent_writer(tmp_path):
    from filelock import FileLock

    target = tmp_path / "out"
    with FileLock(str(target) + ".lock"):
        with pytest.raises(cli.CrossMAEError):
            with cli.output_lock(target):
                pass


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "model": {"image_size": 32, "patch_size": 8, "embed_dim": 16, "depth": 1, "heads": 2,
                          "decoder_dim": 16, "decoder_depth": 1, "decoder_heads": 2},
                "train": {"epochs": 2, "batch_size": 8, "warmup_epochs": 1, "base_lr": 1e-3},
                "mask": {"total_visible": 6},
            }
        )
    )
    data = root / "data"
    assert main(["datagen", "synth", "--grid", "2x2", "--genotypes", "2", "--replicates", "2",
                 "--locations", "2", "--plot-size", "32", "--seed", "1", "--out", str(data)]) == 0
    return root, cfg, data


def test_small_pipeline(workspace):
    root, cfg, data = workspace
    run = root / "run"
    assert main(["pretrain", "--config", str(cfg), "--data", str(data), "--epochs", "1", "--holdout", "1",
                 "--out", str(run)]) == 0
    summary = json.loads((run / "train_summary.json").read_text())
    assert summary["train_config"]["epochs"] == 1 and summary["train_config"]["holdout_location"] == 1
    manifest = json.loads((run / "run_manifest.json").read_text())
    assert manifest["subcommand"] == "pretrain" and manifest["artifact_hashes"]

    gen = root / "gen"
    assert main(["generate", "--ckpt", str(run / "checkpoint.pt"), "--data", str(data), "--out", str(gen)]) == 0
    preds = pd.read_csv(gen / "predictions.csv")
    assert len(preds) == 24 and (gen / "mosaic_L0.png").exists()

    feats = root / "feats"
    assert main(["features", "--data", str(data), "--pred", str(gen), "--modality-set", "pred_uav_rgb",
                 "--modality-set", "sat_rgb", "--out", str(feats)]) == 0
    table = pd.read_csv(feats / "features_pred_uav_rgb.csv")
    assert (table["modality_set"] == "pred_uav_rgb").all()

    ev = root / "eval.csv"
    assert main(["evaluate", "--features", str(feats), "--task", "nitrogen", "--model", "logistic",
                 "--candidates", "2", "--out", str(ev)]) == 0
    assert main(["report", "--eval", str(ev), "--out", str(root / "report")]) == 0
    assert (root / "report" / "table_real_vs_predicted.csv").exists()
    assert (root / "report" / "model_comparison.png").exists()


def test_pred_set_without_predictions(workspace):
    root, _, data = workspace
    assert main(["features", "--data", str(data), "--modality-set", "pred_uav_rgb", "--out", str(root / "f2")]) == 4


def test_bad_holdout_is_input_error(workspace):
    root, cfg, data = workspace
    assert main(["sweep", "--config", str(cfg), "--data", str(data), "--grid", str(cfg), "--out",
                 str(root / "s.csv"), "--holdout", "7", "--eval-split", "holdout"]) in (4, 5)


def test_maskdemo(tmp_path):
    assert main(["maskdemo", "--samples", "1", "--out", str(tmp_path / "m.png")]) == 0
    assert (tmp_path / "m.png").exists()


def _hashes(directory):
    manifest = json.loads((directory / "run_manifest.json").read_text())
    return {str(pathlib.Path(k).relative_to(directory)): v for k, v in manifest["artifact_hashes"].items()}


def test_reruns_are_byte_identical(workspace, tmp_path):
    _, cfg, data = workspace
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["datagen", "synth", "--grid", "2x2", "--genotypes", "2", "--replicates", "2",
                     "--plot-size", "32", "--seed", "3", "--out", str(d / "data")]) == 0
        assert main(["pretrain", "--config", str(cfg), "--data", str(d / "data"), "--epochs", "1",
                     "--out", str(d / "run")]) == 0
        run_hashes = _hashes(d / "run")
        del run_hashes["train_log.jsonl"]  # carries wall-clock timings
        log = [json.loads(line) for line in (d / "run" / "train_log.jsonl").read_text().splitlines()]
        for rec in log:
            rec.pop("wall_time")
        outs.append((_hashes(d / "data"), run_hashes, log))
    assert outs[0] == outs[1]
