"""Acceptance criteria 1-10 at their stated tolerances and time budgets.

Each test records a one-line verdict that is printed in the pytest summary
(and by running this file directly).
"""

import dataclasses
import time

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from _oracles import gradient_check, gradient_failures, pseudo_uav_mse, zero_head_mse
from _report import record
from crossmae.cli import main
from crossmae.datagen import SceneGenConfig, generate_scene, load_dataset, scene_pairs
from crossmae.inference import TINT_PRESETS, GenerationRequest, TintSpec, apply_tint, generate
from crossmae.masking import MaskingConfig, sample_mask_batch
from crossmae.model import ModelConfig, build_model
from crossmae.phenotyping.cv import build_cv
from crossmae.phenotyping.evaluate import evaluate
from crossmae.phenotyping.indices import compute_index
from crossmae.tokenizer import patchify, unpatchify
from crossmae.trainer import TrainConfig, lr_at, train

ALPHA_GRID = ((1.0, 1.0), (1.2, 0.8), (1.5, 0.5), (0.7, 0.3), (0.9, 0.1))


def _verdict(number, checks, elapsed, budget=None):
    ok = all(v for v in checks.values())
    if budget is not None:
        checks = {**checks, f"time {elapsed:.1f}s < {budget}s": elapsed < budget}
        ok = ok and elapsed < budget
    failed = [k for k, v in checks.items() if not v]
    record(number, ok, "; ".join(failed) if failed else ", ".join(checks))
    assert ok, failed


def test_c01_masking_arithmetic():
    t0 = time.perf_counter()
    n, p = 100_000, 196
    checks = {}
    rng = np.random.default_rng(2024)
    for a_sat, a_uav in ALPHA_GRID:
        cfg = MaskingConfig(a_sat, a_uav, 66, p)
        lam, counts = [], {"sat": np.zeros(p), "uav": np.zeros(p)}
        sums_ok = True
        for _ in range(10):
            b = sample_mask_batch(cfg, rng, n // 10)
            sums_ok &= bool(((b.visible["sat"].sum(1) + b.visible["uav"].sum(1)) == 66).all())
            lam.append(b.lambda_sat)
            for m in counts:
                counts[m] += b.visible[m].sum(0)
        lam = np.concatenate(lam)
        se = lam.std(ddof=1) / np.sqrt(n)
        z = abs(lam.mean() - a_sat / (a_sat + a_uav)) / se
        chi_p = min(stats.chisquare(c).pvalue for c in counts.values())
        checks[f"({a_sat},{a_uav}) sum=66"] = sums_ok
        checks[f"({a_sat},{a_uav}) |z|={z:.2f}<5"] = z < 5
        checks[f"({a_sat},{a_uav}) chi2 p={chi_p:.3g}>0.001"] = chi_p > 0.001
    _verdict(1, checks, time.perf_counter() - t0, 30)


def test_c02_tokenizer_round_trip():
    t0 = time.perf_counter()
    images = np.random.default_rng(0).random((100, 224, 224, 3))
    exact = all(np.array_equal(unpatchify(patchify(im, 16), 16, 3), im) for im in images)
    _verdict(2, {"bit-exact on 100 images": exact}, time.perf_counter() - t0, 5)


def test_c03_gradient_check():
    t0 = time.perf_counter()
    cfg = ModelConfig(
        image_size=16, patch_size=4, embed_dim=8, depth=1, heads=1, decoder_dim=8, decoder_depth=1, decoder_heads=1
    )
    errors = gradient_check(cfg)  # every element of every parameter
    bad = gradient_failures(errors, rtol=1e-4)
    worst = max(rel for rel, na, nn_ in errors.values() if max(na, nn_) >= 1e-8)
    zero = sorted(n for n, (_, na, nn_) in errors.items() if max(na, nn_) < 1e-8)
    checks = {
        f"{len(errors)} groups, max rel err {worst:.2e} < 1e-4": not bad,
        f"zero-gradient groups are key biases only ({len(zero)})": all(n.endswith(".k.bias") for n in zero),
    }
    _verdict(3, checks, time.perf_counter() - t0, 120)


MEMO_MODEL = ModelConfig(embed_dim=64, depth=2, heads=4, decoder_dim=128, decoder_depth=2, decoder_heads=4)
MEMO_TRAIN = TrainConfig(epochs=500, batch_size=4, base_lr=1e-3, warmup_epochs=25, weight_decay=0.0)


@pytest.fixture(scope="module")
def memo_pairs():
    scene = generate_scene(SceneGenConfig(rows=2, cols=2, n_genotypes=2, n_replicates=2), seed=0)
    return scene_pairs(scene)[::3][:4]


def test_c04_memorization(memo_pairs):
    t0 = time.perf_counter()
    res = train(memo_pairs, MEMO_MODEL, MEMO_TRAIN, MaskingConfig(0.9, 0.1))
    steps = len(res.log.lr_trace)
    masked_uav = float(res.log.losses("loss_uav")[-1])
    pseudo = pseudo_uav_mse(res.model, memo_pairs)
    baseline = zero_head_mse(memo_pairs)
    checks = {
        f"steps {steps} <= 500": steps <= 500,
        f"masked-UAV MSE {masked_uav:.4f} < 0.01": masked_uav < 0.01,
        f"pseudo-UAV MSE {pseudo:.4f} < 0.01": pseudo < 0.01,
        f"zero-head baseline {baseline:.4f}": True,
    }
    _verdict(4, checks, time.perf_counter() - t0, 300)


def test_c05_lr_schedule():
    expected = {0: 1e-6, 40: 1e-4, 100: 0.0, 70: 5e-5}
    checks = {f"lr({e})={lr_at(e):.3g}": abs(lr_at(e) - v) <= 1e-12 for e, v in expected.items()}
    _verdict(5, checks, 0.0)


def test_c06_pseudo_uav_isolation(pairs):
    model = build_model(ModelConfig(), seed=0)
    rng = np.random.default_rng(1)
    noisy = [dataclasses.replace(p, uav_image=rng.random(p.uav_image.shape)) for p in pairs[:4]]
    a = generate(model, GenerationRequest(pairs[:4], "pseudo_uav")).images
    b = generate(model, GenerationRequest(noisy, "pseudo_uav")).images
    diff = float(np.abs(a - b).max())
    _verdict(6, {f"max |delta| = {diff}": np.array_equal(a, b)}, 0.0)


def test_c07_vegetation_indices():
    rng = np.random.default_rng(7)
    r, g, b, n = rng.random((4, 1000))
    bands = {"red": r, "green": g, "blue": b, "nir": n}
    oracle = {
        "GLI": [(2 * g_ - r_ - b_) / (2 * g_ + r_ + b_) for r_, g_, b_ in zip(r, g, b)],
        "NGRDI": [(r_ - g_) / (r_ + g_) for r_, g_ in zip(r, g)],
        "NDVI": [(n_ - r_) / (n_ + r_) for n_, r_ in zip(n, r)],
        "GNDVI": [(n_ - g_) / (n_ + g_) for n_, g_ in zip(n, g)],
        "SAVI": [1.5 * (n_ - r_) / (n_ + r_ + 0.5) for n_, r_ in zip(n, r)],
    }
    checks = {
        f"{k} max err < 1e-9": float(np.abs(compute_index(bands, k) - np.array(v)).max()) < 1e-9
        for k, v in oracle.items()
    }
    checks["NDVI(nir=red)=0"] = bool((compute_index({"nir": r, "red": r}, "NDVI") == 0).all())
    one = lambda v: np.array([v])  # noqa: E731
    checks["GLI hand case 1/3"] = compute_index({"red": one(0.25), "green": one(0.5), "blue": one(0.25)}, "GLI")[0] == 1 / 3
    _verdict(7, checks, 0.0)


def test_c08_time_of_day():
    reference = {
        "morning": ((1.05, 1.00, 0.95), 0.9, 0.95),
        "afternoon": ((1.00, 1.00, 0.98), 1.1, 1.05),
        "evening": ((1.10, 0.95, 0.90), 0.7, 0.9),
    }
    img = np.random.default_rng(8).random((32, 32, 3))
    evening = apply_tint(np.full((4, 4, 3), 0.5), TintSpec.from_preset("evening"))[0, 0]
    checks = {
        "preset constants": TINT_PRESETS == reference,
        "identity": float(np.abs(apply_tint(img, TintSpec()) - img).max()) <= 1e-12,
        "evening on gray": float(np.abs(evening - [0.385, 0.3325, 0.315]).max()) <= 1e-12,
    }
    _verdict(8, checks, 0.0)


def test_c09_cv_protocol():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    leaks, r2_min, correct, total = 0, 1.0, 0, 0
    for d in range(100):
        g, m = int(rng.integers(2, 11)), int(rng.integers(5, 11))
        genotypes = rng.permutation(np.repeat(np.arange(g), m))
        X = rng.normal(size=(g * m, 4))
        for s in build_cv(genotypes, seed=d):
            leaks += np.intersect1d(s.train_idx, s.test_idx).size
        y = X @ rng.normal(size=4) + rng.normal()
        r2_min = min(r2_min, min(evaluate(X, y, genotypes, "yield_regression", "linear", seed=d).fold_metrics))
        # labels independent of features and uniform over three levels
        labels = rng.choice(["low", "medium", "high"], size=g * m)
        res = evaluate(X, labels, genotypes, "nitrogen_classification", "logistic", seed=d)
        n_test = np.array([len(s.test_idx) for s in build_cv(genotypes, seed=d)])
        correct += float(np.dot(res.fold_metrics, n_test))
        total += int(n_test.sum())
    acc = correct / total
    sigma = np.sqrt((1 / 3) * (2 / 3) / total)
    checks = {
        f"leakage cells {leaks}": leaks == 0,
        f"min fold R2 {r2_min:.6f} >= 0.999": r2_min >= 0.999,
        f"pooled accuracy {acc:.4f} within 3 sigma ({3 * sigma:.4f}) of 1/3": abs(acc - 1 / 3) <= 3 * sigma,
    }
    _verdict(9, checks, time.perf_counter() - t0, 300)


def test_c10_end_to_end(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "model: {embed_dim: 64, depth: 2, heads: 4, decoder_dim: 128, decoder_depth: 1, decoder_heads: 4}\n"
        "train: {epochs: 20, batch_size: 8, base_lr: 1.0e-3, warmup_epochs: 2, weight_decay: 0.0}\n"
        "mask: {alpha_sat: 0.9, alpha_uav: 0.1}\n"
    )
    grid = tmp_path / "grid.yaml"
    grid.write_text("alphas: [[1.0, 1.0], [0.9, 0.1]]\n")
    data, run, gen, feats, rep = (tmp_path / d for d in ("data", "run", "gen", "feats", "report"))
    sets = ["sat_rgb", "uav_rgb", "pred_uav_rgb", "sat_rgbnir", "sat_rgbnir+pred_uav_rgb"]
    steps = [
        ["datagen", "synth", "--seed", "1", "--grid", "2x4", "--genotypes", "4", "--replicates", "2",
         "--locations", "2", "--out", str(data)],
        ["pretrain", "--config", str(cfg), "--data", str(data), "--holdout", "1", "--out", str(run)],
        ["generate", "--ckpt", str(run / "checkpoint.pt"), "--data", str(data), "--out", str(gen)],
        ["sweep", "--config", str(cfg), "--data", str(data), "--grid", str(grid), "--holdout", "1",
         "--eval-split", "holdout", "--out", str(tmp_path / "sweep.csv")],
        ["features", "--data", str(data), "--pred", str(gen), *[a for s in sets for a in ("--modality-set", s)],
         "--out", str(feats)],
        ["evaluate", "--features", str(feats), "--task", "yield", "--model", "xgboost", "--out", str(tmp_path / "ev_y.csv")],
        ["evaluate", "--features", str(feats), "--task", "nitrogen", "--model", "xgboost", "--out", str(tmp_path / "ev_n.csv")],
        ["report", "--eval", str(tmp_path / "ev_y.csv"), str(tmp_path / "ev_n.csv"), "--sweep",
         str(tmp_path / "sweep.csv"), "--out", str(rep)],
    ]
    codes = [main(argv) for argv in steps]
    checks = {f"exit codes {codes}": codes == [0] * len(steps)}
    if codes == [0] * len(steps):
        sweep = pd.read_csv(rep / "table_masking_sweep.csv")
        real = pd.read_csv(rep / "table_real_vs_predicted.csv")
        aug = pd.read_csv(rep / "table_augmented.csv")
        preds = pd.read_csv(gen / "predictions.csv")
        pairs = load_dataset(data)
        trained, baseline = float(preds["mse"].mean()), zero_head_mse(pairs)
        checks.update(
            {
                "sweep table (2 rows, alpha/uav%/mse columns)": len(sweep) == 2
                and {"alpha_sat", "alpha_uav", "uav_tokens_pct", "mean_mse"} <= set(sweep.columns),
                "real-vs-predicted table": list(real.columns[2:]) == ["sat_rgb", "uav_rgb", "pred_uav_rgb"]
                and len(real) == 2,
                "augmented table": list(aug.columns[2:]) == ["sat_rgbnir", "sat_rgbnir+pred_uav_rgb"],
                "mosaic": all((gen / f"mosaic_L{i}.png").exists() for i in (0, 1)),
                f"trained MSE {trained:.4f} < zero-head {baseline:.4f}": trained < baseline,
            }
        )
    _verdict(10, checks, time.perf_counter() - t0, 600)


if __name__ == "__main__":
    import sys

    from _report import lines

    pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    print("\n".join(lines()))
    sys.exit(0)
