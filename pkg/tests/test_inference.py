import dataclasses

import numpy as np
import pytest

from crossmae.errors import ConfigError, InputError
from crossmae.inference import (
    TINT_PRESETS,
    GenerationRequest,
    SweepSpec,
    TintSpec,
    apply_tint,
    comparison_figure,
    field_mosaic,
    generate,
    per_location_mse,
    render_mask_plan,
    run_sweep,
)
from crossmae.masking import MaskPlan
from crossmae.model import ModelConfig, build_model
from crossmae.trainer import TrainConfig

SMALL = ModelConfig(embed_dim=16, depth=1, heads=2, decoder_dim=16, decoder_depth=1, decoder_heads=2)


def test_tint_presets_match_reference_values():
    assert TINT_PRESETS == {
        "morning": ((1.05, 1.00, 0.95), 0.9, 0.95),
        "afternoon": ((1.00, 1.00, 0.98), 1.1, 1.05),
        "evening": ((1.10, 0.95, 0.90), 0.7, 0.9),
    }


def test_identity_tint():
    img = np.random.default_rng(0).random((9, 7, 3))
    np.testing.assert_allclose(apply_tint(img, TintSpec()), img, rtol=0, atol=1e-12)


def test_evening_on_gray():
    out = apply_tint(np.full((4, 4, 3), 0.5), TintSpec.from_preset("evening"))
    # 0.5 * scale * 0.7; contrast about the mean leaves a flat image unchanged
    np.testing.assert_allclose(out[0, 0], [0.385, 0.3325, 0.315], rtol=0, atol=1e-12)


def test_contrast_pivots_about_channel_mean():
    img = np.zeros((1, 2, 3))
    img[0, 0], img[0, 1] = 0.2, 0.6
    out = apply_tint(img, TintSpec(contrast=0.5))
    np.testing.assert_allclose(out[0, :, 0], [0.3, 0.5], rtol=0, atol=1e-12)


def test_tint_validation():
    with pytest.raises(ConfigError):
        TintSpec.from_preset("noon")
    with pytest.raises(ConfigError):
        TintSpec(scales=(1.0, 0.0, 1.0))
    with pytest.raises(InputError):
        apply_tint(np.full((2, 2, 3), 2.0), TintSpec())


@pytest.fixture(scope="module")
def model():
    return build_model(SMALL, seed=0)


def test_pseudo_uav_is_isolated_from_uav_pixels(model, pairs):
    rng = np.random.default_rng(0)
    noisy = [dataclasses.replace(p, uav_image=rng.random(p.uav_image.shape)) for p in pairs[:3]]
    a = generate(model, GenerationRequest(pairs[:3], "pseudo_uav")).images
    b = generate(model, GenerationRequest(noisy, "pseudo_uav")).images
    assert np.array_equal(a, b)


def test_generation_outputs(model, pairs):
    res = generate(model, GenerationRequest(pairs[:3], "pseudo_uav", batch_size=2))
    assert res.images.shape == (3, 224, 224, 3) and res.target == "uav"
    assert res.images.min() >= 0 and res.images.max() <= 1
    expected = [((res.images[i] - pairs[i].uav_image) ** 2).mean() for i in range(3)]
    np.testing.assert_allclose(res.mse, expected, rtol=1e-12)
    assert generate(model, GenerationRequest(pairs[:1], "pseudo_sat")).target == "sat"


def test_conditioned_mode_uses_tinted_uav(model, pairs):
    base = GenerationRequest(pairs[:2], "conditioned", uav_indices=[0, 50])
    plain = generate(model, base)
    tinted = generate(model, dataclasses.replace(base, tint=TintSpec.from_preset("evening")))
    assert not np.array_equal(plain.images, tinted.images)
    assert all(np.array_equal(i, [0, 50]) for i in plain.uav_indices)
    seeded = generate(model, GenerationRequest(pairs[:2], "conditioned", num_conditioning=3, seed=4))
    assert all(len(i) == 3 for i in seeded.uav_indices)


def test_bad_requests(model, pairs):
    with pytest.raises(ConfigError):
        GenerationRequest(pairs, "unknown")
    with pytest.raises(ConfigError):
        generate(model, GenerationRequest(pairs[:1], "conditioned", uav_indices=[]))
    other = build_model(ModelConfig(image_size=32, patch_size=16, embed_dim=16, heads=2, depth=1,
                                    decoder_dim=16, decoder_heads=2, decoder_depth=1), seed=0)
    with pytest.raises(ConfigError):
        generate(other, GenerationRequest(pairs[:1]))


def test_per_location_mse(pairs):
    mse = np.arange(len(pairs), dtype=float)
    out = per_location_mse(pairs, mse)
    assert out == {pairs[0].location_id: pytest.approx(mse.mean())}


def test_sweep_table_and_cache(tmp_path, pairs):
    spec = SweepSpec(((1.0, 1.0), (0.9, 0.1)))
    cfg = TrainConfig(epochs=1, batch_size=6, warmup_epochs=0, max_steps=1)
    table = run_sweep(spec, pairs[:6], cfg, SMALL, cache_dir=tmp_path)
    assert list(table.columns[:4]) == ["alpha_sat", "alpha_uav", "uav_tokens_pct", "mean_mse"]
    assert table["uav_tokens_pct"].tolist() == pytest.approx([50.0, 10.0])
    assert len(list(tmp_path.glob("sweep/*/checkpoint.pt"))) == 2
    again = run_sweep(spec, pairs[:6], cfg, SMALL, cache_dir=tmp_path)
    np.testing.assert_array_equal(table["mean_mse"], again["mean_mse"])


def test_sweep_holdout_requires_location(pairs):
    with pytest.raises(ConfigError):
        run_sweep(SweepSpec(((1.0, 1.0),), "holdout"), pairs, TrainConfig(epochs=1, warmup_epochs=0), SMALL)


def test_field_mosaic_places_plots(pairs):
    imgs = [np.full((224, 224, 3), i / len(pairs)) for i in range(len(pairs))]
    canvas = field_mosaic(pairs, imgs, gap=0)
    for i, p in enumerate(pairs):
        y, x = p.field_row * 224, p.field_col * 3 * 224 + p.subplot_id * 224
        assert canvas[y + 5, x + 5, 0] == imgs[i][0, 0, 0]
    fig = comparison_figure(pairs, np.stack(imgs))
    assert fig.ndim == 3 and fig.shape[2] == 3


def test_mask_render_grays_hidden_patches(pairs):
    p = pairs[0]
    plan = MaskPlan(np.array([0]), np.array([], dtype=int), 196)
    out = render_mask_plan(p.sat_image, p.uav_image, plan, gap=0)
    np.testing.assert_array_equal(out[:16, :16], p.sat_image[:16, :16])
    np.testing.assert_allclose(out[:16, 16:32], 0.25 * p.sat_image[:16, 16:32] + 0.375)
    np.testing.assert_allclose(out[:, 224:], 0.25 * p.uav_image + 0.375)
