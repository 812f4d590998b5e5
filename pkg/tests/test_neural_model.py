import dataclasses

import numpy as np
import pytest

from mcsep.features import FeatureSet
from mcsep.neural.model import TrainConfig, forward_full, init_params, loss_and_grad
from mcsep.neural.train import (
    Adam,
    Example,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train_epoch,
)

from .conftest import desk_example

UPIT_BLOCKS = ("upit0.fwd", "upit0.bwd", "upit1.fwd", "upit1.bwd", "mask")


def test_forward_shapes_and_ranges(desk_config, desk_data):
    features, _, _ = desk_data
    assert features.spectral.shape == (20, 129)
    out = forward_full(features, init_params(desk_config), desk_config)
    assert out.stacked.shape == (2580, 24)
    assert out.masks.values.shape == (2, 20, 129)
    assert np.all((out.masks.values >= 0) & (out.masks.values <= 1))
    np.testing.assert_allclose(np.linalg.norm(out.V, axis=-1), 1.0, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(out.stacked, axis=-1), 1.0, atol=1e-9)
    assert len(out.embeddings_per_pair) == 3
    np.testing.assert_allclose(out.attention.alpha_att.sum(axis=-1), 1.0, atol=1e-9)
    assert np.all(out.attention.alpha_att >= 0)


def test_feature_mismatch(desk_config, desk_data):
    features, _, _ = desk_data
    cfg = dataclasses.replace(desk_config, n_mics=3)
    with pytest.raises(ValueError):
        forward_full(features, init_params(cfg), cfg)


def test_gradients_sampled(desk_config, desk_data):
    features, targets, _ = desk_data
    report = grad_check(init_params(desk_config), features, targets, desk_config, n_samples=12)
    assert max(report.values()) < 1e-4


def test_gradients_per_pair_spatial(desk_data):
    cfg = TrainConfig(hidden_units=6, embed_dim=3, share_spatial=False, lam=0.3)
    features, targets, _ = desk_data
    params = init_params(cfg)
    assert "spatial2_0.fwd" in params
    report = grad_check(params, features, targets, cfg, n_samples=10)
    assert max(report.values()) < 1e-4


def test_lambda_one_leaves_pit_head_untouched(desk_data):
    cfg = TrainConfig(lam=1.0)
    features, targets, _ = desk_data
    _, grads = loss_and_grad(init_params(cfg), features, targets, cfg)
    for name in UPIT_BLOCKS:
        assert not np.any(grads[name])
    assert np.any(grads["embed"]) and np.any(grads["spectral0.fwd"])


def test_zero_input_gradients_finite(desk_config, desk_data):
    features, targets, _ = desk_data
    zero = FeatureSet(
        np.zeros_like(features.spectral),
        np.ones_like(features.ipd_cos),
        np.zeros_like(features.ipd_sin),
        features.pair_map,
        features.mixture_specs,
    )
    _, grads = loss_and_grad(init_params(desk_config), zero, targets, desk_config)
    assert all(np.all(np.isfinite(g)) for g in grads.values())


def _small_run(epochs, seed=3):
    cfg = TrainConfig(hidden_units=8, embed_dim=4, seed=seed, learning_rate=3e-3)
    examples = [Example(f"s{k}", *desk_example(cfg, 0.2, seed=k)[:2]) for k in range(3)]
    params = init_params(cfg)
    opt = Adam(cfg.learning_rate)
    losses = []
    for e in range(epochs):
        params, m = train_epoch(examples, params, cfg, opt, e)
        losses.append(m["j"])
    return params, opt, losses, cfg, examples


def test_training_is_deterministic():
    p1, _, l1, _, _ = _small_run(2)
    p2, _, l2, _, _ = _small_run(2)
    assert l1 == l2
    for k in p1:
        np.testing.assert_array_equal(p1[k], p2[k])


def test_empty_training_set():
    cfg = TrainConfig()
    with pytest.raises(ValueError):
        train_epoch([], init_params(cfg), cfg, Adam(), 0)


def test_checkpoint_resume_matches_continuous(tmp_path):
    params, opt, losses, cfg, examples = _small_run(1)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, params, cfg, opt, 1, losses)
    p2, cfg2, opt2, epoch, hist = load_checkpoint(path)
    assert cfg2 == cfg and epoch == 1 and hist == losses
    _, m_resumed = train_epoch(examples, p2, cfg2, opt2, 1)
    _, m_straight = train_epoch(examples, params, cfg, opt, 1)
    assert abs(m_resumed["j"] - m_straight["j"]) <= 1e-9
