import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcsep.clustering import cluster_masks, kmeans
from mcsep.masks import ibm
from mcsep.signal_core import ComplexSpectrogram, StftConfig


def test_k1_weighted_mean():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((50, 3))
    w = rng.uniform(0, 2, 50)
    res = kmeans(pts, 1, bin_weights=w)
    np.testing.assert_allclose(res.centroids[0], (w[:, None] * pts).sum(0) / w.sum())


def test_planted_clusters():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((200, 4)) * 0.1
    b = rng.standard_normal((200, 4)) * 0.1 + 1.0  # 10 sigma per axis
    pts = np.vstack([a, b])
    truth = np.r_[np.zeros(200), np.ones(200)]
    labels = kmeans(pts, 2, seed=3).labels
    agree = max(np.mean(labels == truth), np.mean(labels == 1 - truth))
    assert agree == 1.0


def test_ibm_reconstruction_from_one_hot_rows():
    rng = np.random.default_rng(2)
    cfg = StftConfig()
    refs = [
        ComplexSpectrogram(rng.standard_normal((6, 129)) + 1j * rng.standard_normal((6, 129)), cfg)
        for _ in range(2)
    ]
    m, B = ibm(refs)
    _, masks = cluster_masks(B.values, 2, (6, 129), seed=0)
    assert any(
        np.array_equal(masks.values[list(p)], m.values) for p in itertools.permutations(range(2))
    )


def test_low_weight_points_labelled_but_ignored():
    pts = np.array([[0.0], [0.1], [10.0], [10.1], [100.0]])
    w = np.array([1, 1, 1, 1, 0.0])
    res = kmeans(pts, 2, bin_weights=w, seed=0)
    assert sorted(np.round(res.centroids[:, 0], 6)) == [0.05, 10.05]
    assert res.labels[4] == res.labels[2]


def test_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((5, 2)), 2)
    with pytest.raises(ValueError):
        kmeans(np.zeros((1, 2)), 2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 4))
def test_lloyd_properties(seed, k):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((60, 3))
    res = kmeans(pts, k, restarts=2, seed=seed)
    hist = res.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
    assert res.inertia <= min(hist) + 1e-9
    d = ((pts[:, None] - res.centroids[None]) ** 2).sum(-1)
    assert np.all(d[np.arange(60), res.labels] <= d.min(axis=1) + 1e-12)
    again = kmeans(pts, k, restarts=2, seed=seed)
    np.testing.assert_array_equal(res.labels, again.labels)


def test_masks_partition():
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((4 * 129, 5))
    _, masks = cluster_masks(pts, 2, (4, 129))
    np.testing.assert_array_equal(masks.values.sum(axis=0), 1.0)
