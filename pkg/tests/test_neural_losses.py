import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcsep.masks import psm_target
from mcsep.neural.losses import (
    PermutationResult,
    dc_loss,
    dc_loss_dense,
    dc_loss_grad,
    dc_weights,
    dl_grad_masks,
    dl_loss,
    joint_loss,
    permutation_search,
    pit_cost_matrix,
    upit_psm_loss,
)
from mcsep.signal_core import ComplexSpectrogram, StftConfig

CFG = StftConfig()


def one_hot(rng, n, S):
    B = np.zeros((n, S))
    B[np.arange(n), rng.integers(0, S, n)] = 1
    return B


def test_dc_zero_when_embedding_equals_membership():
    rng = np.random.default_rng(0)
    B = one_hot(rng, 30, 2)
    assert dc_loss(B, B) == pytest.approx(0.0, abs=1e-15)


def test_dc_dense_small_case():
    rng = np.random.default_rng(1)
    V = rng.standard_normal((6, 3))
    B = one_hot(rng, 6, 2)
    dense = np.sum((V @ V.T - B @ B.T) ** 2) / 36.0
    assert dc_loss(V, B) == pytest.approx(dense, abs=1e-8)


def test_dc_source_permutation_invariance():
    rng = np.random.default_rng(2)
    V = rng.standard_normal((40, 5))
    B = one_hot(rng, 40, 3)
    w = rng.integers(0, 2, 40).astype(float)
    base = dc_loss(V, B, w)
    for p in itertools.permutations(range(3)):
        assert dc_loss(V, B[:, list(p)], w) == pytest.approx(base, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 100), D=st.integers(1, 6), S=st.integers(2, 4), seed=st.integers(0, 9999))
def test_dc_expanded_equals_dense(n, D, S, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, D))
    B = one_hot(rng, n, S)
    w = rng.uniform(0.1, 1.0, n)
    assert dc_loss(V, B, w) == pytest.approx(dc_loss_dense(V, B, w), abs=1e-8)


def test_dc_gradient_finite_differences():
    rng = np.random.default_rng(3)
    V = rng.standard_normal((25, 4))
    B = one_hot(rng, 25, 2)
    w = (rng.uniform(size=25) > 0.3).astype(float)
    _, g = dc_loss_grad(V, B, w)
    eps = 1e-6
    for idx in np.ndindex(V.shape):
        vp, vm = V.copy(), V.copy()
        vp[idx] += eps
        vm[idx] -= eps
        num = (dc_loss(vp, B, w) - dc_loss(vm, B, w)) / (2 * eps)
        assert abs(num - g[idx]) <= 1e-6 * max(abs(num), 1e-6)


def test_dc_dimension_mismatch():
    with pytest.raises(ValueError):
        dc_loss(np.zeros((5, 2)), np.zeros((6, 2)))


def test_dc_weights_threshold():
    mag = np.array([[1.0, 0.011, 0.009]])
    np.testing.assert_array_equal(dc_weights(mag, 40.0), [1, 1, 0])
    np.testing.assert_array_equal(dc_weights(mag, None), [1, 1, 1])


def _specs(rng, S, T=4):
    def one():
        return ComplexSpectrogram(rng.standard_normal((T, 129)) + 1j * rng.standard_normal((T, 129)), CFG)

    srcs = [one() for _ in range(S)]
    mix = ComplexSpectrogram(sum(s.data for s in srcs), CFG)
    return mix, srcs


def test_upit_exact_psm_identity_and_swap():
    rng = np.random.default_rng(4)
    mix, srcs = _specs(rng, 2)
    exact = np.stack([psm_target(mix, s) / mix.magnitude for s in srcs])
    res = upit_psm_loss(exact, mix, srcs)
    assert res.best_perm == (0, 1) and res.best_cost == pytest.approx(0.0, abs=1e-20)
    res = upit_psm_loss(exact[::-1], mix, srcs)
    assert res.best_perm == (1, 0) and res.best_cost == pytest.approx(0.0, abs=1e-20)
    assert len(res.all_costs) == 2


def brute_force_pit(masks, mix, srcs):
    S = len(srcs)
    Y = np.abs(mix.data)
    best = np.inf
    for perm in itertools.permutations(range(S)):
        total = 0.0
        for s in range(S):
            target = np.abs(srcs[s].data) * np.cos(np.angle(mix.data) - np.angle(srcs[s].data))
            total += np.sum((Y * masks[perm[s]] - target) ** 2)
        best = min(best, total / (S * Y.size))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_upit_three_sources_brute_force(seed):
    rng = np.random.default_rng(10 + seed)
    mix, srcs = _specs(rng, 3)
    masks = rng.uniform(size=(3,) + mix.shape)
    res = upit_psm_loss(masks, mix, srcs)
    assert len(res.all_costs) == 6
    assert abs(res.best_cost - brute_force_pit(masks, mix, srcs)) <= 1e-10
    assert res.best_cost == min(res.all_costs.values())


def test_upit_relabel_invariance():
    rng = np.random.default_rng(5)
    mix, srcs = _specs(rng, 3)
    masks = rng.uniform(size=(3,) + mix.shape)
    res = upit_psm_loss(masks, mix, srcs)
    order = [2, 0, 1]
    res2 = upit_psm_loss(masks, mix, [srcs[i] for i in order])
    assert res2.best_cost == pytest.approx(res.best_cost, abs=1e-14)
    # source k of the relabelled problem is source order[k] of the original
    for k in range(3):
        assert res2.best_perm[k] == res.best_perm[order[k]]


def test_upit_too_many_sources():
    rng = np.random.default_rng(6)
    mix, srcs = _specs(rng, 7, T=1)
    with pytest.raises(ValueError, match="permutation search too large"):
        upit_psm_loss(np.zeros((7,) + mix.shape), mix, srcs)


def test_dl_degenerate_and_worked_example():
    perm = PermutationResult((0, 1), 1.0, {(0, 1): 1.0, (1, 0): 3.0})
    assert dl_loss(perm, 0.0) == perm.best_cost
    assert dl_loss(perm, 0.1) == pytest.approx(0.7, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 9999), alpha=st.floats(0, 2))
def test_dl_never_exceeds_best(seed, alpha):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 5, (3, 3))
    perm = permutation_search(C)
    assert dl_loss(perm, alpha) <= perm.best_cost


def test_dl_gradient_finite_differences():
    rng = np.random.default_rng(7)
    mix, srcs = _specs(rng, 3, T=2)
    targets = np.stack([psm_target(mix, s) for s in srcs])
    masks = rng.uniform(size=(3,) + mix.shape)
    Y = mix.magnitude

    def loss(m):
        return dl_loss(permutation_search(pit_cost_matrix(m, Y, targets)), 0.1)

    perm = permutation_search(pit_cost_matrix(masks, Y, targets))
    g = dl_grad_masks(masks, Y, targets, perm, 0.1)
    eps = 1e-6
    for idx in list(np.ndindex(masks.shape))[::7]:
        mp, mm = masks.copy(), masks.copy()
        mp[idx] += eps
        mm[idx] -= eps
        num = (loss(mp) - loss(mm)) / (2 * eps)
        assert abs(num - g[idx]) <= 1e-5 * max(abs(num), 1e-8)


def test_joint_loss():
    assert joint_loss(2.0, 1.0, 1.0) == 2.0
    assert joint_loss(2.0, 1.0, 0.0) == 1.0
    assert joint_loss(2.0, 1.0, 0.01) == pytest.approx(1.01, abs=1e-15)
    with pytest.raises(ValueError):
        joint_loss(1.0, 1.0, 1.5)
