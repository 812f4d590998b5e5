import numpy as np
import pytest

from mcsep.masks import MembershipMatrix, apply_mask, iam, ibm, ipsm, oracle_masks
from mcsep.signal_core import ComplexSpectrogram, StftConfig, Waveform, istft, stft

CFG = StftConfig()


def spec(data):
    return ComplexSpectrogram(np.asarray(data, dtype=complex), CFG)


def const(value, T=3):
    return spec(np.full((T, 129), value, dtype=complex))


def test_ibm_dominant_and_tie():
    m, B = ibm([const(2.0), const(1.0)])
    assert np.all(m.values[0] == 1) and np.all(m.values[1] == 0)
    m, _ = ibm([const(1.0), const(1.0)])
    assert np.all(m.values[0] == 1) and np.all(m.values[1] == 0)
    assert B.values.shape == (3 * 129, 2)


def test_ibm_brute_force_counts():
    rng = np.random.default_rng(0)
    refs = [spec(rng.standard_normal((5, 129)) + 1j * rng.standard_normal((5, 129))) for _ in range(3)]
    m, B = ibm(refs)
    counts = np.zeros(3)
    for t in range(5):
        for f in range(129):
            mags = [abs(r.data[t, f]) for r in refs]
            counts[mags.index(max(mags))] += 1
    np.testing.assert_array_equal(B.values.sum(axis=0), counts)
    np.testing.assert_array_equal(m.values.sum(axis=0), 1.0)
    assert set(np.unique(m.values)) <= {0.0, 1.0}


def test_ibm_shape_mismatch():
    with pytest.raises(ValueError):
        ibm([const(1.0, 3), const(1.0, 4)])


def test_membership_rows():
    with pytest.raises(ValueError):
        MembershipMatrix(np.array([[1.0, 1.0]]))


def test_iam_cases():
    Y = const(1.0 + 1.0j)
    np.testing.assert_allclose(iam(Y, Y), 1.0)
    np.testing.assert_allclose(iam(Y, const(0.0)), 0.0)
    np.testing.assert_allclose(iam(Y, spec(5 * Y.data)), 2.0)
    np.testing.assert_allclose(iam(const(0.0), Y), 0.0)


def test_ipsm_cases():
    Y = const(2.0)
    np.testing.assert_allclose(ipsm(Y, Y), 1.0)
    np.testing.assert_allclose(ipsm(Y, const(2.0j)), 0.0, atol=1e-15)
    np.testing.assert_allclose(ipsm(Y, const(-1.0)), 0.0)


def test_ipsm_per_bin_oracle():
    rng = np.random.default_rng(1)
    Y = spec(rng.standard_normal((4, 129)) + 1j * rng.standard_normal((4, 129)))
    X = spec(rng.standard_normal((4, 129)) + 1j * rng.standard_normal((4, 129)))
    got = ipsm(Y, X)
    for t in range(4):
        for f in range(129):
            y, x = Y.data[t, f], X.data[t, f]
            val = abs(x) * np.cos(np.angle(y) - np.angle(x)) / abs(y)
            assert got[t, f] == pytest.approx(min(max(val, 0.0), 1.0), abs=1e-12)


def test_ipsm_below_iam_where_iam_unclipped():
    rng = np.random.default_rng(2)
    Y = spec(rng.standard_normal((6, 129)) + 1j * rng.standard_normal((6, 129)))
    X = spec(rng.standard_normal((6, 129)) + 1j * rng.standard_normal((6, 129)))
    a, p = iam(Y, X), ipsm(Y, X)
    sel = a <= 1
    assert np.all(p[sel] <= a[sel] + 1e-15)


def test_apply_mask_identity_and_silence():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(2048)
    Y = stft(Waveform(x), CFG)
    np.testing.assert_allclose(apply_mask(Y, np.ones(Y.shape)).samples, istft(Y).samples)
    assert not np.any(apply_mask(Y, np.zeros(Y.shape)).samples)
    with pytest.raises(ValueError):
        apply_mask(Y, -np.ones(Y.shape))


def test_oracle_masks_kinds():
    Y = const(2.0)
    refs = [const(1.5), const(0.5)]
    assert oracle_masks("ibm", Y, refs).kind == "binary"
    assert oracle_masks("iam", Y, refs).kind == "ratio"
    assert oracle_masks("ipsm", Y, refs).kind == "psm"
    with pytest.raises(ValueError):
        oracle_masks("wiener", Y, refs)
