"""MR and ZF multicast precoders."""

import numpy as np
import pytest

from multicast_mimo.channel import complex_normal
from multicast_mimo.precoding import (RankDeficientEstimatesError,
                                      ZeroCompositeEstimateError, mr_precoder,
                                      zf_precoders, zf_precoders_batch)


def test_mr_basic_direction():
    h = np.zeros(4, dtype=complex)
    h[0] = 2.0
    w = mr_precoder(h)
    assert np.allclose(w, [1, 0, 0, 0])


def test_mr_unit_norm_and_scale_invariance():
    rng = np.random.default_rng(0)
    for _ in range(5):
        h = complex_normal(rng, 6)
        w = mr_precoder(h)
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(w, mr_precoder(3.7 * h), atol=1e-12)


def test_mr_rejects_zero():
    with pytest.raises(ZeroCompositeEstimateError):
        mr_precoder(np.zeros(3, dtype=complex))


def test_mr_maximizes_inner_product():
    rng = np.random.default_rng(1)
    h = complex_normal(rng, 5)
    best = np.abs(h.conj() @ mr_precoder(h))
    for _ in range(1000):
        v = complex_normal(rng, 5)
        v /= np.linalg.norm(v)
        assert np.abs(h.conj() @ v) <= best + 1e-12


def test_zf_single_group_is_mr():
    rng = np.random.default_rng(2)
    h = complex_normal(rng, 6)
    w = zf_precoders(h[:, None], ridge=0.0)
    assert np.allclose(w[:, 0], mr_precoder(h), atol=1e-10)


def test_zf_orthogonal_estimates_reduce_to_mr():
    h = np.zeros((4, 2), dtype=complex)
    h[0, 0] = 1.5
    h[2, 1] = 0.3 - 0.4j
    w = zf_precoders(h, ridge=0.0)
    for g in range(2):
        assert np.allclose(w[:, g], mr_precoder(h[:, g]), atol=1e-10)


def test_zf_nulling():
    rng = np.random.default_rng(3)
    h = complex_normal(rng, (4, 2))
    w = zf_precoders(h, ridge=0.0)
    assert np.abs(h[:, 1].conj() @ w[:, 0]) <= 1e-10
    assert np.abs(h[:, 0].conj() @ w[:, 1]) <= 1e-10
    assert np.allclose(np.linalg.norm(w, axis=0), 1.0, atol=1e-12)


def test_zf_rank_deficiency():
    h = np.ones((4, 2), dtype=complex)  # two identical columns
    with pytest.raises(RankDeficientEstimatesError):
        zf_precoders(h, ridge=0.0)
    w = zf_precoders(h)  # default ridge regularizes
    assert np.all(np.isfinite(w))


def test_zf_batch_matches_single():
    rng = np.random.default_rng(4)
    h = complex_normal(rng, (3, 5, 2))
    batch = zf_precoders_batch(h)
    for n in range(3):
        single = zf_precoders(h[n])
        assert np.allclose(batch[n], single, atol=1e-10)
