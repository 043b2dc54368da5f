"""Geometry, large-scale fading, spatial covariance and channel sampling."""

import math

import numpy as np
import pytest

from multicast_mimo.channel import (ChannelConfig, GeometryConfig,
                                    IndefiniteCovarianceError, complex_normal,
                                    dbm_to_watt, drop_large_scale, drop_users,
                                    export_covariance, large_scale_fading,
                                    load_covariance,
                                    local_scattering_covariance, noise_power,
                                    psd_sqrt_factor, sample_channels,
                                    sample_shadowing, steering_vector,
                                    watt_to_dbm)


def test_dbm_watt_roundtrip():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(0.0) == pytest.approx(1e-3)
    assert watt_to_dbm(dbm_to_watt(17.3)) == pytest.approx(17.3)


def test_noise_power_table_defaults():
    # -174 dBm/Hz + 10 log10(20 MHz) + 7 dB = -93.99 dBm
    cfg = ChannelConfig()
    assert watt_to_dbm(noise_power(cfg)) == pytest.approx(-93.99, abs=0.01)


def test_pathloss_direct_evaluation():
    pl, beta = large_scale_fading(200.0, 2.0)
    assert pl == pytest.approx(32.4 + 20 * math.log10(2.0)
                               + 37.6 * math.log10(200.0), abs=1e-12)
    assert pl == pytest.approx(124.94, abs=0.01)
    assert beta == pytest.approx(10.0 ** (-pl / 10.0))


def test_pathloss_log_terms_vanish():
    pl, _ = large_scale_fading(1.0, 1.0)
    assert pl == pytest.approx(32.4)


def test_shadowing_is_db_arithmetic():
    _, beta0 = large_scale_fading(50.0, 2.0, shadow_db=0.0)
    _, beta6 = large_scale_fading(50.0, 2.0, shadow_db=6.0)
    assert beta6 == pytest.approx(beta0 * 10.0 ** (-0.6))


def test_pathloss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        large_scale_fading(0.0, 2.0)


def test_steering_vector_unit_modulus():
    a = steering_vector(0.7, 8, 0.5)
    assert np.allclose(np.abs(a), 1.0)
    assert a[0] == 1.0


def test_covariance_diagonal_is_beta():
    r = local_scattering_covariance(0.5, math.radians(10), 2.3, 8, 0.5)
    assert np.allclose(np.diag(r).real, 2.3, rtol=1e-9)
    assert np.allclose(r, r.conj().T)


def test_covariance_trace_and_psd():
    for phi in (-1.0, 0.2, 2.5):
        r = local_scattering_covariance(phi, 0.1, 0.7, 16, 0.5)
        assert np.trace(r).real == pytest.approx(16 * 0.7, rel=1e-9)
        assert np.linalg.eigvalsh(r).min() >= -1e-9 * np.trace(r).real / 16


def test_covariance_vanishing_spread_is_rank_one():
    phi, beta, m = 0.6, 1.5, 8
    r = local_scattering_covariance(phi, 1e-8, beta, m, 0.5)
    a = steering_vector(phi, m, 0.5)
    assert np.allclose(r, beta * np.outer(a, a.conj()), atol=1e-5)
    eig = np.linalg.eigvalsh(r)
    assert eig[-1] == pytest.approx(m * beta, rel=1e-6)
    assert eig[:-1].max() <= 1e-6 * eig[-1]


def test_covariance_quadrature_vs_finite_paths():
    # Monte-Carlo oracle: covariance of 10^4 equal-strength paths
    rng = np.random.default_rng(42)
    kwargs = dict(phi=math.radians(30), asd=math.radians(10), beta=1.0,
                  n_antennas=8, spacing=0.5)
    r_quad = local_scattering_covariance(**kwargs)
    r_mc = local_scattering_covariance(**kwargs, n_paths=10_000, rng=rng)
    rel = np.linalg.norm(r_mc - r_quad) / np.linalg.norm(r_quad)
    assert rel <= 0.02


def test_covariance_uniform_model():
    r = local_scattering_covariance(0.3, 0.15, 1.0, 8, 0.5, model="uniform")
    assert np.trace(r).real == pytest.approx(8.0, rel=1e-9)
    assert np.linalg.eigvalsh(r).min() >= -1e-12


def test_covariance_rejects_bad_inputs():
    with pytest.raises(ValueError):
        local_scattering_covariance(0.0, 0.1, -1.0, 4, 0.5)
    with pytest.raises(ValueError):
        local_scattering_covariance(0.0, -0.1, 1.0, 4, 0.5)
    with pytest.raises(ValueError):
        local_scattering_covariance(0.0, 0.1, 1.0, 4, 0.5, n_paths=100)


def test_drop_users_geometry():
    geom = GeometryConfig(n_clusters=1, users_per_cluster=1)
    rng = np.random.default_rng(3)
    pos, ids = drop_users(geom, rng)
    assert pos.shape == (1, 2) and ids.tolist() == [0]
    d = np.hypot(*pos[0])
    assert geom.min_bs_distance - geom.cluster_radius <= d <= geom.cell_radius


def test_drop_users_same_cluster_diameter():
    geom = GeometryConfig(n_clusters=3, users_per_cluster=6, cluster_radius=5.0)
    pos, ids = drop_users(geom, np.random.default_rng(11))
    for c in range(3):
        pts = pos[ids == c]
        span = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        assert span.max() <= 2 * geom.cluster_radius + 1e-12


def test_drop_users_deterministic():
    geom = GeometryConfig()
    p1, _ = drop_users(geom, np.random.default_rng(5))
    p2, _ = drop_users(geom, np.random.default_rng(5))
    assert np.array_equal(p1, p2)


def test_shadowing_intra_cluster_identical():
    ids = np.repeat(np.arange(4), 5)
    s = sample_shadowing(ids, 6.0, 1.0, 0.1, np.random.default_rng(1))
    for c in range(4):
        vals = s[ids == c]
        assert np.allclose(vals, vals[0])


def test_shadowing_zero_std():
    s = sample_shadowing(np.array([0, 0, 1]), 0.0, 1.0, 0.1,
                         np.random.default_rng(1))
    assert np.all(s == 0.0)


def test_shadowing_inter_cluster_correlation():
    rng = np.random.default_rng(7)
    ids = np.array([0, 1])
    draws = np.array([sample_shadowing(ids, 6.0, 1.0, 0.1, rng)
                      for _ in range(100_000)])
    corr = np.corrcoef(draws[:, 0], draws[:, 1])[0, 1]
    assert corr == pytest.approx(0.1, abs=0.02)
    assert draws.std(axis=0) == pytest.approx([6.0, 6.0], rel=0.02)


def test_shadowing_rejects_bad_correlation():
    with pytest.raises(ValueError):
        sample_shadowing(np.array([0, 1]), 6.0, 0.5, 0.9,
                         np.random.default_rng(0))


def test_sample_channels_identity_covariance():
    rng = np.random.default_rng(9)
    h = sample_channels([np.eye(4, dtype=complex)], 10_000, rng)[:, 0, :]
    # i.i.d. CN(0,1): per-component mean 0, variance 1, re/im balanced
    assert np.abs(h.mean(axis=0)).max() <= 0.05
    assert np.allclose(np.mean(np.abs(h) ** 2, axis=0), 1.0, atol=0.05)
    assert np.allclose(h.real.var(axis=0), 0.5, atol=0.05)


def test_sample_channels_zero_and_rank_one():
    rng = np.random.default_rng(2)
    h0 = sample_channels([np.zeros((3, 3), dtype=complex)], 10, rng)
    assert np.all(h0 == 0)
    a = steering_vector(0.4, 3, 0.5)
    h1 = sample_channels([np.outer(a, a.conj())], 50, rng)[:, 0, :]
    # every draw proportional to a
    coefs = h1 @ a.conj() / (a @ a.conj())
    assert np.allclose(h1, coefs[:, None] * a, atol=1e-10)


def test_sample_covariance_matches_r():
    rng = np.random.default_rng(12)
    r = local_scattering_covariance(0.8, 0.2, 1.3, 4, 0.5)
    h = sample_channels([r], 100_000, rng)[:, 0, :]
    emp = h.conj().T @ h / h.shape[0]
    assert np.linalg.norm(emp.T - r) <= 0.05 * np.linalg.norm(r)


def test_psd_sqrt_factor_reconstructs():
    r = local_scattering_covariance(0.1, 0.15, 0.9, 6, 0.5)
    fac = psd_sqrt_factor(r)
    assert np.allclose(fac @ fac.conj().T, r, atol=1e-10)


def test_psd_sqrt_factor_rejects_indefinite():
    with pytest.raises(IndefiniteCovarianceError):
        psd_sqrt_factor(np.diag([1.0, -0.5]).astype(complex))


def test_complex_normal_statistics():
    z = complex_normal(np.random.default_rng(4), 200_000)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
    assert np.abs(z.mean()) <= 0.01


def test_drop_large_scale_deterministic():
    geom = GeometryConfig(n_clusters=2, users_per_cluster=2)
    chan = ChannelConfig(n_antennas=8)
    u1, c1 = drop_large_scale(geom, chan, np.random.default_rng(42))
    u2, c2 = drop_large_scale(geom, chan, np.random.default_rng(42))
    assert all(np.array_equal(a.position, b.position)
               for a, b in zip(u1, u2))
    assert all(np.array_equal(a, b) for a, b in zip(c1, c2))
    for u, r in zip(u1, c1):
        assert np.trace(r).real / 8 == pytest.approx(u.beta, rel=1e-9)


def test_covariance_export_roundtrip(tmp_path):
    r = local_scattering_covariance(0.2, 0.1, 1.1, 5, 0.5)
    path = tmp_path / "cov.bin"
    export_covariance(path, r, user_id=3, beta=1.1)
    r2, header = load_covariance(path)
    assert np.array_equal(r, r2)
    assert header == {"m": 5, "user": 3, "beta": 1.1}


def test_config_validation():
    with pytest.raises(ValueError):
        GeometryConfig(cell_radius=4.0, cluster_radius=5.0)
    with pytest.raises(ValueError):
        ChannelConfig(n_antennas=0)
    with pytest.raises(ValueError):
        ChannelConfig(shadow_intra_corr=0.2, shadow_inter_corr=0.5)
    with pytest.raises(ValueError):
        ChannelConfig(angular_model="laplacian")
