"""MMSE pilot-based channel estimation: per-user, error statistics and the
composite subgroup estimate."""

import numpy as np
import pytest

from multicast_mimo.channel import (complex_normal,
                                    local_scattering_covariance,
                                    psd_sqrt_factor)
from multicast_mimo.estimation import (composite_estimate,
                                       composite_gain_matrix,
                                       effective_sigma2, error_correlation,
                                       mmse_estimate, pilot_noise_variance,
                                       received_pilot, training_matrix)


def _random_covs(rng, n, m):
    return [local_scattering_covariance(float(rng.uniform(-1.5, 1.5)),
                                        float(rng.uniform(0.05, 0.3)),
                                        float(rng.uniform(0.3, 2.0)), m, 0.5)
            for _ in range(n)]


def test_noise_variance_conventions():
    assert pilot_noise_variance(0.5, 4, "scaled") == 2.0
    assert pilot_noise_variance(0.5, 4, "plain") == 0.5
    # the value plugged into the training matrix keeps the estimator MMSE
    assert effective_sigma2(0.5, 4, "scaled") == 0.5
    assert effective_sigma2(0.5, 4, "plain") == 0.125
    with pytest.raises(ValueError):
        pilot_noise_variance(0.5, 4, "other")


def test_received_pilot_noiseless_single_user():
    rng = np.random.default_rng(0)
    h = complex_normal(rng, (1, 4))
    y = received_pilot(h, np.array([0.49]), 3, 0.0, rng)
    assert np.allclose(y, 3 * 0.7 * h[0])


def test_received_pilot_cancellation():
    rng = np.random.default_rng(1)
    h1 = complex_normal(rng, 4)
    h = np.stack([h1, -h1])
    y = received_pilot(h, np.array([0.3, 0.3]), 2, 0.0, rng)
    assert np.allclose(y, 0.0)


def test_received_pilot_zero_power_is_noise_only():
    rng = np.random.default_rng(2)
    h = complex_normal(rng, (2, 4))
    y = received_pilot(h, np.zeros(2), 2, 1.0, rng)
    assert np.all(y != 0.0)  # pure noise, almost surely nonzero
    assert np.mean(np.abs(y) ** 2) < 10.0  # no tau_p-amplified signal part


def test_training_matrix_rejects_nonpositive_noise():
    with pytest.raises(ValueError):
        training_matrix([np.eye(2, dtype=complex)], [1.0], 2, 0.0)


def test_mmse_estimate_scalar_oracle():
    # single user, R = beta I: h_hat = (sqrt(q) beta / (tau_p q beta + s)) y
    rng = np.random.default_rng(3)
    m, beta, q, tau_p, s = 4, 1.7, 0.8, 3, 0.4
    y = complex_normal(rng, m)
    h_hat = mmse_estimate(y, beta * np.eye(m, dtype=complex), q,
                          [beta * np.eye(m, dtype=complex)], [q], tau_p, s)
    scalar = np.sqrt(q) * beta / (tau_p * q * beta + s)
    assert np.allclose(h_hat, scalar * y, atol=1e-12)


def test_mmse_estimate_zero_power():
    rng = np.random.default_rng(4)
    covs = _random_covs(rng, 2, 4)
    y = complex_normal(rng, 4)
    h_hat = mmse_estimate(y, covs[0], 0.0, covs, [0.0, 1.0], 2, 0.5)
    assert np.allclose(h_hat, 0.0)


def test_error_correlation_limits():
    rng = np.random.default_rng(5)
    (r,) = _random_covs(rng, 1, 4)
    # no pilot energy: error correlation is the prior
    rt = error_correlation(r, 0.0, [r], [0.0], 2, 0.5)
    assert np.allclose(rt, r, atol=1e-12)
    # asymptotically perfect estimation
    rt = error_correlation(r, 1e9, [r], [1e9], 2, 0.5)
    assert np.linalg.norm(rt) <= 1e-6 * np.linalg.norm(r)


def test_error_correlation_is_psd_and_bounded():
    rng = np.random.default_rng(6)
    covs = _random_covs(rng, 3, 6)
    q = [0.7, 1.2, 0.1]
    for i in range(3):
        rt = error_correlation(covs[i], q[i], covs, q, 3, 0.5)
        assert np.allclose(rt, rt.conj().T)
        assert np.linalg.eigvalsh(rt).min() >= -1e-10
        assert np.trace(rt).real <= np.trace(covs[i]).real + 1e-12


def test_error_trace_nonincreasing_in_power():
    rng = np.random.default_rng(7)
    covs = _random_covs(rng, 2, 4)
    q2 = 0.9
    traces = [np.trace(error_correlation(covs[0], q1, covs, [q1, q2], 2,
                                         0.5)).real
              for q1 in (0.1, 0.5, 1.0, 5.0)]
    assert all(t1 >= t2 - 1e-12 for t1, t2 in zip(traces, traces[1:]))


def test_error_covariance_monte_carlo():
    rng = np.random.default_rng(8)
    m, tau_p, s, n = 4, 2, 0.3, 10_000
    covs = _random_covs(rng, 2, m)
    q = np.array([1.0, 0.4])
    h = np.stack([complex_normal(rng, (n, m)) @ psd_sqrt_factor(r).T
                  for r in covs], axis=1)
    noise = complex_normal(rng, (n, m)) * np.sqrt(tau_p * s)
    y = tau_p * np.einsum("k,nkm->nm", np.sqrt(q), h) + noise
    for i in range(2):
        h_hat = mmse_estimate(y.T, covs[i], q[i], covs, q, tau_p, s).T
        err = h[:, i] - h_hat
        emp = err.conj().T @ err / n
        ana = error_correlation(covs[i], q[i], covs, q, tau_p, s)
        assert np.linalg.norm(emp.T - ana) <= 0.05 * np.linalg.norm(ana)


def test_composite_single_user_consistency():
    rng = np.random.default_rng(9)
    (r,) = _random_covs(rng, 1, 4)
    y = complex_normal(rng, 4)
    q, tau_p, s = 0.6, 1, 0.2
    comp = composite_estimate(y, [r], [q], tau_p, s)
    per_user = mmse_estimate(y, r, q, [r], [q], tau_p, s)
    assert np.allclose(comp, tau_p * np.sqrt(q) * per_user, atol=1e-12)


def test_composite_zero_powers():
    rng = np.random.default_rng(10)
    covs = _random_covs(rng, 2, 3)
    y = complex_normal(rng, 3)
    assert np.allclose(composite_estimate(y, covs, [0.0, 0.0], 2, 0.5), 0.0)


def test_composite_algebraic_identity():
    rng = np.random.default_rng(11)
    covs = _random_covs(rng, 2, 2)
    q = np.array([0.9, 0.3])
    tau_p, s = 2, 0.4
    y = complex_normal(rng, 2)
    comp = composite_estimate(y, covs, q, tau_p, s)
    parts = sum(np.sqrt(q[i]) * mmse_estimate(y, covs[i], q[i], covs, q,
                                              tau_p, s)
                for i in range(2))
    assert np.max(np.abs(comp - tau_p * parts)) <= 1e-10
    assert np.allclose(comp, composite_gain_matrix(covs, q, tau_p, s) @ y)


def test_estimate_scale_invariance():
    # scaling all covariances and the noise by c leaves h_hat(y) unchanged
    rng = np.random.default_rng(12)
    covs = _random_covs(rng, 2, 4)
    q = [0.5, 1.0]
    y = complex_normal(rng, 4)
    base = mmse_estimate(y, covs[0], q[0], covs, q, 2, 0.3)
    c = 7.0
    scaled = mmse_estimate(y, c * covs[0], q[0], [c * r for r in covs], q, 2,
                           c * 0.3)
    assert np.allclose(base, scaled, atol=1e-12)
