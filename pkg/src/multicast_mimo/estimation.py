"""Uplink training with one shared pilot per subgroup: MMSE channel
estimates, error correlation matrices and the composite subgroup estimate."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import complex_normal

# Despread-noise conventions. "scaled" draws the despread noise with
# variance tau_p * sigma2, under which the textbook estimator expressions
# (with sigma2 inside the regularized inverse) are the exact MMSE. "plain"
# draws it with variance sigma2; the estimator then needs sigma2 / tau_p in
# the same slot to stay the true MMSE.
CONVENTIONS = ("scaled", "plain")


def pilot_noise_variance(sigma2: float, tau_p: int, convention: str = "scaled") -> float:
    """Per-element variance of the despread pilot noise."""
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    return tau_p * sigma2 if convention == "scaled" else sigma2


def effective_sigma2(sigma2: float, tau_p: int, convention: str = "scaled") -> float:
    """Noise value to plug into the estimator's regularized inverse so that
    it is the exact MMSE under the chosen despreading convention."""
    return pilot_noise_variance(sigma2, tau_p, convention) / tau_p


def received_pilot(channels: np.ndarray, q: np.ndarray, tau_p: int,
                   sigma2: float, rng: np.random.Generator,
                   convention: str = "scaled") -> np.ndarray:
    """Despread pilot observation of one subgroup for a single coherence
    block: y = tau_p * sum_k sqrt(q_k) h_k + n. channels has shape (Kg, M)."""
    q = np.asarray(q, dtype=float)
    signal = tau_p * (np.sqrt(q) @ channels)
    std = math.sqrt(pilot_noise_variance(sigma2, tau_p, convention))
    return signal + std * complex_normal(rng, channels.shape[1])


def training_matrix(covariances_g, q_g, tau_p: int, sigma2: float) -> np.ndarray:
    """The Hermitian PD matrix tau_p * sum_j q_j R_j + sigma2 I."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    m = covariances_g[0].shape[0]
    b = sigma2 * np.eye(m, dtype=complex)
    for q, r in zip(q_g, covariances_g):
        if q:
            b += (tau_p * q) * r
    return b


def mmse_estimate(y: np.ndarray, r_k: np.ndarray, q_k: float,
                  covariances_g, q_g, tau_p: int, sigma2: float) -> np.ndarray:
    """Per-user MMSE estimate sqrt(q_k) R_k B^{-1} y with B the training
    matrix of the user's subgroup."""
    b = training_matrix(covariances_g, q_g, tau_p, sigma2)
    return math.sqrt(q_k) * (r_k @ cho_solve(cho_factor(b), y))


def error_correlation(r_k: np.ndarray, q_k: float, covariances_g, q_g,
                      tau_p: int, sigma2: float) -> np.ndarray:
    """Correlation of the estimation error h - h_hat."""
    b = training_matrix(covariances_g, q_g, tau_p, sigma2)
    rt = r_k - (q_k * tau_p) * (r_k @ cho_solve(cho_factor(b), r_k))
    return 0.5 * (rt + rt.conj().T)


def composite_gain_matrix(covariances_g, q_g, tau_p: int, sigma2: float) -> np.ndarray:
    """Matrix C with h_hat_g = C y: C = tau_p (sum_k q_k R_k) B^{-1}.
    Shared by all users of the subgroup, so compute it once per evaluation."""
    b = training_matrix(covariances_g, q_g, tau_p, sigma2)
    s = sum((q * r for q, r in zip(q_g, covariances_g)),
            start=np.zeros_like(covariances_g[0]))
    return tau_p * cho_solve(cho_factor(b), s.conj().T).conj().T


def composite_estimate(y: np.ndarray, covariances_g, q_g, tau_p: int,
                       sigma2: float) -> np.ndarray:
    """Composite MMSE estimate of the subgroup channel; equals
    tau_p * sum_k sqrt(q_k) * per-user estimates."""
    return composite_gain_matrix(covariances_g, q_g, tau_p, sigma2) @ y
