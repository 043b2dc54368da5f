"""Monte-Carlo estimation of the SINR gain coefficients, and the SINR /
spectral-efficiency evaluation built on them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import estimation
from .channel import complex_normal
from .precoding import ZeroCompositeEstimateError, zf_precoders_batch
from .subgrouping import Partition

PRECODERS = ("mr", "zf")


@dataclass
class GainTable:
    """Per-user signal coefficient a_k = |E{h_k^H w_g(k)}|^2 and per-user,
    per-subgroup interference coefficients b (with the own-subgroup column
    holding the variance of the effective channel), plus standard errors."""

    a: np.ndarray                  # (K,)
    b: np.ndarray                  # (K, G)
    se_a: np.ndarray
    se_b: np.ndarray
    sigma2: float
    n_mc: int
    subgroup_of_user: np.ndarray   # (K,)

    @property
    def n_subgroups(self) -> int:
        return self.b.shape[1]

    def to_json(self) -> str:
        return json.dumps({
            "a": self.a.tolist(), "b": self.b.tolist(),
            "se_a": self.se_a.tolist(), "se_b": self.se_b.tolist(),
            "sigma2": self.sigma2, "n_mc": self.n_mc,
            "subgroup_of_user": self.subgroup_of_user.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GainTable":
        d = json.loads(text)
        return cls(np.asarray(d["a"], dtype=float),
                   np.asarray(d["b"], dtype=float),
                   np.asarray(d["se_a"], dtype=float),
                   np.asarray(d["se_b"], dtype=float),
                   float(d["sigma2"]), int(d["n_mc"]),
                   np.asarray(d["subgroup_of_user"], dtype=int))


@dataclass
class ChannelBatch:
    """Common-random-number draws for one snapshot/strategy: colored channel
    realizations (n_mc, K, M) and standard CN(0,1) pilot-noise draws
    (n_mc, G, M). Reusing one batch across re-evaluations removes MC jitter
    from iterative power-control comparisons."""

    channels: np.ndarray
    noise: np.ndarray

    @property
    def n_mc(self) -> int:
        return self.channels.shape[0]


def draw_batch(cov_factors, n_mc: int, n_subgroups: int,
               rng: np.random.Generator,
               channels: np.ndarray | None = None) -> ChannelBatch:
    """Draw a CRN batch. Pass a pre-colored `channels` array to share the
    small-scale fading across strategies (paired comparisons)."""
    if channels is None:
        k = len(cov_factors)
        m = cov_factors[0].shape[0]
        z = complex_normal(rng, (n_mc, k, m))
        channels = np.empty_like(z)
        for i, fac in enumerate(cov_factors):
            channels[:, i, :] = z[:, i, :] @ fac.T
    noise = complex_normal(rng, (n_mc, n_subgroups, channels.shape[2]))
    return ChannelBatch(channels, noise)


def _pilot_observations(batch: ChannelBatch, covariances, partition: Partition,
                        q, sigma2: float, convention: str):
    """Despread pilot observation per subgroup, all blocks: list of (n, M)."""
    tau_p = partition.n_subgroups
    std = math.sqrt(estimation.pilot_noise_variance(sigma2, tau_p, convention))
    obs = []
    for g, members in enumerate(partition.members):
        signal = np.einsum("k,nkm->nm", np.sqrt(np.asarray(q)[members]),
                           batch.channels[:, members, :])
        obs.append(tau_p * signal + std * batch.noise[:, g, :])
    return obs


def _composite_estimates(batch, covariances, partition, q, sigma2, convention,
                         observations=None):
    """(n, M, G) composite estimates for all subgroups and blocks."""
    tau_p = partition.n_subgroups
    sig_eff = estimation.effective_sigma2(sigma2, tau_p, convention)
    if observations is None:
        observations = _pilot_observations(batch, covariances, partition, q,
                                           sigma2, convention)
    n, _, m = batch.channels.shape
    h_hat = np.empty((n, m, partition.n_subgroups), dtype=complex)
    q = np.asarray(q)
    for g, members in enumerate(partition.members):
        covs_g = [covariances[k] for k in members]
        c = estimation.composite_gain_matrix(covs_g, q[members], tau_p, sig_eff)
        h_hat[:, :, g] = observations[g] @ c.T
    return h_hat


def _precoders(h_hat: np.ndarray, scheme: str) -> np.ndarray:
    if scheme == "mr":
        norms = np.linalg.norm(h_hat, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ZeroCompositeEstimateError("zero composite estimate")
        return h_hat / norms
    if scheme == "zf":
        return zf_precoders_batch(h_hat)
    raise ValueError(f"unknown precoder {scheme!r}")


def _gains_from_inner(inner: np.ndarray, own: np.ndarray, sigma2: float):
    """Reduce effective-channel samples inner (n, K, G) to a GainTable."""
    n = inner.shape[0]
    mu = inner.mean(axis=0)                       # (K, G)
    m2 = np.mean(np.abs(inner) ** 2, axis=0)      # (K, G)
    se_m2 = np.std(np.abs(inner) ** 2, axis=0) / math.sqrt(n)
    k_idx = np.arange(inner.shape[1])
    mu_own = mu[k_idx, own]
    a = np.abs(mu_own) ** 2
    # 1-sigma error of |mean|^2, linearized along the mean direction
    phase = np.exp(-1j * np.angle(np.where(mu_own == 0, 1.0, mu_own)))
    along = np.real(inner[:, k_idx, own] * phase[None, :])
    se_a = 2.0 * np.abs(mu_own) * np.std(along, axis=0) / math.sqrt(n)
    b = m2.copy()
    b[k_idx, own] = np.maximum(m2[k_idx, own] - a, 0.0)
    se_b = se_m2
    se_b[k_idx, own] = np.hypot(se_m2[k_idx, own], se_a)
    return a, b, se_a, se_b


def estimate_gains(batch: ChannelBatch, covariances, partition: Partition,
                   q, sigma2: float, precoder: str = "mr",
                   convention: str = "scaled") -> GainTable:
    """Run training + precoding over every block of the batch and estimate
    the expectations defining the effective SINR by sample means."""
    if batch.n_mc < 2:
        raise ValueError("need at least 2 Monte-Carlo blocks")
    h_hat = _composite_estimates(batch, covariances, partition, q, sigma2,
                                 convention)
    w = _precoders(h_hat, precoder)
    inner = np.matmul(batch.channels.conj(), w)
    a, b, se_a, se_b = _gains_from_inner(inner, partition.subgroup_of_user,
                                         sigma2)
    return GainTable(a, b, se_a, se_b, sigma2, batch.n_mc,
                     partition.subgroup_of_user.copy())


def subgroup_sinr_evaluator(batch: ChannelBatch, covariances,
                            partition: Partition, q_full, p, sigma2: float,
                            g: int, precoder: str = "mr",
                            convention: str = "scaled"):
    """Factory for iterative pilot power control on subgroup g: returns
    evaluate(q_g) -> per-member SINRs, holding every other subgroup's pilot
    powers (and, under MR, precoders) fixed and reusing the CRN batch."""
    tau_p = partition.n_subgroups
    sig_eff = estimation.effective_sigma2(sigma2, tau_p, convention)
    members = partition.members[g]
    covs_g = [covariances[k] for k in members]
    q_full = np.asarray(q_full, dtype=float)
    p = np.asarray(p, dtype=float)
    h_members = batch.channels[:, members, :]

    obs = _pilot_observations(batch, covariances, partition, q_full, sigma2,
                              convention)
    std = math.sqrt(estimation.pilot_noise_variance(sigma2, tau_p, convention))
    h_hat_fixed = _composite_estimates(batch, covariances, partition, q_full,
                                       sigma2, convention, observations=obs)

    def _estimate_g(q_g):
        signal = np.einsum("k,nkm->nm", np.sqrt(q_g), h_members)
        y_g = tau_p * signal + std * batch.noise[:, g, :]
        c = estimation.composite_gain_matrix(covs_g, q_g, tau_p, sig_eff)
        return y_g @ c.T

    if precoder == "mr":
        # only w_g reacts to q_g: cache the other subgroups' interference
        w_fixed = _precoders(h_hat_fixed, "mr")
        m2_fixed = np.mean(np.abs(np.matmul(h_members.conj(), w_fixed)) ** 2,
                           axis=0)  # (Kg, G); own column overwritten below

        def evaluate(q_g: np.ndarray) -> np.ndarray:
            h_hat_g = _estimate_g(q_g)
            norms = np.linalg.norm(h_hat_g, axis=1, keepdims=True)
            if np.any(norms == 0.0):
                raise ZeroCompositeEstimateError("zero composite estimate")
            w_g = h_hat_g / norms
            inner = np.sum(h_members.conj() * w_g[:, None, :], axis=2)
            mu = inner.mean(axis=0)
            a = np.abs(mu) ** 2
            b = m2_fixed.copy()
            b[:, g] = np.maximum(np.mean(np.abs(inner) ** 2, axis=0) - a, 0.0)
            return p[g] * a / (b @ p + sigma2)
    else:
        def evaluate(q_g: np.ndarray) -> np.ndarray:
            h_hat = h_hat_fixed.copy()
            h_hat[:, :, g] = _estimate_g(q_g)
            w = _precoders(h_hat, precoder)
            inner = np.matmul(h_members.conj(), w)
            a, b, _, _ = _gains_from_inner(
                inner, np.full(members.size, g), sigma2)
            return p[g] * a / (b @ p + sigma2)

    return evaluate


def sinr(p, gains: GainTable) -> np.ndarray:
    """Effective per-user SINR for downlink powers p (length G)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    return p[gains.subgroup_of_user] * gains.a / (gains.b @ p + gains.sigma2)


def spectral_efficiency(gamma, tau_p: int, tau: int):
    """(1 - tau_p/tau) log2(1 + gamma), in b/s/Hz."""
    if not 0 < tau_p < tau:
        raise ValueError("need 0 < tau_p < tau")
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    return (1.0 - tau_p / tau) * np.log2(1.0 + gamma)


@dataclass
class SpectralEfficiencyReport:
    se_user: np.ndarray       # (K,)
    se_subgroup: np.ndarray   # (G,)
    sum_se: float
    prelog: float


def aggregate_se(se_user, partition: Partition, prelog: float = 1.0
                 ) -> SpectralEfficiencyReport:
    """Subgroup SE = min over its users; sum SE = sum_g K_g * SE_g."""
    se_user = np.asarray(se_user, dtype=float)
    if se_user.size != partition.n_users:
        raise ValueError("SE vector does not cover the partition")
    se_subgroup = np.array([se_user[m].min() for m in partition.members])
    sum_se = float(np.dot(partition.sizes, se_subgroup))
    return SpectralEfficiencyReport(se_user, se_subgroup, sum_se, prelog)
