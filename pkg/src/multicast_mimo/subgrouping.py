"""Covariance-similarity user partitioning and the baseline strategies."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel import complex_normal, psd_sqrt_factor

STRATEGIES = ("proposed", "high_orthogonality", "random", "single_group", "unicast")


def similarity_matrix(covariances) -> np.ndarray:
    """Pairwise similarity s(i,j) = tr(R_i R_j) / (tr(R_i) tr(R_j)).

    Large values mean strongly overlapping spatial signatures (low mutual
    orthogonality); this is also the variance of the normalized instantaneous
    inner product of the two users' channels.
    """
    traces = np.array([np.real(np.trace(r)) for r in covariances])
    if np.any(traces <= 0):
        raise ValueError("covariance with non-positive trace")
    k = len(covariances)
    s = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            s[i, j] = s[j, i] = np.real(
                np.einsum("ab,ba->", covariances[i], covariances[j]))
    return s / np.outer(traces, traces)


def variance_identity_check(r_i: np.ndarray, r_j: np.ndarray, n_draws: int,
                            rng: np.random.Generator):
    """Monte-Carlo oracle: empirical variance of the normalized inner product
    of independent draws from (R_i, R_j) vs the trace formula. Returns
    (empirical, analytic)."""
    li, lj = psd_sqrt_factor(r_i), psd_sqrt_factor(r_j)
    m = r_i.shape[0]
    hi = complex_normal(rng, (n_draws, m)) @ li.T
    hj = complex_normal(rng, (n_draws, m)) @ lj.T
    norm = np.sqrt(np.real(np.trace(r_i)) * np.real(np.trace(r_j)))
    stat = np.einsum("nm,nm->n", hi.conj(), hj) / norm
    empirical = float(np.mean(np.abs(stat) ** 2))
    analytic = float(np.real(np.einsum("ab,ba->", r_i, r_j))
                     / (np.real(np.trace(r_i)) * np.real(np.trace(r_j))))
    return empirical, analytic


@dataclass
class Partition:
    """Disjoint cover of the K users by G nonempty subgroups."""

    subgroup_of_user: np.ndarray
    n_subgroups: int

    def __post_init__(self):
        self.subgroup_of_user = np.asarray(self.subgroup_of_user, dtype=int)
        self.validate()

    def validate(self):
        g = self.n_subgroups
        labels = self.subgroup_of_user
        if labels.ndim != 1 or labels.size < g:
            raise ValueError("fewer users than subgroups")
        if labels.min() < 0 or labels.max() >= g:
            raise ValueError("subgroup label out of range")
        if len(np.unique(labels)) != g:
            raise ValueError("empty subgroup")

    @property
    def n_users(self) -> int:
        return self.subgroup_of_user.size

    @property
    def members(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.subgroup_of_user == g)
                for g in range(self.n_subgroups)]

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.subgroup_of_user, minlength=self.n_subgroups)

    def to_json(self) -> str:
        return json.dumps({"n_subgroups": self.n_subgroups,
                           "subgroup_of_user": self.subgroup_of_user.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        d = json.loads(text)
        return cls(np.asarray(d["subgroup_of_user"]), d["n_subgroups"])


def partition_users(s: np.ndarray, n_subgroups: int, strategy: str,
                    rng: np.random.Generator | None = None) -> Partition:
    """Partition K users into subgroups.

    proposed           k-medoids on dissimilarity 1 - s (similar users together)
    high_orthogonality proposed spatial clusters, then a round-robin
                       transversal so each subgroup mixes clusters
    random             uniform balanced assignment
    single_group       everyone in one subgroup
    unicast            one singleton subgroup per user
    """
    k = s.shape[0]
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy == "single_group":
        return Partition(np.zeros(k, dtype=int), 1)
    if strategy == "unicast":
        return Partition(np.arange(k), k)
    if n_subgroups > k:
        raise ValueError("more subgroups than users")
    if rng is None:
        rng = np.random.default_rng(0)

    if strategy == "random":
        perm = rng.permutation(k)
        labels = np.empty(k, dtype=int)
        labels[perm] = np.arange(k) % n_subgroups
        return Partition(labels, n_subgroups)

    clusters = _pam(1.0 - s, n_subgroups, rng)
    if strategy == "proposed":
        return Partition(clusters, n_subgroups)

    # high_orthogonality: walk the spatial clusters and deal their members
    # to subgroups round-robin, so subgroups draw from different clusters.
    labels = np.empty(k, dtype=int)
    counter = 0
    for c in range(n_subgroups):
        for u in np.flatnonzero(clusters == c):
            labels[u] = counter % n_subgroups
            counter += 1
    return Partition(labels, n_subgroups)


def _pam(d: np.ndarray, g: int, rng: np.random.Generator,
         n_restarts: int = 20, max_iter: int = 100) -> np.ndarray:
    """k-medoids (PAM, alternating assignment/medoid update) on a pairwise
    dissimilarity matrix. Ties go to the lowest index; the best of
    n_restarts by total dissimilarity to medoids wins."""
    k = d.shape[0]
    if g == k:
        return np.arange(k)
    best_cost = np.inf
    best_labels = None
    for _ in range(n_restarts):
        medoids = np.sort(rng.choice(k, size=g, replace=False))
        for _ in range(max_iter):
            labels = np.argmin(d[:, medoids], axis=1)
            labels[medoids] = np.arange(g)  # a medoid always keeps its cluster
            new_medoids = medoids.copy()
            for c in range(g):
                idx = np.flatnonzero(labels == c)
                within = d[np.ix_(idx, idx)].sum(axis=1)
                new_medoids[c] = idx[int(np.argmin(within))]
            if np.array_equal(new_medoids, medoids):
                break
            medoids = new_medoids
        cost = float(d[np.arange(k), medoids[labels]].sum())
        if cost < best_cost - 1e-15:
            best_cost = cost
            best_labels = labels.copy()
    # canonical label order: subgroup ids by first occurrence
    remap = {}
    out = np.empty(k, dtype=int)
    for i, lab in enumerate(best_labels):
        if lab not in remap:
            remap[lab] = len(remap)
        out[i] = remap[lab]
    return out
