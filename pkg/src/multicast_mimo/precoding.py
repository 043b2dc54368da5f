"""Per-subgroup multicast precoders built from composite channel estimates."""

from __future__ import annotations

import numpy as np


class ZeroCompositeEstimateError(RuntimeError):
    """MR requested on a zero composite estimate (subgroup unservable)."""


class RankDeficientEstimatesError(RuntimeError):
    """Unregularized ZF on rank-deficient composite estimates."""


def mr_precoder(h_hat: np.ndarray) -> np.ndarray:
    """Maximum-ratio: unit-norm copy of the composite estimate."""
    norm = np.linalg.norm(h_hat)
    if norm == 0.0:
        raise ZeroCompositeEstimateError("composite estimate is zero")
    return h_hat / norm


def zf_precoders(h_hat: np.ndarray, ridge: float | None = None) -> np.ndarray:
    """Zero-forcing across subgroups: columns of H (H^H H + ridge I)^{-1},
    each normalized to unit norm. h_hat has the composite estimates as
    columns (M, G). ridge=None picks 1e-9 * tr(H^H H)/G; pass 0 for exact
    ZF (raises on rank deficiency)."""
    h_hat = np.atleast_2d(h_hat)
    g = h_hat.shape[1]
    gram = h_hat.conj().T @ h_hat
    if ridge is None:
        ridge = 1e-9 * np.real(np.trace(gram)) / g
    if ridge == 0.0 and np.linalg.matrix_rank(gram) < g:
        raise RankDeficientEstimatesError(
            "composite estimates are rank deficient; use a ridge > 0")
    w = h_hat @ np.linalg.inv(gram + ridge * np.eye(g))
    norms = np.linalg.norm(w, axis=0)
    if np.any(norms == 0.0):
        raise ZeroCompositeEstimateError("zero ZF direction")
    return w / norms


def zf_precoders_batch(h_hat: np.ndarray, ridge_scale: float = 1e-9) -> np.ndarray:
    """Batched ZF for h_hat of shape (n, M, G); returns (n, M, G)."""
    g = h_hat.shape[2]
    gram = np.matmul(h_hat.conj().transpose(0, 2, 1), h_hat)
    tr = np.real(np.einsum("ngg->n", gram))
    ridge = ridge_scale * tr / g
    gram = gram + ridge[:, None, None] * np.eye(g)
    w = np.matmul(h_hat, np.linalg.inv(gram))
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroCompositeEstimateError("zero ZF direction")
    return w / norms
