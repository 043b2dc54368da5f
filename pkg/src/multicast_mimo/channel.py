"""Network snapshots: user drops, large-scale fading, ULA spatial covariance
matrices and correlated Rayleigh channel realizations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz


class CovarianceIntegrationError(RuntimeError):
    """Angular integration did not reach the requested tolerance."""


class IndefiniteCovarianceError(RuntimeError):
    """A covariance matrix violated positive semi-definiteness."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass
class GeometryConfig:
    """Cell layout: scattering clusters dropped uniformly in an annulus."""

    cell_radius: float = 200.0
    n_clusters: int = 5
    users_per_cluster: int = 8
    cluster_radius: float = 5.0
    min_bs_distance: float = 10.0
    bs_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.cell_radius > self.cluster_radius > 0):
            raise ValueError("need cell_radius > cluster_radius > 0")
        if self.n_clusters < 1 or self.users_per_cluster < 1:
            raise ValueError("cluster counts must be >= 1")
        if not (0 <= self.min_bs_distance < self.cell_radius):
            raise ValueError("min_bs_distance must lie inside the cell")

    @property
    def n_users(self) -> int:
        return self.n_clusters * self.users_per_cluster


@dataclass
class ChannelConfig:
    """Array / propagation parameters. Angles in radians, asd is the angular
    standard deviation of the scattering around the nominal AoA."""

    n_antennas: int = 64
    antenna_spacing: float = 0.5  # in wavelengths
    asd: float = math.radians(10.0)
    carrier_freq_ghz: float = 2.0
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 7.0
    shadow_std_db: float = 6.0
    shadow_intra_corr: float = 1.0
    shadow_inter_corr: float = 0.1
    angular_model: str = "gaussian"  # or "uniform"
    n_paths: int | None = None  # None -> numerical integration

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.antenna_spacing <= 0 or self.asd <= 0:
            raise ValueError("antenna_spacing and asd must be positive")
        if self.angular_model not in ("gaussian", "uniform"):
            raise ValueError("angular_model must be 'gaussian' or 'uniform'")
        if not (0 <= self.shadow_inter_corr <= self.shadow_intra_corr <= 1):
            raise ValueError("need 0 <= inter_corr <= intra_corr <= 1")


def noise_power(cfg: ChannelConfig) -> float:
    """Receiver noise power in W: -174 dBm/Hz + 10log10(B) + noise figure."""
    dbm = -174.0 + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db
    return dbm_to_watt(dbm)


def steering_vector(angle: float, n_antennas: int, spacing: float) -> np.ndarray:
    """ULA array response, element m = exp(j 2 pi spacing m cos(angle))."""
    m = np.arange(n_antennas)
    return np.exp(2j * np.pi * spacing * m * np.cos(angle))


def _angular_nodes(phi: float, asd: float, model: str, n: int):
    """Quadrature nodes/weights for the angular density (weights sum to 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    if model == "gaussian":
        half = 6.0 * asd
        nodes = phi + half * x
        pdf = np.exp(-0.5 * ((nodes - phi) / asd) ** 2)
        weights = w * pdf
    else:  # uniform with mean phi and standard deviation asd
        half = math.sqrt(3.0) * asd
        nodes = phi + half * x
        weights = w.copy()
    return nodes, weights / weights.sum()


def local_scattering_covariance(
    phi: float,
    asd: float,
    beta: float,
    n_antennas: int,
    spacing: float,
    model: str = "gaussian",
    n_paths: int | None = None,
    rng: np.random.Generator | None = None,
    tol: float = 1e-8,
    max_nodes: int = 32768,
) -> np.ndarray:
    """Spatial covariance of the local-scattering model.

    With n_paths=None the covariance entries are the angular expectation of
    the steering outer product, computed by Gauss-Legendre quadrature with
    order doubling until successive lag values agree within `tol`. With a
    finite n_paths, the empirical covariance of equal-strength paths is
    returned instead. The trace is rescaled to exactly n_antennas * beta.
    """
    if beta <= 0 or asd <= 0:
        raise ValueError("beta and asd must be positive")
    lags = 2.0 * np.pi * spacing * np.arange(n_antennas)

    if n_paths is not None:
        if rng is None:
            raise ValueError("finite-path model needs an rng")
        if model == "gaussian":
            angles = rng.normal(phi, asd, size=n_paths)
        else:
            half = math.sqrt(3.0) * asd
            angles = rng.uniform(phi - half, phi + half, size=n_paths)
        a = np.exp(1j * np.outer(lags, np.cos(angles)))  # (M, N)
        r = (beta / n_paths) * (a @ a.conj().T)
    else:
        n = 128
        col = _first_column(phi, asd, model, lags, n)
        while True:
            n *= 2
            if n > max_nodes:
                raise CovarianceIntegrationError(
                    f"angular quadrature not converged with {max_nodes} nodes"
                )
            col2 = _first_column(phi, asd, model, lags, n)
            if np.max(np.abs(col2 - col)) < tol:
                col = col2
                break
            col = col2
        r = beta * toeplitz(col, col.conj())

    r = 0.5 * (r + r.conj().T)
    r *= (n_antennas * beta) / np.real(np.trace(r))
    return r


def _first_column(phi, asd, model, lags, n):
    nodes, weights = _angular_nodes(phi, asd, model, n)
    return np.exp(1j * np.outer(lags, np.cos(nodes))) @ weights


def drop_users(geom: GeometryConfig, rng: np.random.Generator):
    """Drop cluster centers uniformly in the annulus and users uniformly in
    a disc around their center. Returns (positions (K,2), cluster_ids (K,))."""
    r_min = geom.min_bs_distance
    r_max = geom.cell_radius - geom.cluster_radius
    radii = np.sqrt(rng.uniform(r_min**2, r_max**2, size=geom.n_clusters))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=geom.n_clusters)
    centers = np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))
    centers += np.asarray(geom.bs_position)

    positions = np.empty((geom.n_users, 2))
    cluster_ids = np.repeat(np.arange(geom.n_clusters), geom.users_per_cluster)
    for c in range(geom.n_clusters):
        n = geom.users_per_cluster
        rho = geom.cluster_radius * np.sqrt(rng.uniform(0.0, 1.0, size=n))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        offs = np.column_stack((rho * np.cos(theta), rho * np.sin(theta)))
        positions[cluster_ids == c] = centers[c] + offs
    return positions, cluster_ids


def large_scale_fading(distance_m: float, carrier_freq_ghz: float,
                       shadow_db: float = 0.0):
    """3GPP-style path loss; returns (pathloss_db, beta linear gain)."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    pathloss_db = (32.4 + 20.0 * np.log10(carrier_freq_ghz)
                   + 37.6 * np.log10(distance_m))
    beta = 10.0 ** (-(pathloss_db + shadow_db) / 10.0)
    return pathloss_db, beta


def sample_shadowing(cluster_ids, std_db: float, rho_intra: float,
                     rho_inter: float, rng: np.random.Generator) -> np.ndarray:
    """Jointly Gaussian shadowing (dB) with intra-/inter-cluster correlation.

    Built from shared factors: a cell-wide term, a per-cluster term and a
    per-user term, which realizes the two-level correlation exactly and keeps
    same-cluster values identical when rho_intra = 1.
    """
    if not (0 <= rho_inter <= rho_intra <= 1):
        raise ValueError("shadowing correlation structure is not PSD")
    cluster_ids = np.asarray(cluster_ids)
    n = cluster_ids.size
    n_clusters = int(cluster_ids.max()) + 1 if n else 0
    z_cell = rng.standard_normal()
    z_cluster = rng.standard_normal(n_clusters)
    z_user = rng.standard_normal(n)
    shadow = (math.sqrt(rho_inter) * z_cell
              + math.sqrt(rho_intra - rho_inter) * z_cluster[cluster_ids]
              + math.sqrt(1.0 - rho_intra) * z_user)
    return std_db * shadow


def psd_sqrt_factor(r: np.ndarray, tol_scale: float = 1e-9) -> np.ndarray:
    """Factor L with L L^H = R via eigendecomposition. Small negative
    eigenvalues (>= -tol_scale * trace / M) are clipped at zero."""
    m = r.shape[0]
    eigval, eigvec = np.linalg.eigh(r)
    floor = -tol_scale * np.real(np.trace(r)) / m
    if eigval.min() < floor:
        raise IndefiniteCovarianceError(
            f"min eigenvalue {eigval.min():.3e} below tolerance {floor:.3e}")
    return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """i.i.d. CN(0,1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def sample_channels(covariances, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Draw h ~ CN(0, R) for each covariance; returns (n_draws, K, M)."""
    factors = [psd_sqrt_factor(r) for r in covariances]
    k = len(factors)
    m = factors[0].shape[0]
    out = np.empty((n_draws, k, m), dtype=complex)
    for i, fac in enumerate(factors):
        z = complex_normal(rng, (n_draws, m))
        out[:, i, :] = z @ fac.T
    return out


@dataclass
class UserLargeScale:
    """Large-scale state of one user within a snapshot."""

    position: np.ndarray
    cluster_id: int
    nominal_angle: float
    distance: float
    pathloss_db: float
    shadow_db: float
    beta: float


def drop_large_scale(geom: GeometryConfig, chan: ChannelConfig,
                     rng: np.random.Generator):
    """One large-scale realization: positions, shadowing, per-user covariance.

    Returns (list of UserLargeScale, list of covariance matrices).
    """
    positions, cluster_ids = drop_users(geom, rng)
    shadow = sample_shadowing(cluster_ids, chan.shadow_std_db,
                              chan.shadow_intra_corr, chan.shadow_inter_corr,
                              rng)
    bs = np.asarray(geom.bs_position)
    users = []
    covariances = []
    for k in range(positions.shape[0]):
        delta = positions[k] - bs
        dist = float(np.hypot(*delta))
        angle = float(np.arctan2(delta[1], delta[0]))
        pl_db, beta = large_scale_fading(dist, chan.carrier_freq_ghz,
                                         float(shadow[k]))
        users.append(UserLargeScale(positions[k], int(cluster_ids[k]), angle,
                                    dist, float(pl_db), float(shadow[k]), beta))
        covariances.append(local_scattering_covariance(
            angle, chan.asd, beta, chan.n_antennas, chan.antenna_spacing,
            model=chan.angular_model, n_paths=chan.n_paths, rng=rng))
    return users, covariances


def export_covariance(path, r: np.ndarray, user_id: int, beta: float) -> None:
    """Dump a covariance matrix: one JSON header line, then row-major
    complex128 pairs (little-endian float64 re,im)."""
    header = {"m": int(r.shape[0]), "user": int(user_id), "beta": float(beta)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.ascontiguousarray(r, dtype="<c16").tobytes())


def load_covariance(path):
    """Inverse of export_covariance; returns (R, header dict)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        m = header["m"]
        r = np.frombuffer(fh.read(), dtype="<c16").reshape(m, m)
    return r.copy(), header
