"""Fractional DL pre-allocation, pilot power initialization, the greedy
intra-subgroup max-min pilot power search, and the inter-subgroup max-min
downlink allocation (bisection over a linear feasibility problem solved by
interference-function fixed point)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import dbm_to_watt
from .performance import GainTable
from .subgrouping import Partition


@dataclass
class PowerBudget:
    p_dl: float  # BS downlink budget, W
    q_ul: float  # per-user pilot cap, W

    def __post_init__(self):
        if self.p_dl <= 0 or self.q_ul <= 0:
            raise ValueError("power budgets must be positive")

    @classmethod
    def from_dbm(cls, p_dl_dbm: float, q_ul_dbm: float) -> "PowerBudget":
        return cls(dbm_to_watt(p_dl_dbm), dbm_to_watt(q_ul_dbm))


def fractional_dl_power(covariances, error_covariances, partition: Partition,
                        nu: float, p_dl: float) -> np.ndarray:
    """A-priori DL split p_g proportional to beta_g^nu, where beta_g sums
    the estimable channel gain tr(R) - tr(R_err) over the subgroup."""
    if not -1.0 <= nu <= 1.0:
        raise ValueError("nu must lie in [-1, 1]")
    betas = np.empty(partition.n_subgroups)
    for g, members in enumerate(partition.members):
        betas[g] = sum(np.real(np.trace(covariances[k]))
                       - np.real(np.trace(error_covariances[k]))
                       for k in members) / covariances[0].shape[0]
    if np.any(betas <= 0):
        raise ValueError("subgroup with no estimable channel gain")
    weights = betas ** nu
    return p_dl * weights / weights.sum()


def pilot_power_uncorrelated(betas_g, p_g: float, q_ul: float,
                             sigma2: float = 1.0) -> np.ndarray:
    """Closed-form pilot powers that are max-min optimal for uncorrelated
    fading. Evaluated on noise-normalized gains beta/sigma2 so the
    1 + beta*p term is dimensionless; the weakest user transmits at q_ul."""
    bt = np.asarray(betas_g, dtype=float) / sigma2
    if np.any(bt <= 0):
        raise ValueError("betas must be positive")
    load = 1.0 + bt * p_g
    upsilon = np.min(q_ul * bt**2 / load)
    return upsilon * load / bt**2


@dataclass
class IntraMmfResult:
    q: np.ndarray
    gamma_min: float
    n_evals: int          # while-loop passes, incl. the final rejected one
    n_accepted: int
    gamma_trace: list = field(default_factory=list)


def intra_subgroup_mmf(evaluate, q_init: np.ndarray, q_ul: float,
                       mu_mode: str = "frozen", max_iter: int = 100,
                       accept_margin: float = 0.0) -> IntraMmfResult:
    """Greedy max-min pilot power search for one subgroup.

    evaluate(q) must return the per-member SINRs of the full
    training -> precoding -> SINR chain, deterministically for fixed q
    (common random numbers). Each pass rescales the step-size-weighted
    powers so the strongest pilot transmits at the cap, and keeps the
    candidate only if the minimum SINR strictly improves (by more than
    accept_margin, for noisy evaluators). mu_mode "frozen" keeps the step
    sizes from the initialization (converges in a couple of passes);
    "refresh" recomputes them from each accepted iterate (slightly better
    equalization, many more passes)."""
    if mu_mode not in ("refresh", "frozen"):
        raise ValueError("mu_mode must be 'refresh' or 'frozen'")
    q_star = np.asarray(q_init, dtype=float).copy()
    gamma = np.asarray(evaluate(q_star), dtype=float)
    gamma_min = float(gamma.min())
    mu = gamma_min / gamma
    trace = [gamma_min]
    n_evals = 0
    n_accepted = 0
    while n_evals < max_iter:
        candidate = mu * q_star
        candidate *= q_ul / candidate.max()
        gamma = np.asarray(evaluate(candidate), dtype=float)
        n_evals += 1
        new_min = float(gamma.min())
        if new_min > gamma_min + accept_margin:
            gamma_min = new_min
            q_star = candidate
            n_accepted += 1
            trace.append(gamma_min)
            if mu_mode == "refresh":
                mu = gamma_min / gamma
        else:
            break
    return IntraMmfResult(q_star, gamma_min, n_evals, n_accepted, trace)


def feasibility_check(target: float, gains: GainTable, p_dl: float,
                      rel_tol: float = 1e-10, max_iter: int = 10_000):
    """Minimal downlink powers meeting SINR >= target for every user, by
    the standard-interference-function fixed point from p = 0. Returns
    (feasible, p); p is the componentwise-minimal solution when the
    iteration converges (feasible means it also fits the budget),
    None when it diverges."""
    if target < 0:
        raise ValueError("SINR target must be nonnegative")
    g = gains.n_subgroups
    if target == 0.0:
        return True, np.zeros(g)
    if np.any(gains.a == 0.0):
        return False, None
    # per-subgroup max over users, via reduceat on subgroup-sorted order
    order = np.argsort(gains.subgroup_of_user, kind="stable")
    starts = np.searchsorted(gains.subgroup_of_user[order], np.arange(g))
    b_over_a = target * gains.b[order] / gains.a[order, None]
    noise = target * gains.sigma2 / gains.a[order]

    def apply(p):
        return np.maximum.reduceat(b_over_a @ p + noise, starts)

    p = np.zeros(g)
    for it in range(max_iter):
        p_new = apply(p)
        # iterates from p = 0 increase monotonically toward the fixed
        # point, so overshooting the budget already proves infeasibility
        if p_new.sum() > p_dl * (1.0 + 1e-9) or np.any(p_new > 10.0 * p_dl):
            return False, None
        if np.max(np.abs(p_new - p)) <= rel_tol * max(p_new.max(), 1e-300):
            return True, p_new
        p = p_new
        if it % 8 == 7:
            # the map is affine on a fixed active set: solve for its fixed
            # point directly and accept it if the full map confirms it
            active = _active_rows(b_over_a @ p + noise, starts)
            try:
                p_cand = np.linalg.solve(np.eye(g) - b_over_a[active],
                                         noise[active])
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(p_cand)) and np.all(p_cand >= 0):
                if np.max(np.abs(apply(p_cand) - p_cand)) \
                        <= rel_tol * max(p_cand.max(), 1e-300) \
                        and np.all(p_cand >= p - rel_tol):
                    return (p_cand.sum() <= p_dl * (1.0 + 1e-9)), p_cand
    return False, None


def _active_rows(values, starts):
    """Index of the maximizing row within each reduceat segment."""
    ends = np.append(starts[1:], values.size)
    return np.array([s + int(np.argmax(values[s:e]))
                     for s, e in zip(starts, ends)])


@dataclass
class InterMmfResult:
    p: np.ndarray
    gamma_star: float
    iterations: int
    degenerate: bool = False
    feasibility_trace: list = field(default_factory=list)


def inter_subgroup_mmf(gains: GainTable, p_dl: float,
                       eps: float = 1e-6) -> InterMmfResult:
    """Max-min downlink power allocation: bisection on the SINR target,
    keeping the minimal feasible power vector of the last feasible target."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = gains.n_subgroups
    if np.any(gains.a == 0.0):
        # hopeless estimate somewhere: nothing to equalize against
        return InterMmfResult(np.full(g, p_dl / g), 0.0, 0, degenerate=True)
    gamma_lo = 0.0
    gamma_hi = float(np.min(p_dl * gains.a / gains.sigma2))
    p_star = np.zeros(g)
    trace = []
    iterations = 0
    while gamma_hi - gamma_lo > eps:
        gamma = 0.5 * (gamma_hi + gamma_lo)
        feasible, p = feasibility_check(gamma, gains, p_dl)
        trace.append((gamma, feasible))
        if feasible:
            gamma_lo = gamma
            p_star = p
        else:
            gamma_hi = gamma
        iterations += 1
    return InterMmfResult(p_star, gamma_lo, iterations,
                          feasibility_trace=trace)
