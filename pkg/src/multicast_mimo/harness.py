"""Campaign orchestration: configuration, seeded snapshot execution,
strategy matrix, aggregation and persistence."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import estimation
from .channel import (ChannelConfig, GeometryConfig, complex_normal,
                      drop_large_scale, noise_power, psd_sqrt_factor)
from .performance import (ChannelBatch, aggregate_se, draw_batch,
                          estimate_gains, sinr, spectral_efficiency,
                          subgroup_sinr_evaluator)
from .power_control import (PowerBudget, fractional_dl_power,
                            inter_subgroup_mmf, intra_subgroup_mmf,
                            pilot_power_uncorrelated)
from .subgrouping import STRATEGIES, partition_users, similarity_matrix

PILOT_SCHEMES = ("algorithm1", "uncorrelated", "full_power")

# seed-stream tags; every rng is derived from (campaign seed, snapshot
# index, tag[, strategy index]) so worker scheduling cannot reorder draws
_STREAM_GEOMETRY = 0
_STREAM_CHANNEL = 1
_STREAM_STRATEGY = 2


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class StrategySpec:
    """One column of the strategy matrix."""

    subgrouping: str
    n_subgroups: int | None = None
    pilot_scheme: str = "algorithm1"
    precoder: str = "mr"
    nu: float | None = None  # overrides the campaign-wide fractional exponent

    def __post_init__(self):
        if self.subgrouping not in STRATEGIES:
            raise ValueError(f"unknown subgrouping {self.subgrouping!r}")
        if self.pilot_scheme not in PILOT_SCHEMES:
            raise ValueError(f"unknown pilot scheme {self.pilot_scheme!r}")
        if self.precoder not in ("mr", "zf"):
            raise ValueError(f"unknown precoder {self.precoder!r}")
        if self.subgrouping not in ("single_group", "unicast") \
                and self.n_subgroups is None:
            raise ValueError(f"{self.subgrouping} needs n_subgroups")

    def resolve_g(self, n_users: int) -> int:
        if self.subgrouping == "single_group":
            return 1
        if self.subgrouping == "unicast":
            return n_users
        return int(self.n_subgroups)

    @property
    def label(self) -> str:
        parts = [self.subgrouping]
        if self.n_subgroups is not None:
            parts.append(f"G{self.n_subgroups}")
        parts += [self.pilot_scheme, self.precoder]
        if self.nu is not None:
            parts.append(f"nu{self.nu:g}")
        return "_".join(parts)


@dataclass
class CampaignConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    budget: PowerBudget = field(default_factory=lambda: PowerBudget.from_dbm(33.0, 20.0))
    tau: int = 200
    n_snapshots: int = 100
    n_mc: int = 500
    seed: int = 1
    strategies: list[StrategySpec] = field(default_factory=list)
    nu: float = -0.1
    eps: float = 1e-6
    pilot_noise_convention: str = "scaled"

    def __post_init__(self):
        if self.n_snapshots < 1 or self.n_mc < 2:
            raise ValueError("need n_snapshots >= 1 and n_mc >= 2")
        if not self.strategies:
            raise ValueError("at least one strategy required")
        k = self.geometry.n_users
        for s in self.strategies:
            if s.resolve_g(k) >= self.tau:
                raise ValueError(
                    f"strategy {s.label}: tau_p = {s.resolve_g(k)} must be < tau")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["budget"] = {"p_dl_dbm": 10 * np.log10(self.budget.p_dl) + 30,
                       "q_ul_dbm": 10 * np.log10(self.budget.q_ul) + 30}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        d = dict(d)
        geometry = GeometryConfig(**d.pop("geometry", {}))
        chan_d = dict(d.pop("channel", {}))
        if "asd_deg" in chan_d:
            chan_d["asd"] = float(np.radians(chan_d.pop("asd_deg")))
        channel = ChannelConfig(**chan_d)
        bud = d.pop("budget", {"p_dl_dbm": 33.0, "q_ul_dbm": 20.0})
        budget = PowerBudget.from_dbm(bud["p_dl_dbm"], bud["q_ul_dbm"])
        strategies = [StrategySpec(**s) for s in d.pop("strategies", [])]
        return cls(geometry=geometry, channel=channel, budget=budget,
                   strategies=strategies, **d)

    @classmethod
    def from_json_file(cls, path) -> "CampaignConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class StrategyOutcome:
    n_subgroups: int
    pilot_scheme: str
    precoder: str
    sum_se: float = float("nan")
    min_user_se: float = float("nan")
    gamma_star: float = float("nan")
    se_subgroup: list = field(default_factory=list)
    se_user: list = field(default_factory=list)
    alg1_iters: list = field(default_factory=list)
    degenerate: bool = False
    error: str | None = None

    @property
    def alg1_iters_max(self) -> int:
        return max(self.alg1_iters) if self.alg1_iters else 0


@dataclass
class SnapshotResult:
    index: int
    outcomes: dict  # strategy label -> StrategyOutcome
    wall_clock: float


def run_snapshot(config: CampaignConfig, index: int) -> SnapshotResult:
    """Execute one network snapshot (one large-scale realization) for every
    strategy. All strategies share the drop, the shadowing and the
    small-scale channel draws so comparisons are paired."""
    t0 = time.perf_counter()
    geo_rng = _rng(config.seed, index, _STREAM_GEOMETRY)
    users, covariances = drop_large_scale(config.geometry, config.channel,
                                          geo_rng)
    betas = np.array([u.beta for u in users])
    k = len(users)
    m = config.channel.n_antennas
    sigma2 = noise_power(config.channel)

    chan_rng = _rng(config.seed, index, _STREAM_CHANNEL)
    z = complex_normal(chan_rng, (config.n_mc, k, m))
    channels = np.empty_like(z)
    for i, r in enumerate(covariances):
        channels[:, i, :] = z[:, i, :] @ psd_sqrt_factor(r).T
    sim = similarity_matrix(covariances)

    outcomes = {}
    for s_idx, spec in enumerate(config.strategies):
        try:
            outcomes[spec.label] = _run_strategy(
                config, spec, s_idx, index, covariances, betas, sigma2,
                channels, sim)
        except Exception as exc:  # keep other strategies alive
            outcomes[spec.label] = StrategyOutcome(
                n_subgroups=spec.resolve_g(k), pilot_scheme=spec.pilot_scheme,
                precoder=spec.precoder,
                error=f"{type(exc).__name__}: {exc}")
    return SnapshotResult(index, outcomes, time.perf_counter() - t0)


def _run_strategy(config, spec, s_idx, index, covariances, betas, sigma2,
                  channels, sim):
    k = betas.size
    g = spec.resolve_g(k)
    tau_p = g
    convention = config.pilot_noise_convention
    srng = _rng(config.seed, index, _STREAM_STRATEGY, s_idx)
    partition = partition_users(sim, g, spec.subgrouping, srng)
    batch = draw_batch(None, config.n_mc, g, srng, channels=channels)
    sig_eff = estimation.effective_sigma2(sigma2, tau_p, convention)
    q_ul = config.budget.q_ul
    p_dl = config.budget.p_dl

    # a-priori DL split from the estimable gain at full pilot power
    err_covs = [None] * k
    for members in partition.members:
        covs_g = [covariances[i] for i in members]
        q_full = np.full(members.size, q_ul)
        for j, i in enumerate(members):
            err_covs[i] = estimation.error_correlation(
                covariances[i], q_ul, covs_g, q_full, tau_p, sig_eff)
    nu = spec.nu if spec.nu is not None else config.nu
    p0 = fractional_dl_power(covariances, err_covs, partition, nu, p_dl)

    # pilot powers
    if spec.pilot_scheme == "full_power":
        q = np.full(k, q_ul)
    else:
        q = np.empty(k)
        for gi, members in enumerate(partition.members):
            q[members] = pilot_power_uncorrelated(betas[members], p0[gi],
                                                  q_ul, sigma2)
    alg1_iters = []
    if spec.pilot_scheme == "algorithm1":
        q_init = q.copy()
        for gi, members in enumerate(partition.members):
            evaluate = subgroup_sinr_evaluator(
                batch, covariances, partition, q_init, p0, sigma2, gi,
                precoder=spec.precoder, convention=convention)
            res = intra_subgroup_mmf(evaluate, q_init[members], q_ul)
            q[members] = res.q
            alg1_iters.append(res.n_evals)

    gains = estimate_gains(batch, covariances, partition, q, sigma2,
                           precoder=spec.precoder, convention=convention)
    inter = inter_subgroup_mmf(gains, p_dl, eps=config.eps)
    gamma = sinr(inter.p, gains)
    se_user = spectral_efficiency(gamma, tau_p, config.tau)
    report = aggregate_se(se_user, partition, prelog=1.0 - tau_p / config.tau)
    return StrategyOutcome(
        n_subgroups=g, pilot_scheme=spec.pilot_scheme, precoder=spec.precoder,
        sum_se=report.sum_se, min_user_se=float(se_user.min()),
        gamma_star=inter.gamma_star,
        se_subgroup=report.se_subgroup.tolist(),
        se_user=se_user.tolist(),
        alg1_iters=alg1_iters, degenerate=inter.degenerate)


class CdfSummary:
    """Sorted sample summary with percentile and x%-likely accessors."""

    def __init__(self, samples):
        self.samples = np.sort(np.asarray(samples, dtype=float))
        if self.samples.size == 0:
            raise ValueError("no samples")
        self.mean = float(self.samples.mean())

    def percentile(self, q: float) -> float:
        return float(np.percentile(self.samples, q))

    def likely(self, p: float) -> float:
        """Value exceeded with probability p (e.g. 90%-likely = 10th pct)."""
        return self.percentile(100.0 * (1.0 - p))


@dataclass
class CampaignResult:
    config: CampaignConfig
    snapshots: list
    summaries: dict  # label -> CdfSummary
    failed_strategies: list


class CampaignError(RuntimeError):
    """A strategy failed on every snapshot."""


def _snapshot_task(args):
    config, index = args
    return run_snapshot(config, index)


def run_campaign(config: CampaignConfig, workers: int = 1,
                 out_dir=None) -> CampaignResult:
    """Run all snapshots (optionally in parallel workers), aggregate per
    strategy, and optionally persist results.csv / summary.json. Output is
    bit-identical for a fixed (config, seed) regardless of worker count."""
    tasks = [(config, i) for i in range(config.n_snapshots)]
    if workers <= 1:
        snapshots = [run_snapshot(config, i) for i in range(config.n_snapshots)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            snapshots = list(pool.map(_snapshot_task, tasks))
    snapshots.sort(key=lambda r: r.index)

    summaries = {}
    failed = []
    for spec in config.strategies:
        vals = [r.outcomes[spec.label].sum_se for r in snapshots
                if r.outcomes[spec.label].error is None]
        if vals:
            summaries[spec.label] = CdfSummary(vals)
        else:
            failed.append(spec.label)
    if out_dir is not None:
        write_outputs(config, snapshots, summaries, failed, out_dir)
    return CampaignResult(config, snapshots, summaries, failed)


CSV_COLUMNS = ("snapshot", "strategy", "G", "scheme", "precoder", "sum_se",
               "min_user_se", "gamma_star", "alg1_iters_max")


def results_csv_text(config: CampaignConfig, snapshots) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for snap in snapshots:
        for spec in config.strategies:
            out = snap.outcomes[spec.label]
            if out.error is not None:
                row = [snap.index, spec.label, out.n_subgroups,
                       out.pilot_scheme, out.precoder, "", "", "", ""]
            else:
                row = [snap.index, spec.label, out.n_subgroups,
                       out.pilot_scheme, out.precoder, repr(out.sum_se),
                       repr(out.min_user_se), repr(out.gamma_star),
                       out.alg1_iters_max]
            writer.writerow(row)
    return buf.getvalue()


def summary_dict(config: CampaignConfig, snapshots, summaries, failed) -> dict:
    strategies = {}
    for spec in config.strategies:
        errors = sum(1 for r in snapshots
                     if r.outcomes[spec.label].error is not None)
        entry = {"n": config.n_snapshots - errors, "errors": errors}
        if spec.label in summaries:
            s = summaries[spec.label]
            entry.update({"mean": s.mean, "p10": s.percentile(10),
                          "p50": s.percentile(50), "p90": s.percentile(90)})
        strategies[spec.label] = entry
    return {"config": config.to_dict(), "strategies": strategies,
            "failed_strategies": list(failed)}


def write_outputs(config, snapshots, summaries, failed, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(results_csv_text(config, snapshots))
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary_dict(config, snapshots, summaries, failed), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
