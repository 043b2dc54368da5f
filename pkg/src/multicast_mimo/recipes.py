"""Pre-baked campaign configurations for the simulation study figures.

All recipes use the default desk-scale snapshot count (100); pass
n_snapshots=500 for the full-size campaigns.
"""

from __future__ import annotations

import math

from .channel import ChannelConfig, GeometryConfig
from .harness import CampaignConfig, StrategySpec
from .power_control import PowerBudget


def _config(n_clusters, users_per_cluster, strategies, *, n_antennas=64,
            cluster_radius=5.0, p_dl_dbm=33.0, q_ul_dbm=20.0,
            n_snapshots=100, n_mc=500, seed=1):
    return CampaignConfig(
        geometry=GeometryConfig(n_clusters=n_clusters,
                                users_per_cluster=users_per_cluster,
                                cluster_radius=cluster_radius),
        channel=ChannelConfig(n_antennas=n_antennas),
        budget=PowerBudget.from_dbm(p_dl_dbm, q_ul_dbm),
        n_snapshots=n_snapshots, n_mc=n_mc, seed=seed,
        strategies=strategies)


def _proposed(g, pilot="algorithm1", precoder="mr", nu=None):
    return StrategySpec("proposed", g, pilot, precoder, nu)


def _fig2(**kw):
    # Alg-1 convergence statistics: 5 subgroups per snapshot -> 500
    # subgroup runs at the default 100 snapshots.
    return _config(5, 8, [_proposed(5)], **kw)


def _fig3(**kw):
    nus = [-1.0, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 1.0]
    return _config(5, 8, [_proposed(5, nu=nu) for nu in nus], **kw)


def _fig4(**kw):
    strategies = [StrategySpec(s, 7) for s in
                  ("proposed", "high_orthogonality", "random")]
    return _config(7, 7, strategies, **kw)


def _fig5(**kw):
    strategies = [StrategySpec("single_group"), StrategySpec("unicast")]
    strategies += [_proposed(g) for g in (5, 10, 20, 30)]
    return _config(5, 8, strategies, **kw)


def _fig6(**kw):
    strategies = [_proposed(3, pilot=p) for p in
                  ("algorithm1", "uncorrelated", "full_power")]
    return _config(3, 40, strategies, **kw)


def _fig7(**kw):
    strategies = [StrategySpec(s, 7, precoder=pre)
                  for s in ("proposed", "high_orthogonality", "random")
                  for pre in ("mr", "zf")]
    return _config(7, 7, strategies, **kw)


def _fig8(radius):
    def build(**kw):
        strategies = [StrategySpec("single_group", pilot_scheme=p)
                      for p in ("algorithm1", "uncorrelated", "full_power")]
        strategies += [_proposed(g, pilot=p) for g in (5, 10)
                       for p in ("algorithm1", "uncorrelated", "full_power")]
        return _config(5, 8, strategies, cluster_radius=radius, **kw)
    return build


def _fig9(n_clusters, users_per_cluster):
    def build(**kw):
        k = n_clusters * users_per_cluster
        strategies = [StrategySpec("single_group")]
        strategies += [_proposed(g) for g in (2, 5, 8, 20, 40) if g <= k]
        return _config(n_clusters, users_per_cluster, strategies, **kw)
    return build


def _fig10(m):
    def build(**kw):
        return _config(5, 8, [_proposed(5)], n_antennas=m, **kw)
    return build


_RECIPES = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8_2p5m": _fig8(2.5),
    "fig8_5m": _fig8(5.0),
    "fig8_15m": _fig8(15.0),
    "fig9_1x40": _fig9(1, 40),
    "fig9_2x20": _fig9(2, 20),
    "fig9_5x8": _fig9(5, 8),
    "fig9_8x5": _fig9(8, 5),
    "fig9_20x2": _fig9(20, 2),
    "fig9_40x1": _fig9(40, 1),
    "fig10_m64": _fig10(64),
    "fig10_m128": _fig10(128),
    "fig10_m192": _fig10(192),
}


def recipe_names() -> list[str]:
    return sorted(_RECIPES)


def figure_recipes(name: str, **overrides) -> CampaignConfig:
    """Campaign configuration for a named figure. Keyword overrides
    (n_snapshots, n_mc, seed, ...) are forwarded to the builder."""
    try:
        builder = _RECIPES[name]
    except KeyError:
        raise ValueError(
            f"unknown recipe {name!r}; valid names: {', '.join(recipe_names())}"
        ) from None
    return builder(**overrides)
