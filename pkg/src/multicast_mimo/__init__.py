"""Link-level simulator for multicast massive MIMO downlink over spatially
correlated Rayleigh fading, with covariance-based user subgrouping and
max-min-fairness uplink/downlink power control."""

from .channel import (ChannelConfig, GeometryConfig, UserLargeScale,
                      dbm_to_watt, drop_large_scale, drop_users,
                      export_covariance, large_scale_fading, load_covariance,
                      local_scattering_covariance, noise_power,
                      sample_channels, sample_shadowing, steering_vector,
                      watt_to_dbm)
from .estimation import (composite_estimate, error_correlation,
                         mmse_estimate, received_pilot)
from .harness import (CampaignConfig, CdfSummary, SnapshotResult,
                      StrategySpec, run_campaign, run_snapshot)
from .performance import (ChannelBatch, GainTable, SpectralEfficiencyReport,
                          aggregate_se, draw_batch, estimate_gains, sinr,
                          spectral_efficiency)
from .power_control import (PowerBudget, feasibility_check,
                            fractional_dl_power, inter_subgroup_mmf,
                            intra_subgroup_mmf, pilot_power_uncorrelated)
from .precoding import mr_precoder, zf_precoders
from .recipes import figure_recipes, recipe_names
from .subgrouping import (Partition, partition_users, similarity_matrix,
                          variance_identity_check)

__all__ = [name for name in dir() if not name.startswith("_")]
