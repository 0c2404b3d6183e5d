"""Monitoring-aware policies under intermittent supervision."""

from ._core import (
    AugmentedPolicy,
    ConfigError,
    FilterContradiction,
    GapLaw,
    LearnerConfig,
    MonitorModel,
    Scenario,
    TabularMdp,
    TabularPolicy,
    TokenChannel,
    avoid_zone,
    baseline,
    calibrate_threshold,
    config_fingerprint,
    evaluate,
    gibbs_policy,
    hazard_from_gap_law,
    perimeter_lap,
    soft_value,
    train,
    uniform_hazard,
    validate_config,
)

__all__ = [
    "AugmentedPolicy",
    "ConfigError",
    "FilterContradiction",
    "GapLaw",
    "LearnerConfig",
    "MonitorModel",
    "Scenario",
    "TabularMdp",
    "TabularPolicy",
    "TokenChannel",
    "avoid_zone",
    "baseline",
    "calibrate_threshold",
    "config_fingerprint",
    "evaluate",
    "gibbs_policy",
    "hazard_from_gap_law",
    "perimeter_lap",
    "soft_value",
    "train",
    "uniform_hazard",
    "validate_config",
]
