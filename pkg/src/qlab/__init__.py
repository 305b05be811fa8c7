"""Numerical laboratory for master-sequence persistence times and
finite-population error thresholds in the sharp-peak Moran model."""

from .model import ModelParams
from .chain import (
    BirthDeathSpec,
    transition_probabilities,
    log_expected_persistence_time,
    persistence_time_oracle,
)
from .asymptotics import (
    PhaseLabel,
    RegimeSpec,
    classify_regime,
    critical_offset,
    discovery_log_estimate,
    equilibrium_fraction,
    error_threshold,
    master_fraction,
    persistence_log_estimate,
    persistence_rate,
    persistence_rate_inverse,
    threshold_survival_target,
)
from .audit import AuditReport, audit_report, stirling_defect
from .simulate import HittingSamples, simulate_full, simulate_lumped, summarize

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "BirthDeathSpec",
    "HittingSamples",
    "ModelParams",
    "PhaseLabel",
    "RegimeSpec",
    "audit_report",
    "classify_regime",
    "critical_offset",
    "discovery_log_estimate",
    "equilibrium_fraction",
    "error_threshold",
    "log_expected_persistence_time",
    "master_fraction",
    "persistence_log_estimate",
    "persistence_rate",
    "persistence_rate_inverse",
    "persistence_time_oracle",
    "simulate_full",
    "simulate_lumped",
    "stirling_defect",
    "summarize",
    "threshold_survival_target",
    "transition_probabilities",
]
