"""Estimators for the homogeneous site-occupancy model.

Three routes to ``(psi, p)``: joint maximum likelihood, a two-stage
conditional-likelihood procedure that reaches the same estimates through an
orthogonal reparameterisation, and closed-form partial-likelihood estimates.
"""

from .core import (
    DetectionHistory,
    FitResult,
    ModelParams,
    SuffStats,
    compute_suff_stats,
    eta_of,
    theta_of,
)
from .estimate import (
    SensitivityProfile,
    fit,
    fit_full,
    fit_partial,
    fit_two_stage,
    sensitivity_profile,
    var_psi_partial,
)
from .optim import OptimSettings
from .sim import StudyCell, StudySummary, robust_summaries, run_study, simulate_history

__all__ = [
    "DetectionHistory",
    "FitResult",
    "ModelParams",
    "OptimSettings",
    "SensitivityProfile",
    "StudyCell",
    "StudySummary",
    "SuffStats",
    "compute_suff_stats",
    "eta_of",
    "fit",
    "fit_full",
    "fit_partial",
    "fit_two_stage",
    "robust_summaries",
    "run_study",
    "sensitivity_profile",
    "simulate_history",
    "theta_of",
    "var_psi_partial",
]
