"""
Estimators of the stratum parameters and their contrasts
"""
from .bandwidth import lscv_criterion, select_bandwidth
from .continuous import as_smoothed, cv_tmle_continuous
from .contrasts import contrast, contrast_gradient, contrast_value, smoothed_contrast
from .diagnostics import eif_diagnostics, estimate_psi4
from .targeting import EifEvaluation, target_components
from .tmle import cv_tmle_estimate, fit_discrete_nuisance, run_tmle, tmle_estimate
from .two_phase import (
    augmented_pseudo_outcomes,
    estimate_sampling_probabilities,
    ipw_tmle,
    one_step_estimate,
    stabilize_weights,
)

__all__ = [
    "lscv_criterion",
    "select_bandwidth",
    "as_smoothed",
    "cv_tmle_continuous",
    "contrast",
    "contrast_gradient",
    "contrast_value",
    "smoothed_contrast",
    "eif_diagnostics",
    "estimate_psi4",
    "EifEvaluation",
    "target_components",
    "cv_tmle_estimate",
    "fit_discrete_nuisance",
    "run_tmle",
    "tmle_estimate",
    "augmented_pseudo_outcomes",
    "estimate_sampling_probabilities",
    "ipw_tmle",
    "one_step_estimate",
    "stabilize_weights",
]
