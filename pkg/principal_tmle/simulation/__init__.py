"""
Simulated trials, ground truth and numerical verification
"""
from .bias_probe import bias_decay_probe
from .coverage import coverage_by_bandwidth, coverage_experiment, run_replications
from .dgp import discretize_biomarker, simulate_trial
from .identification import (
    construct_compatible_counterfactual,
    identification_plugins,
    pathwise_derivative_check,
    random_score,
    remainder,
)
from .subsample import two_phase_subsample
from .toy import DiscreteToyDistribution, empirical_toy, psi4_of_toy, psi_of_toy, random_toy
from .truth import smoothed_psi_by_covariate, true_psi, true_psi_discretized

__all__ = [
    "bias_decay_probe",
    "coverage_by_bandwidth",
    "coverage_experiment",
    "run_replications",
    "discretize_biomarker",
    "simulate_trial",
    "construct_compatible_counterfactual",
    "identification_plugins",
    "pathwise_derivative_check",
    "random_score",
    "remainder",
    "two_phase_subsample",
    "DiscreteToyDistribution",
    "empirical_toy",
    "psi4_of_toy",
    "psi_of_toy",
    "random_toy",
    "smoothed_psi_by_covariate",
    "true_psi",
    "true_psi_discretized",
]
