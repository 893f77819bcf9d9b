"""
Targeted minimum loss-based estimation for discrete biomarkers, with and without cross-fitting
"""
import logging
from typing import Optional, Sequence

import numpy as np

from principal_tmle.core.pseudo_outcomes import pseudo_outcome_matrix, resolve_s1_star
from principal_tmle.estimators.targeting import TargetingResult, target_components
from principal_tmle.exceptions import UnsupportedModeError
from principal_tmle.models import (
    BiomarkerKind,
    Dataset,
    EstimatorMode,
    FoldPlan,
    NuisanceSettings,
    PsiEstimate,
    TargetSpec,
)
from principal_tmle.nuisance.folds import make_folds
from principal_tmle.nuisance.regressions import (
    NuisanceFit,
    fit_outcome_regressions,
    fit_treatment_mechanism,
)
from principal_tmle.utils.helpers import empirical_covariance

logger = logging.getLogger(__name__)


def initial_predictions(fit: NuisanceFit, d: Dataset) -> np.ndarray:
    """V x n x 3 stack of (q1, q1 * q2, q3) from each fold's fit"""
    q1 = fit["q1"].predict_matrix(d.w)
    q2 = fit["q2"].predict_matrix(d.w)
    q3 = fit["q3"].predict_matrix(d.w)
    return np.stack([q1, q1 * q2, q3], axis=2)


def fit_discrete_nuisance(d: Dataset, spec: TargetSpec, settings: NuisanceSettings,
                          weights: Optional[np.ndarray] = None, folds: Optional[FoldPlan] = None,
                          library: Optional[Sequence[str]] = None) -> NuisanceFit:
    """Treatment mechanism plus q1, q2, q3, fold-specific when folds are given"""
    bounds = settings.bounds
    treatment = fit_treatment_mechanism(
        d, mode=settings.treatment, known=settings.treatment_probability,
        library=settings.treatment_library, folds=folds, weights=weights, bounds=bounds,
        seed=settings.seed, inner_folds=settings.inner_folds,
    )
    return fit_outcome_regressions(
        d, spec, weights=weights, folds=folds, library=library or settings.library, bounds=bounds,
        seed=settings.seed, inner_folds=settings.inner_folds, treatment_mechanism=treatment,
    )


def _require_discrete_single_phase(d: Dataset) -> None:
    if d.biomarker_kind != BiomarkerKind.DISCRETE:
        raise UnsupportedModeError("TMLE requires a discrete biomarker; use the continuous estimator")
    if d.is_two_phase:
        raise UnsupportedModeError("Dataset has phase-two sampling; use ipw_tmle or one_step_estimate")


def targeted_estimate(d: Dataset, spec: TargetSpec, fit: NuisanceFit, mode: EstimatorMode,
                      obs_weights: Optional[np.ndarray] = None, marginal: str = "training") -> PsiEstimate:
    """Target a fitted discrete nuisance and package the estimate"""
    fit.require("q1", "q2", "q3")
    folds = fit.folds if fit.folds is not None else FoldPlan.single(d.n)
    f = pseudo_outcome_matrix(d, spec, resolve_s1_star(d, spec))
    result: TargetingResult = target_components(
        f, d.a, fit.treatment_probability(d), initial_predictions(fit, d), folds,
        obs_weights=obs_weights, link="logit", marginal=marginal,
    )
    warnings = []
    if result.compatibility_violation_rate > 0:
        warnings.append(f"targeted psi_2 fit exceeds psi_1 fit for "
                        f"{result.compatibility_violation_rate:.4f} of subjects")
    estimate = PsiEstimate(
        psi=result.psi,
        influence_rows=result.influence_rows,
        sigma=empirical_covariance(result.influence_rows),
        epsilons=result.epsilons,
        mode=mode,
        compatibility_violation_rate=result.compatibility_violation_rate,
        notes=result.notes,
        warnings=warnings,
    )
    logger.info("%s finished: n=%d, psi=%s", mode.value, d.n, np.array2string(estimate.psi, precision=6))
    return estimate


def tmle_estimate(d: Dataset, spec: TargetSpec, fit: NuisanceFit) -> PsiEstimate:
    """
    TMLE of (psi_1, psi_2, psi_3) from a single-fit nuisance

    Args:
        d: Single-phase discrete dataset
        spec: Target stratum
        fit: NuisanceFit with q1, q2, q3 and a treatment mechanism

    Returns:
        PsiEstimate in mode tmle
    """
    _require_discrete_single_phase(d)
    if fit.folds is not None and fit.folds.V > 1:
        raise UnsupportedModeError("tmle_estimate expects a non-cross-fitted nuisance; use cv_tmle_estimate")
    logger.info("tmle started: n=%d, s1_star=%s", d.n, spec.s1_star)
    return targeted_estimate(d, spec, fit, EstimatorMode.TMLE)


def run_tmle(d: Dataset, spec: TargetSpec, settings: NuisanceSettings = NuisanceSettings()) -> PsiEstimate:
    """Fit the nuisance on the full sample, then target"""
    _require_discrete_single_phase(d)
    return tmle_estimate(d, spec, fit_discrete_nuisance(d, spec, settings))


def cv_tmle_estimate(d: Dataset, spec: TargetSpec, folds: Optional[FoldPlan] = None,
                     library: Optional[Sequence[str]] = None,
                     settings: NuisanceSettings = NuisanceSettings()) -> PsiEstimate:
    """
    Cross-validated TMLE with fold-specific nuisance fits and one pooled fluctuation per component

    Args:
        d: Single-phase discrete dataset
        spec: Target stratum
        folds: Fold plan; default is settings.folds folds stratified by (A, Y)
        library: Learner library overriding settings.library
        settings: Nuisance settings

    Returns:
        PsiEstimate in mode cv_tmle
    """
    _require_discrete_single_phase(d)
    if folds is None:
        folds = make_folds(d.a, d.y, V=settings.folds, seed=settings.seed)
    logger.info("cv_tmle started: n=%d, V=%d, s1_star=%s", d.n, folds.V, spec.s1_star)
    fit = fit_discrete_nuisance(d, spec, settings, folds=folds, library=library)
    return targeted_estimate(d, spec, fit, EstimatorMode.CV_TMLE, marginal=settings.cv_marginal)
