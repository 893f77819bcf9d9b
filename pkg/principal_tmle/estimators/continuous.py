"""
Cross-validated TMLE of the kernel-smoothed stratum parameters for continuous biomarkers
"""
import logging
from typing import Optional, Sequence

import numpy as np

from principal_tmle.core.pseudo_outcomes import COMPONENTS, pseudo_outcome_matrix
from principal_tmle.estimators.bandwidth import select_bandwidth
from principal_tmle.estimators.targeting import target_components
from principal_tmle.exceptions import UnsupportedModeError
from principal_tmle.models import (
    BiomarkerKind,
    Dataset,
    EstimatorMode,
    FoldPlan,
    NuisanceSettings,
    PsiEstimate,
    SmoothedPsi,
    TargetSpec,
)
from principal_tmle.nuisance.folds import make_folds
from principal_tmle.nuisance.regressions import fit_kernel_regression_qkh, fit_treatment_mechanism
from principal_tmle.utils.helpers import empirical_covariance

logger = logging.getLogger(__name__)


def resolve_target(d: Dataset, spec: TargetSpec) -> TargetSpec:
    """Target with its bandwidth selector replaced by the selected value"""
    spec.require_smoothing()
    if isinstance(spec.bandwidth, float):
        return spec
    return spec.with_bandwidth(select_bandwidth(d, spec.bandwidth, spec.kernel))


def cv_tmle_continuous(d: Dataset, spec: TargetSpec, folds: Optional[FoldPlan] = None,
                       library: Optional[Sequence[str]] = None,
                       settings: NuisanceSettings = NuisanceSettings()) -> PsiEstimate:
    """
    CV-TMLE of (psi_1h, psi_2h, psi_3h) with a log-linear fluctuation

    exp(eps_k) = sum_i H_ik f_kh(O_i) / sum_i H_ik q-hat_kh^{v(i)}(W_i) solves the
    targeting score exactly; q* = q-hat * exp(eps_k) for every fold.

    Args:
        d: Continuous-biomarker dataset
        spec: Target with kernel and bandwidth (or 'lscv_density')
        folds: Fold plan; default is settings.folds folds stratified by (A, Y)
        library: Learner library overriding settings.library
        settings: Nuisance settings

    Returns:
        PsiEstimate in mode continuous_cv_tmle with bandwidth_used set
    """
    if d.biomarker_kind != BiomarkerKind.CONTINUOUS:
        raise UnsupportedModeError("cv_tmle_continuous requires a continuous biomarker")
    if d.is_two_phase:
        raise UnsupportedModeError("Two-phase sampling is supported for discrete biomarkers only")
    spec = resolve_target(d, spec)
    if folds is None:
        folds = make_folds(d.a, d.y, V=settings.folds, seed=settings.seed)
    logger.info("continuous_cv_tmle started: n=%d, V=%d, s1_star=%s, h=%.5g",
                d.n, folds.V, spec.s1_star, spec.bandwidth)

    bounds = settings.bounds
    treatment = fit_treatment_mechanism(
        d, mode=settings.treatment, known=settings.treatment_probability,
        library=settings.treatment_library, folds=folds, bounds=bounds,
        seed=settings.seed, inner_folds=settings.inner_folds,
    )
    library = library or settings.library
    initial = np.stack([
        fit_kernel_regression_qkh(d, spec, k, folds, library=library, bounds=bounds,
                                  seed=settings.seed, inner_folds=settings.inner_folds).predict_matrix(d.w)
        for k in COMPONENTS
    ], axis=2)

    g1 = treatment.predict_own(d.w, folds)
    p_observed = np.where(d.a == 1, g1, 1.0 - g1)
    f = pseudo_outcome_matrix(d, spec)
    result = target_components(f, d.a, p_observed, initial, folds, link="log",
                               marginal=settings.cv_marginal)

    estimate = PsiEstimate(
        psi=result.psi,
        influence_rows=result.influence_rows,
        sigma=empirical_covariance(result.influence_rows),
        epsilons=result.epsilons,
        mode=EstimatorMode.CONTINUOUS_CV_TMLE,
        bandwidth_used=spec.bandwidth,
        compatibility_violation_rate=result.compatibility_violation_rate,
        notes=result.notes + [f"kernel={spec.kernel.family.value}"],
    )
    logger.info("continuous_cv_tmle finished: psi_h=%s", np.array2string(estimate.psi, precision=6))
    return estimate


def as_smoothed(est: PsiEstimate) -> SmoothedPsi:
    """View a continuous-mode estimate as the smoothed parameter"""
    if est.mode != EstimatorMode.CONTINUOUS_CV_TMLE:
        raise UnsupportedModeError("Estimate is not a smoothed-parameter estimate")
    return SmoothedPsi(psi_h=est.psi, h=est.bandwidth_used, epsilons=est.epsilons,
                       influence_rows=est.influence_rows)
