"""
Estimation when biomarkers are measured on a phase-two subsample

Covers arm-stabilized inverse sampling weights, the inverse-weighted TMLE and
the one-step estimator whose influence function is projected onto phase-one
information.
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np

from principal_tmle.core.pseudo_outcomes import COMPONENTS, pseudo_outcome_matrix, resolve_s1_star
from principal_tmle.estimators.targeting import clever_covariate, evaluate_eif
from principal_tmle.estimators.tmle import fit_discrete_nuisance, initial_predictions, targeted_estimate
from principal_tmle.exceptions import (
    DataValidationError,
    PositivityError,
    StabilizationError,
    UnsupportedModeError,
)
from principal_tmle.models import (
    BiomarkerKind,
    Dataset,
    EstimatorMode,
    NuisanceSettings,
    PsiEstimate,
    StabilizedWeights,
    TargetSpec,
)
from principal_tmle.nuisance.regressions import NuisanceFit, fit_phase2_projection, phase2_projection
from principal_tmle.utils.helpers import empirical_covariance

logger = logging.getLogger(__name__)


def stabilize_weights(d: Dataset) -> StabilizedWeights:
    """
    Arm-stabilized sampling weights

    c(a) = sum_{A_i=a} Delta_i / pi_i / #{A_i=a}; pi-bar_i = c(A_i) pi_i; so the
    weights Delta_i / pi-bar_i average to one within each arm.

    Args:
        d: Dataset with delta and pi

    Returns:
        StabilizedWeights
    """
    if np.any(~np.isfinite(d.pi) | (d.pi <= 0) | (d.pi > 1)):
        raise StabilizationError("Sampling probabilities must lie in (0, 1]")
    c: Dict[int, float] = {}
    for arm in (0, 1):
        members = d.a == arm
        if not np.any(members & (d.delta == 1)):
            raise StabilizationError(f"No phase-two subject in arm {arm}", {"arm": arm})
        c[arm] = float(np.sum(d.delta[members] / d.pi[members]) / np.sum(members))
    pi_bar = np.where(d.a == 1, c[1], c[0]) * d.pi
    w_eff = d.delta / pi_bar
    logger.debug("Stabilization constants: %s", c)
    return StabilizedWeights(c=c, pi_bar=pi_bar, w_eff=w_eff)


def _require_discrete(d: Dataset) -> None:
    if d.biomarker_kind != BiomarkerKind.DISCRETE:
        raise UnsupportedModeError("Two-phase estimators require a discrete biomarker")


def ipw_tmle(d: Dataset, spec: TargetSpec, library: Optional[Sequence[str]] = None,
             settings: NuisanceSettings = NuisanceSettings()) -> PsiEstimate:
    """
    Inverse-weighted TMLE

    Nuisance fits, the empirical marginal of W and the fluctuation all carry the
    weights Delta / pi-bar; influence rows are stored multiplied by them.

    Args:
        d: Discrete dataset, possibly two-phase
        spec: Target stratum
        library: Learner library overriding settings.library
        settings: Nuisance settings

    Returns:
        PsiEstimate in mode ipw_tmle
    """
    _require_discrete(d)
    weights = stabilize_weights(d)
    logger.info("ipw_tmle started: n=%d, phase-two=%d", d.n, int(d.delta.sum()))
    fit = fit_discrete_nuisance(d, spec, settings, weights=weights.w_eff, library=library)
    return targeted_estimate(d, spec, fit, EstimatorMode.IPW_TMLE, obs_weights=weights.w_eff)


def augmented_pseudo_outcomes(d: Dataset, spec: TargetSpec, projection: NuisanceFit) -> np.ndarray:
    """n x 3 matrix delta / pi * f_k + (1 - delta / pi) * E-hat[f_k | Delta=1, a, w, y]"""
    ipw = (d.delta / d.pi)[:, None]
    f = pseudo_outcome_matrix(d, spec, resolve_s1_star(d, spec))
    projected = np.column_stack([phase2_projection(projection, d, k) for k in COMPONENTS])
    return ipw * f + (1.0 - ipw) * projected


def one_step_estimate(d: Dataset, spec: TargetSpec, library: Optional[Sequence[str]] = None,
                      settings: NuisanceSettings = NuisanceSettings()) -> PsiEstimate:
    """
    One-step estimator: plug-in plus the mean of the phase-one projected influence function

    The residual term replaces f_k by
    delta / pi * f_k + (1 - delta / pi) * E-hat[f_k | Delta=1, a, w, y].
    The result is not a plug-in and may leave [0, 1]; that is reported, not clipped.
    """
    _require_discrete(d)
    if not d.pi_known and d.is_two_phase:
        raise DataValidationError("Sampling probabilities were not provided for a two-phase dataset",
                                  [{"row": None, "field": "pi", "rule": "pi_provided"}])
    if np.any(~np.isfinite(d.pi) | (d.pi <= 0) | (d.pi > 1)):
        raise PositivityError("Sampling probabilities must lie in (0, 1]")
    logger.info("one_step started: n=%d, phase-two=%d", d.n, int(d.delta.sum()))

    ipw = d.delta / d.pi
    fit = fit_discrete_nuisance(d, spec, settings, weights=ipw, library=library)
    projection = fit_phase2_projection(d, spec, library=library or settings.library,
                                       seed=settings.seed, inner_folds=settings.inner_folds)

    augmented = augmented_pseudo_outcomes(d, spec, projection)

    fitted = initial_predictions(fit, d)[0]
    plug_in = fitted.mean(axis=0)
    clever = clever_covariate(d.a, fit.treatment_probability(d))
    eif = evaluate_eif(augmented, clever, fitted, plug_in)
    rows = eif.rows
    psi = plug_in + rows.mean(axis=0)

    warnings = []
    outside = (psi < 0) | (psi > 1)
    if np.any(outside):
        message = f"one-step estimate outside [0, 1] for components {(np.flatnonzero(outside) + 1).tolist()}"
        warnings.append(message)
        logger.warning(message)

    estimate = PsiEstimate(
        psi=psi,
        influence_rows=rows,
        sigma=empirical_covariance(rows),
        epsilons=np.zeros(3),
        mode=EstimatorMode.ONE_STEP,
        notes=[f"plug_in={plug_in.tolist()}"],
        warnings=warnings,
    )
    logger.info("one_step finished: n=%d, psi=%s", d.n, np.array2string(psi, precision=6))
    return estimate


def estimate_sampling_probabilities(d: Dataset, coarsening: np.ndarray) -> Dataset:
    """
    Replace pi by the empirical phase-two rate within (V, A, Y) cells

    Args:
        d: Two-phase dataset
        coarsening: Discrete phase-one variable V per subject

    Returns:
        Dataset with estimated pi (pi_known set)
    """
    coarsening = np.asarray(coarsening)
    if coarsening.shape != (d.n,):
        raise ValueError("Coarsening must have one value per subject")
    pi_hat = np.empty(d.n)
    for value in np.unique(coarsening):
        for arm in (0, 1):
            for outcome in (0, 1):
                cell = (coarsening == value) & (d.a == arm) & (d.y == outcome)
                if not np.any(cell):
                    continue
                rate = float(d.delta[cell].mean())
                if rate <= 0:
                    raise PositivityError("No phase-two subject in a sampling cell",
                                          {"v": value.item() if hasattr(value, "item") else value,
                                           "a": arm, "y": outcome})
                pi_hat[cell] = rate
    return d.replace(pi=pi_hat, pi_known=True)
