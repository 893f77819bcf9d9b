"""
Influence-function diagnostics and the plug-in estimate of the crossover-assumption discrepancy
"""
import logging
from typing import Any, Dict

import numpy as np

from principal_tmle.exceptions import LearnerError, UnsupportedModeError
from principal_tmle.models import BiomarkerKind, Dataset, PsiEstimate
from principal_tmle.nuisance.regressions import NuisanceFit, law_role

logger = logging.getLogger(__name__)

DEGENERATE_EIGENVALUE = 1e-12


def eif_diagnostics(est: PsiEstimate) -> Dict[str, Any]:
    """
    Mean of the influence rows and the eigenvalue floor of their covariance

    Returns:
        {eif_mean_max_abs, min_eigenvalue_sigma, sigma_eigenvalues, degenerate}
    """
    eigenvalues = np.linalg.eigvalsh(est.sigma)
    scale = max(1.0, float(np.max(np.abs(est.sigma))))
    degenerate = bool(eigenvalues[0] <= DEGENERATE_EIGENVALUE * scale)
    if degenerate:
        logger.warning("Influence-function covariance is near singular (min eigenvalue %.3g)", eigenvalues[0])
    return {
        "eif_mean_max_abs": float(np.max(np.abs(est.influence_rows.mean(axis=0)))),
        "min_eigenvalue_sigma": float(eigenvalues[0]),
        "sigma_eigenvalues": eigenvalues.tolist(),
        "degenerate": degenerate,
    }


def estimate_psi4(d: Dataset, fit: NuisanceFit) -> float:
    """
    Plug-in of the positive-part discrepancy between crossover and treated biomarker laws

    (1/n) sum_i sum_s (P(S^c=s, Y=0 | A=0, W_i) - P(S=s | A=1, W_i))^+ * P(S=s | A=1, W_i)

    Args:
        d: Discrete dataset (W supplies the empirical marginal)
        fit: NuisanceFit from fit_biomarker_laws

    Returns:
        Nonnegative estimate; zero when the crossover law never exceeds the treated law
    """
    if d.biomarker_kind != BiomarkerKind.DISCRETE:
        raise UnsupportedModeError("Psi_4 is defined for discrete biomarkers only")
    if not fit.biomarker_support:
        raise LearnerError("Nuisance fit carries no biomarker laws")
    total = np.zeros(d.n)
    for s in fit.biomarker_support:
        treated_role, crossover_role = law_role("treated", s), law_role("crossover", s)
        if not fit.has(treated_role, crossover_role):
            raise LearnerError("Biomarker law missing for a support value", {"value": s})
        p_treated = fit[treated_role].predict(d.w)
        p_crossover = fit[crossover_role].predict(d.w)
        total += np.clip(p_crossover - p_treated, 0.0, None) * p_treated
    psi4 = float(np.mean(total))
    logger.info("Psi_4 plug-in over %d support values: %.6g", len(fit.biomarker_support), psi4)
    return psi4
