"""
Delta-method summaries of the three stratum parameters

Every contrast is a smooth function of x = (psi_1, psi_2, psi_3). The ratio
contrasts need psi_1 - psi_3 > 0, the quantity identifying P(Y_0=1, S_1=s1*).
"""
import logging
import warnings
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from principal_tmle.estimators.diagnostics import eif_diagnostics
from principal_tmle.exceptions import IdentifiabilityWarning, PrincipalTMLEError, UnsupportedModeError
from principal_tmle.models import (
    ContrastDiagnostics,
    ContrastKind,
    ContrastReport,
    EstimatorMode,
    PsiEstimate,
)

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054


def _log_rr(x: np.ndarray) -> float:
    return float(np.log(x[1]) - np.log(x[0] - x[2]))


def _log_rr_gradient(x: np.ndarray) -> np.ndarray:
    d = x[0] - x[2]
    return np.array([-1.0 / d, 1.0 / x[1], 1.0 / d])


def _risk_difference(x: np.ndarray) -> float:
    return float((x[1] - x[2]) / x[0])


def _risk_difference_gradient(x: np.ndarray) -> np.ndarray:
    return np.array([x[2] - x[1], x[0], -x[0]]) / x[0] ** 2


def _identified_risk_difference(x: np.ndarray) -> float:
    """P(Y_1=1 | S_1=s1*) - P(Y_0=1 | S_1=s1*)"""
    return float((x[1] + x[2] - x[0]) / x[0])


def _identified_risk_difference_gradient(x: np.ndarray) -> np.ndarray:
    return np.array([-(x[1] + x[2]), x[0], x[0]]) / x[0] ** 2


def _risk_treated(x: np.ndarray) -> float:
    return float(x[1] / x[0])


def _risk_treated_gradient(x: np.ndarray) -> np.ndarray:
    return np.array([-x[1] / x[0] ** 2, 1.0 / x[0], 0.0])


def _risk_untreated(x: np.ndarray) -> float:
    return float(1.0 - x[2] / x[0])


def _risk_untreated_gradient(x: np.ndarray) -> np.ndarray:
    return np.array([x[2] / x[0] ** 2, 0.0, -1.0 / x[0]])


_FUNCTIONS: Dict[ContrastKind, Tuple[Callable, Callable]] = {
    ContrastKind.LOG_RELATIVE_RISK: (_log_rr, _log_rr_gradient),
    ContrastKind.RISK_DIFFERENCE: (_risk_difference, _risk_difference_gradient),
    ContrastKind.IDENTIFIED_RISK_DIFFERENCE: (_identified_risk_difference, _identified_risk_difference_gradient),
    ContrastKind.RISK_TREATED: (_risk_treated, _risk_treated_gradient),
    ContrastKind.RISK_UNTREATED: (_risk_untreated, _risk_untreated_gradient),
}


def contrast_value(kind: ContrastKind, x: np.ndarray, component: int = 1) -> float:
    """Gamma(x)"""
    x = np.asarray(x, dtype=float)
    if kind == ContrastKind.RAW_PSI:
        return float(x[component - 1])
    if kind == ContrastKind.VACCINE_EFFICACY:
        return float(1.0 - np.exp(_log_rr(x)))
    return _FUNCTIONS[kind][0](x)


def contrast_gradient(kind: ContrastKind, x: np.ndarray, component: int = 1) -> np.ndarray:
    """Analytic gradient of Gamma at x"""
    x = np.asarray(x, dtype=float)
    if kind == ContrastKind.RAW_PSI:
        gradient = np.zeros(3)
        gradient[component - 1] = 1.0
        return gradient
    if kind == ContrastKind.VACCINE_EFFICACY:
        return -np.exp(_log_rr(x)) * _log_rr_gradient(x)
    return _FUNCTIONS[kind][1](x)


def identifiability_problem(kind: ContrastKind, x: np.ndarray) -> Optional[str]:
    """Reason the contrast is non-numeric at x, or None"""
    if kind == ContrastKind.RAW_PSI:
        return None
    if x[0] - x[2] <= 0:
        return "psi_1 - psi_3 <= 0 indicates a failure of the identifying assumptions"
    if kind in (ContrastKind.LOG_RELATIVE_RISK, ContrastKind.VACCINE_EFFICACY) and x[1] <= 0:
        return "psi_2 <= 0: log relative risk undefined"
    return None


def _report(est: PsiEstimate, kind: ContrastKind, component: int, psi4: Optional[float]) -> ContrastReport:
    x = est.psi
    diag = eif_diagnostics(est)
    diagnostics = ContrastDiagnostics(
        eif_mean_max_abs=diag["eif_mean_max_abs"],
        psi4_hat=psi4,
        min_eigenvalue_sigma=diag["min_eigenvalue_sigma"],
        denominator=float(x[0] - x[2]),
    )
    problem = identifiability_problem(kind, x)
    if problem is not None:
        warnings.warn(problem, IdentifiabilityWarning, stacklevel=3)
        logger.warning("Contrast %s flagged: %s", kind.value, problem)
        return ContrastReport(kind=kind, mode=est.mode, n=est.n, diagnostics=diagnostics,
                              identifiability_failure=True, bandwidth=est.bandwidth_used, message=problem)

    if kind == ContrastKind.VACCINE_EFFICACY:
        log_rr = _report(est, ContrastKind.LOG_RELATIVE_RISK, component, psi4)
        rr = float(np.exp(log_rr.estimate))
        return ContrastReport(
            kind=kind, mode=est.mode, n=est.n,
            estimate=1.0 - rr,
            std_error=rr * log_rr.std_error,
            ci_lower=1.0 - float(np.exp(log_rr.ci_upper)),
            ci_upper=1.0 - float(np.exp(log_rr.ci_lower)),
            gradient=contrast_gradient(kind, x).tolist(),
            diagnostics=diagnostics, bandwidth=est.bandwidth_used,
        )

    value = contrast_value(kind, x, component)
    gradient = contrast_gradient(kind, x, component)
    variance = float(gradient @ est.sigma @ gradient)
    std_error = float(np.sqrt(max(variance, 0.0) / est.n))
    return ContrastReport(
        kind=kind, mode=est.mode, n=est.n,
        estimate=value,
        std_error=std_error,
        ci_lower=value - Z_95 * std_error,
        ci_upper=value + Z_95 * std_error,
        gradient=gradient.tolist(),
        diagnostics=diagnostics,
        bandwidth=est.bandwidth_used,
    )


def contrast(est: PsiEstimate, kind: ContrastKind = ContrastKind.LOG_RELATIVE_RISK,
             component: int = 1, psi4: Optional[float] = None) -> ContrastReport:
    """
    Point estimate, standard error and 95% Wald interval of a contrast

    Args:
        est: Estimate of (psi_1, psi_2, psi_3)
        kind: Contrast
        component: Component reported by raw_psi (1, 2 or 3)
        psi4: Optional Psi_4 plug-in to carry in the diagnostics

    Returns:
        ContrastReport; flagged and non-numeric when identification fails
    """
    if component not in (1, 2, 3):
        raise ValueError(f"Component must be 1, 2 or 3, got {component}")
    return _report(est, ContrastKind(kind), component, psi4)


def smoothed_contrast(est: PsiEstimate, kind: ContrastKind = ContrastKind.LOG_RELATIVE_RISK,
                      component: int = 1) -> ContrastReport:
    """
    Contrast of the kernel-smoothed parameter

    The standard error computed from the covariance of the influence rows and
    the bandwidth-scaled form sqrt(h) * sd / sqrt(n h) are checked to agree.
    """
    if est.mode != EstimatorMode.CONTINUOUS_CV_TMLE:
        raise UnsupportedModeError("smoothed_contrast needs a continuous-biomarker estimate",
                                   {"mode": est.mode.value})
    report = contrast(est, kind, component)
    if report.identifiability_failure:
        return report
    kind = ContrastKind(kind)
    base = ContrastKind.LOG_RELATIVE_RISK if kind == ContrastKind.VACCINE_EFFICACY else kind
    gradient = contrast_gradient(base, est.psi, component)
    h = est.bandwidth_used
    scaled_sd = float(np.std(est.influence_rows @ gradient)) * np.sqrt(h)
    scaled_se = scaled_sd / np.sqrt(est.n * h)
    direct_se = float(np.sqrt(max(gradient @ est.sigma @ gradient, 0.0) / est.n))
    if not np.isclose(scaled_se, direct_se, rtol=1e-8, atol=1e-14):
        raise PrincipalTMLEError("Smoothed standard-error conventions disagree",
                                 {"scaled": scaled_se, "direct": direct_se})
    return report
