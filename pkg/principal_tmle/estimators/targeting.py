"""
Fluctuation, plug-in and influence-function evaluation shared by every targeted estimator

Each component k is targeted separately. Subject i always uses the nuisance
fit trained without its own fold; a single fold means no cross-fitting.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import optimize
from scipy.special import expit, logit

from principal_tmle.core.pseudo_outcomes import COMPONENTS, arm_of
from principal_tmle.exceptions import FluctuationError
from principal_tmle.models import FoldPlan

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-10
EPSILON_TOLERANCE = 1e-12


class EifEvaluation(BaseModel):
    """
    Influence-function evaluation D_k(o_i) at a fitted distribution

    D_k = residual + plug_in - center_k, where residual carries the factor
    1{A_i = a_k} / P-hat(A_i | W_i). The center is psi_k, or under
    cross-fitting the estimate psi_k,v of the subject's own fold.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    plug_in: np.ndarray
    residual: np.ndarray
    psi: np.ndarray
    center: Optional[np.ndarray] = None

    @property
    def rows(self) -> np.ndarray:
        center = self.psi[None, :] if self.center is None else self.center
        return self.residual + self.plug_in - center


class TargetingResult(BaseModel):
    """Targeted fits and the quantities derived from them"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    psi: np.ndarray
    epsilons: np.ndarray
    eif: EifEvaluation
    influence_rows: np.ndarray
    targeted_own: np.ndarray
    compatibility_violation_rate: float
    notes: List[str] = []


def clever_covariate(a: np.ndarray, p_observed: np.ndarray) -> np.ndarray:
    """n x 3 matrix of 1{A_i = a_k} / P-hat(A_i | W_i)"""
    return np.column_stack([(a == arm_of(k)) / p_observed for k in COMPONENTS])


def evaluate_eif(f: np.ndarray, clever: np.ndarray, fitted: np.ndarray, psi: np.ndarray,
                 center: Optional[np.ndarray] = None) -> EifEvaluation:
    """Influence-function pieces for pseudo-outcomes f and fitted conditional means"""
    return EifEvaluation(plug_in=fitted, residual=clever * (f - fitted), psi=np.asarray(psi, dtype=float),
                         center=center)


def solve_logistic_fluctuation(offset: np.ndarray, outcome: np.ndarray, weights: np.ndarray,
                               component: Optional[int] = None) -> float:
    """
    Intercept of a weighted logistic regression with fixed offset

    Solves sum_i w_i (f_i - expit(offset_i + eps)) = 0, a strictly decreasing
    score, by Newton with a bracketing fallback.
    """
    active = weights > 0
    w = weights[active]
    off = offset[active]
    f = outcome[active]
    mass = float(np.sum(w))
    if mass <= 0:
        raise FluctuationError("No subject carries fluctuation weight", 0.0, component)
    upper_mass = float(np.sum(w * f))
    if upper_mass <= 0 or upper_mass >= mass:
        raise FluctuationError("Score has no finite root: pseudo-outcome is degenerate in the arm",
                               upper_mass, component)

    def score(eps: float) -> float:
        return float(np.sum(w * (f - expit(off + eps))))

    def slope(eps: float) -> float:
        p = expit(off + eps)
        return -float(np.sum(w * p * (1.0 - p)))

    tolerance = SCORE_TOLERANCE * max(1.0, mass)
    eps = None
    try:
        eps = optimize.newton(score, 0.0, fprime=slope, tol=EPSILON_TOLERANCE, maxiter=100)
    except (RuntimeError, OverflowError, ZeroDivisionError):
        logger.debug("Newton failed for component %s; bracketing", component)
    if eps is None or not np.isfinite(eps) or abs(score(eps)) > tolerance:
        lo, hi = -1.0, 1.0
        while score(lo) < 0 and lo > -1e4:
            lo *= 2.0
        while score(hi) > 0 and hi < 1e4:
            hi *= 2.0
        eps = optimize.brentq(score, lo, hi, xtol=EPSILON_TOLERANCE, rtol=4 * np.finfo(float).eps,
                              maxiter=500)
    final = score(eps)
    if abs(final) > tolerance:
        raise FluctuationError("Fluctuation did not solve its score equation", final, component)
    logger.debug("Component %s: epsilon=%.6g, score=%.3g", component, eps, final)
    return float(eps)


def solve_log_fluctuation(f: np.ndarray, fitted: np.ndarray, weights: np.ndarray,
                          component: Optional[int] = None) -> float:
    """Closed-form root of sum_i w_i (f_i - q_i exp(eps)) = 0"""
    numerator = float(np.sum(weights * f))
    denominator = float(np.sum(weights * fitted))
    if denominator <= 0:
        raise FluctuationError("Closed-form fluctuation has a nonpositive denominator", denominator, component)
    if numerator <= 0:
        raise FluctuationError("Closed-form fluctuation has a nonpositive numerator", numerator, component)
    return float(np.log(numerator / denominator))


def smoothed_score(eps: float, f: np.ndarray, fitted: np.ndarray, weights: np.ndarray) -> float:
    """(1/n) sum_i w_i [f_i - exp(log q_i + eps)]; its square is the log-link targeting criterion"""
    return float(np.mean(weights * (f - fitted * np.exp(eps))))


def fold_plug_ins(targeted: np.ndarray, folds: FoldPlan, obs_weights: np.ndarray, marginal: str) -> np.ndarray:
    """
    Plug-in of each fold's targeted fit

    Args:
        targeted: V x n x 3 targeted predictions (fold v's fit at every subject)
        folds: Fold plan
        obs_weights: Weights defining the empirical marginal of W
        marginal: 'training' or 'validation' empirical of each fold

    Returns:
        V x 3 matrix; with a single fold, the full-sample plug-in
    """
    if folds.V == 1:
        return (obs_weights @ targeted[0] / np.sum(obs_weights))[None, :]
    out = np.empty((folds.V, targeted.shape[2]))
    for v in range(folds.V):
        region = folds.training_mask(v) if marginal == "training" else folds.validation_mask(v)
        m = obs_weights[region]
        out[v] = m @ targeted[v][region] / np.sum(m)
    return out


def fold_plug_in(targeted: np.ndarray, folds: FoldPlan, obs_weights: np.ndarray, marginal: str) -> np.ndarray:
    """3-vector sum_v (n_v / n) * plug-in of fold v, with n_v the weighted validation mass"""
    per_fold = fold_plug_ins(targeted, folds, obs_weights, marginal)
    if folds.V == 1:
        return per_fold[0]
    total = np.sum(obs_weights)
    shares = np.array([np.sum(obs_weights[folds.validation_mask(v)]) / total for v in range(folds.V)])
    return shares @ per_fold


def own_predictions(matrix: np.ndarray, folds: FoldPlan) -> np.ndarray:
    """Pick each subject's row from a V x n (x ...) prediction stack"""
    return matrix[folds.assignment if matrix.shape[0] > 1 else np.zeros(folds.n, dtype=int),
                  np.arange(folds.n)]


def target_components(f: np.ndarray, a: np.ndarray, p_observed: np.ndarray, initial: np.ndarray,
                      folds: FoldPlan, obs_weights: Optional[np.ndarray] = None, link: str = "logit",
                      marginal: str = "training") -> TargetingResult:
    """
    Target the three components and evaluate plug-in and influence rows

    Args:
        f: n x 3 pseudo-outcomes
        a: Treatment arms
        p_observed: P-hat(A_i | W_i) from each subject's own fold
        initial: V x n x 3 initial conditional means q_k (fold v's fit at every subject)
        folds: Fold plan (V=1 for no cross-fitting)
        obs_weights: Phase-two weights Delta / pi-bar (default 1)
        link: 'logit' (binary pseudo-outcomes) or 'log' (kernel pseudo-outcomes)
        marginal: Empirical of W used by each fold's plug-in

    Returns:
        TargetingResult with influence rows multiplied by obs_weights
    """
    n = f.shape[0]
    obs_weights = np.ones(n) if obs_weights is None else np.asarray(obs_weights, dtype=float)
    clever = clever_covariate(a, p_observed)
    initial_own = own_predictions(initial, folds)

    epsilons = np.zeros(3)
    targeted = np.empty_like(initial)
    for j, k in enumerate(COMPONENTS):
        weights = clever[:, j] * obs_weights
        if link == "logit":
            epsilons[j] = solve_logistic_fluctuation(logit(initial_own[:, j]), f[:, j], weights, k)
            targeted[..., j] = expit(logit(initial[..., j]) + epsilons[j])
        elif link == "log":
            epsilons[j] = solve_log_fluctuation(f[:, j], initial_own[:, j], weights, k)
            targeted[..., j] = initial[..., j] * np.exp(epsilons[j])
        else:
            raise ValueError(f"Unknown link: {link}")

    per_fold = fold_plug_ins(targeted, folds, obs_weights, marginal)
    psi = fold_plug_in(targeted, folds, obs_weights, marginal)
    targeted_own = own_predictions(targeted, folds)
    # Cross-fitted rows are centred at their own fold's estimate
    center = per_fold[folds.assignment] if folds.V > 1 else None
    eif = evaluate_eif(f, clever, targeted_own, psi, center)
    rows = obs_weights[:, None] * eif.rows

    violations = targeted_own[:, 1] > targeted_own[:, 0]
    rate = float(np.mean(violations))
    if rate > 0:
        logger.warning("Targeted fits incompatible for %.2f%% of subjects (%d of %d)",
                       100 * rate, int(violations.sum()), n)

    notes = []
    if folds.V > 1:
        notes.append(f"cv_marginal={marginal}")
    return TargetingResult(psi=psi, epsilons=epsilons, eif=eif, influence_rows=rows,
                           targeted_own=targeted_own, compatibility_violation_rate=rate, notes=notes)
