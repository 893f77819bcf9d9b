"""
Weighted logistic regression with a fixed offset, fit by iteratively reweighted least squares
"""
import logging
import warnings
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from principal_tmle.exceptions import LearnerError, SeparationWarning
from principal_tmle.utils.helpers import as_2d

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-10
MAX_ITERATIONS = 100
SEPARATION_BOUND = 30.0


class LogisticFit(BaseModel):
    """Result of fit_weighted_logistic"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coef: np.ndarray = Field(..., description="Coefficients on the logit scale")
    iterations: int
    converged: bool
    separated: bool = Field(default=False, description="Coefficients diverged and predictions are clipped")
    max_score: float = Field(..., description="Max absolute weighted score at the returned coefficients")

    def linear_predictor(self, features: np.ndarray, offset: Optional[np.ndarray] = None) -> np.ndarray:
        eta = as_2d(features) @ self.coef
        if offset is not None:
            eta = eta + offset
        return np.clip(eta, -SEPARATION_BOUND, SEPARATION_BOUND)

    def predict(self, features: np.ndarray, offset: Optional[np.ndarray] = None) -> np.ndarray:
        return expit(self.linear_predictor(features, offset))


def _log_likelihood(eta: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    # log p = -log(1 + e^-eta), log(1 - p) = -log(1 + e^eta)
    return float(np.sum(w * (y * -np.logaddexp(0.0, -eta) + (1.0 - y) * -np.logaddexp(0.0, eta))))


def fit_weighted_logistic(features: np.ndarray, outcome: np.ndarray,
                          weights: Optional[np.ndarray] = None,
                          offset: Optional[np.ndarray] = None,
                          max_iter: int = MAX_ITERATIONS,
                          tol: float = SCORE_TOLERANCE) -> LogisticFit:
    """
    Maximize the weighted Bernoulli log-likelihood with a fixed offset

    Args:
        features: n x p design matrix (include a column of ones for an intercept)
        outcome: Outcome in [0, 1]; fractional values give the quasi-likelihood fit
        weights: Nonnegative observation weights (default 1)
        offset: Fixed addition to the linear predictor (default 0)
        max_iter: Newton iteration cap
        tol: Convergence threshold on the max absolute score component

    Returns:
        LogisticFit; separated fits are flagged and their predictions clipped
    """
    x = as_2d(features)
    y = np.asarray(outcome, dtype=float)
    n, p = x.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)

    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise LearnerError("Weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise LearnerError("All weights are zero")
    active = w > 0
    empty = ~np.any(x[active] != 0, axis=0)
    if np.any(empty):
        raise LearnerError("Design matrix is rank deficient",
                           {"zero_columns": np.flatnonzero(empty).tolist()})

    coef = np.zeros(p)
    eta = off.copy()
    loglik = _log_likelihood(eta, y, w)
    separated = False
    converged = False
    iterations = 0
    score = x.T @ (w * (y - expit(eta)))

    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        mu = expit(eta)
        info = x.T @ (x * (w * mu * (1.0 - mu))[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]

        # Step halving keeps the likelihood nondecreasing
        for _ in range(30):
            candidate = coef + step
            candidate_eta = x @ candidate + off
            candidate_loglik = _log_likelihood(candidate_eta, y, w)
            if candidate_loglik >= loglik - 1e-12 * max(1.0, abs(loglik)):
                break
            step = step / 2.0
        coef, eta, loglik = candidate, candidate_eta, candidate_loglik
        score = x.T @ (w * (y - expit(eta)))

        if np.max(np.abs(coef)) > SEPARATION_BOUND:
            separated = True
            break
        if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(coef))):
            converged = np.max(np.abs(score)) < np.sqrt(tol)
            break
    else:
        converged = np.max(np.abs(score)) < tol

    max_score = float(np.max(np.abs(score)))
    if separated:
        warnings.warn("Logistic fit separated; predictions clipped", SeparationWarning, stacklevel=2)
        logger.warning("Logistic fit separated after %d iterations (max |coef| > %g)",
                       iterations, SEPARATION_BOUND)
    elif not converged:
        logger.debug("IRLS stopped after %d iterations with max score %.3g", iterations, max_score)

    return LogisticFit(coef=coef, iterations=iterations, converged=bool(converged),
                       separated=separated, max_score=max_score)
