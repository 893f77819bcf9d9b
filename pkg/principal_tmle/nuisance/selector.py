"""
Cross-validated discrete selector over a learner library
"""
import logging
import warnings
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import clone
from sklearn.metrics import mean_squared_error

from principal_tmle.exceptions import LearnerError, PrincipalTMLEError
from principal_tmle.models import FoldPlan
from principal_tmle.nuisance.base_learner import BaseLearner

logger = logging.getLogger(__name__)

LOSSES = ("weighted_bernoulli", "weighted_squared_error")
_LOG_CLIP = 1e-12


def weighted_loss(y: np.ndarray, prediction: np.ndarray, weights: np.ndarray, loss: str) -> float:
    """
    Weighted mean loss of predictions

    The Bernoulli deviance accepts fractional outcomes in [0, 1].
    """
    if loss == "weighted_squared_error":
        return float(mean_squared_error(y, prediction, sample_weight=weights))
    if loss != "weighted_bernoulli":
        raise ValueError(f"Unknown loss: {loss}")
    p = np.clip(prediction, _LOG_CLIP, 1.0 - _LOG_CLIP)
    values = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(np.average(values, weights=weights))


def default_loss(family: str) -> str:
    return "weighted_bernoulli" if family == "binomial" else "weighted_squared_error"


def cv_risks(learners: Sequence[BaseLearner], x: np.ndarray, y: np.ndarray, weights: np.ndarray,
             folds: FoldPlan, loss: str) -> Dict[int, float]:
    """
    Cross-validated risk of every learner that fits on all folds

    Returns:
        Map from library position to risk; failing learners are absent
    """
    risks: Dict[int, float] = {}
    for position, learner in enumerate(learners):
        total = 0.0
        mass = 0.0
        try:
            for v in range(folds.V):
                train = folds.training_mask(v) & (weights > 0)
                valid = folds.validation_mask(v) & (weights > 0)
                if not np.any(valid):
                    continue
                fitted = clone(learner).fit(x[train], y[train], weights[train])
                prediction = fitted.predict(x[valid])
                fold_mass = float(np.sum(weights[valid]))
                total += weighted_loss(y[valid], prediction, weights[valid], loss) * fold_mass
                mass += fold_mass
        except (PrincipalTMLEError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            message = f"Learner {learner.describe()} failed during cross-validation and was excluded: {exc}"
            warnings.warn(message, UserWarning, stacklevel=2)
            logger.warning(message)
            continue
        risks[position] = total / mass if mass > 0 else float("inf")
        logger.debug("CV risk %s = %.6g", learner.describe(), risks[position])
    return risks


def cv_select(learners: Sequence[BaseLearner], x: np.ndarray, y: np.ndarray,
              weights: Optional[np.ndarray], folds: FoldPlan,
              loss: Optional[str] = None) -> Tuple[BaseLearner, Dict[str, float]]:
    """
    Choose the learner with the smallest cross-validated weighted loss

    Args:
        learners: Library, in priority order (ties go to the earlier learner)
        x: Covariates
        y: Outcome
        weights: Observation weights
        folds: Fold plan over the rows of x
        loss: One of LOSSES; defaults by the first learner's family

    Returns:
        (unfitted selected learner, risk per learner description)
    """
    if not learners:
        raise LearnerError("Learner library is empty")
    if len(learners) == 1:
        return learners[0], {}
    weights = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    loss = loss or default_loss(learners[0].family)

    risks = cv_risks(learners, x, y, weights, folds, loss)
    if not risks:
        raise LearnerError("Every learner in the library failed", {"library": [l.describe() for l in learners]})

    best = min(risks, key=lambda position: (risks[position], position))
    report = {learners[position].describe(): risk for position, risk in risks.items()}
    return learners[best], report
