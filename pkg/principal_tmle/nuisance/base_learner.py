"""
Base learner class
Defines the interface for all nuisance regression learners
"""
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from principal_tmle.exceptions import LearnerError
from principal_tmle.utils.helpers import as_2d

FAMILIES = ("binomial", "gaussian")


class BaseLearner(RegressorMixin, BaseEstimator, ABC):
    """
    Abstract base class for nuisance learners

    Constructor arguments are stored unchanged so that sklearn.base.clone
    gives an unfitted copy.
    """

    name = "base"

    def __init__(self, family: str = "binomial"):
        """
        Initialize the learner

        Args:
            family: 'binomial' for outcomes in [0, 1], 'gaussian' for real outcomes
        """
        if family not in FAMILIES:
            raise ValueError(f"Unknown family: {family}")
        self.family = family

    @property
    def fitted(self) -> bool:
        return getattr(self, "fitted_", False)

    @abstractmethod
    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        """Fit on rows with positive weight"""
        pass

    @abstractmethod
    def _predict(self, x: np.ndarray) -> np.ndarray:
        """Predict conditional means at x"""
        pass

    def fit(self, x: np.ndarray, y: np.ndarray, sample_weight: Optional[np.ndarray] = None) -> "BaseLearner":
        """
        Fit the learner

        Args:
            x: n x p covariates
            y: Outcome vector
            sample_weight: Nonnegative observation weights (default 1)

        Returns:
            self
        """
        x = as_2d(x)
        y = np.asarray(y, dtype=float)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if x.shape[0] != len(y) or len(w) != len(y):
            raise LearnerError(f"{self.name}: covariates, outcome and weights differ in length")
        keep = w > 0
        if not np.any(keep):
            raise LearnerError(f"{self.name}: no observation with positive weight")
        self._fit(x[keep], y[keep], w[keep])
        self.fitted_ = True
        return self

    def predict(self, x: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise LearnerError(f"{self.name}: predict called before fit")
        predictions = np.asarray(self._predict(as_2d(x)), dtype=float)
        if not np.all(np.isfinite(predictions)):
            raise LearnerError(f"{self.name}: non-finite predictions")
        return predictions

    def describe(self) -> str:
        params = self.get_params(deep=False)
        shown = ", ".join(f"{k}={v}" for k, v in params.items() if k != "family")
        return f"{self.name}({shown})" if shown else self.name
