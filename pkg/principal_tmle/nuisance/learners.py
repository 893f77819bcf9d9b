"""
Built-in nuisance learners
"""
import logging
from itertools import combinations_with_replacement
from typing import Callable, Optional, Union

import numpy as np
from sklearn.linear_model import LinearRegression

from principal_tmle.exceptions import LearnerError
from principal_tmle.nuisance.base_learner import BaseLearner
from principal_tmle.nuisance.logistic import fit_weighted_logistic

logger = logging.getLogger(__name__)


class MeanLearner(BaseLearner):
    """Weighted sample mean (intercept-only)"""

    name = "mean"

    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        self.value_ = float(np.sum(sample_weight * y) / np.sum(sample_weight))

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.value_)


class GLMLearner(BaseLearner):
    """
    Main-terms logistic (binomial) or linear (gaussian) regression

    With interactions=True the design also carries every pairwise product,
    squares included. The binomial fit uses the package's IRLS solver; the
    gaussian fit is sklearn's weighted least squares.
    """

    def __init__(self, family: str = "binomial", interactions: bool = False):
        super().__init__(family)
        self.interactions = interactions

    @property
    def name(self) -> str:
        return "glm_interaction" if self.interactions else "glm"

    def describe(self) -> str:
        return self.name

    def _design(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.center_) / self.scale_
        columns = [np.ones(x.shape[0]), *z.T]
        if self.interactions:
            columns += [z[:, i] * z[:, j] for i, j in combinations_with_replacement(range(z.shape[1]), 2)]
        return np.column_stack(columns)

    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        self.center_ = x.mean(axis=0)
        scale = x.std(axis=0)
        # Constant columns stay in the design as zeros and are dropped below
        self.scale_ = np.where(scale > 0, scale, 1.0)
        design = self._design(x)
        self.keep_ = np.flatnonzero(np.any(design != 0, axis=0))
        design = design[:, self.keep_]
        if self.family == "binomial":
            self.fit_result_ = fit_weighted_logistic(design, y, sample_weight)
        else:
            self.fit_result_ = LinearRegression(fit_intercept=False).fit(design, y, sample_weight=sample_weight)

    def _predict(self, x: np.ndarray) -> np.ndarray:
        design = self._design(x)[:, self.keep_]
        return self.fit_result_.predict(design)


class NadarayaWatsonLearner(BaseLearner):
    """Kernel-weighted local average with a Gaussian product kernel on standardized covariates"""

    name = "nadaraya_watson"

    def __init__(self, family: str = "binomial", bandwidth: Optional[float] = None, chunk_size: int = 2048):
        super().__init__(family)
        self.bandwidth = bandwidth
        self.chunk_size = chunk_size

    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        self.center_ = x.mean(axis=0)
        scale = x.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        self.x_train_ = (x - self.center_) / self.scale_
        self.y_train_ = y
        self.w_train_ = sample_weight
        n, p = x.shape
        # Scott's rule on standardized covariates
        self.h_ = self.bandwidth if self.bandwidth is not None else n ** (-1.0 / (p + 4))
        self.fallback_ = float(np.sum(sample_weight * y) / np.sum(sample_weight))

    def _predict(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.center_) / self.scale_
        out = np.empty(z.shape[0])
        for start in range(0, z.shape[0], self.chunk_size):
            block = z[start:start + self.chunk_size]
            sq = ((block[:, None, :] - self.x_train_[None, :, :]) ** 2).sum(axis=2)
            k = np.exp(-0.5 * sq / self.h_ ** 2) * self.w_train_[None, :]
            mass = k.sum(axis=1)
            numerator = k @ self.y_train_
            out[start:start + self.chunk_size] = np.where(mass > 1e-300, numerator / np.maximum(mass, 1e-300),
                                                          self.fallback_)
        return out


class KnownLearner(BaseLearner):
    """Fixed conditional mean supplied by the design (constant or function of w)"""

    name = "known"

    def __init__(self, family: str = "binomial", value: Union[float, Callable[[np.ndarray], np.ndarray]] = 0.5):
        super().__init__(family)
        self.value = value

    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        pass

    def fit(self, x: np.ndarray, y: np.ndarray, sample_weight: Optional[np.ndarray] = None) -> "KnownLearner":
        self.fitted_ = True
        return self

    def _predict(self, x: np.ndarray) -> np.ndarray:
        if callable(self.value):
            values = np.asarray(self.value(x), dtype=float).reshape(-1)
            if values.shape[0] != x.shape[0]:
                raise LearnerError("Known function returned the wrong number of values")
            return values
        return np.full(x.shape[0], float(self.value))

    def describe(self) -> str:
        return "known(function)" if callable(self.value) else f"known({self.value})"


class ConstantLearner(BaseLearner):
    """Prediction fixed at one value; used when a fitting stratum has a constant outcome"""

    name = "constant"

    def __init__(self, family: str = "binomial", value: float = 0.0):
        super().__init__(family)
        self.value = value

    @property
    def fitted(self) -> bool:
        return True

    def _fit(self, x: np.ndarray, y: np.ndarray, sample_weight: np.ndarray) -> None:
        pass

    def _predict(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], float(self.value))
