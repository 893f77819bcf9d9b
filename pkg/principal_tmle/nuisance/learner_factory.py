"""
Learner factory
Creates learners from their library names
"""
from typing import Any, Callable, Dict, List, Sequence

from principal_tmle.exceptions import ConfigError

from .base_learner import BaseLearner
from .learners import GLMLearner, MeanLearner, NadarayaWatsonLearner

DEFAULT_LIBRARY = ("glm", "glm_interaction", "mean")


class LearnerFactory:
    """Factory for creating nuisance learners"""

    def __init__(self):
        self.builders: Dict[str, Callable[..., BaseLearner]] = {
            "mean": lambda family, **kw: MeanLearner(family),
            "glm": lambda family, **kw: GLMLearner(family, interactions=False),
            "glm_interaction": lambda family, **kw: GLMLearner(family, interactions=True),
            "nadaraya_watson": lambda family, **kw: NadarayaWatsonLearner(family, **kw),
        }

    def get_supported_learners(self) -> List[str]:
        return list(self.builders.keys())

    def create(self, name: str, family: str = "binomial", **params: Any) -> BaseLearner:
        """
        Create an unfitted learner

        Args:
            name: Library name
            family: Outcome family
            params: Learner hyperparameters

        Returns:
            The learner
        """
        builder = self.builders.get(name)
        if builder is None:
            raise ConfigError(f"Unknown learner: {name}", {"supported": self.get_supported_learners()})
        return builder(family, **params)

    def create_library(self, names: Sequence[str], family: str = "binomial",
                       params: Dict[str, Dict[str, Any]] = None) -> List[BaseLearner]:
        """Learners for each library name, in library order"""
        params = params or {}
        if not names:
            raise ConfigError("Learner library is empty")
        return [self.create(name, family, **params.get(name, {})) for name in names]
