"""
Nuisance estimation: learners, IRLS, folds, cross-validated selection and regressions
"""
from .base_learner import BaseLearner
from .folds import make_folds
from .learner_factory import DEFAULT_LIBRARY, LearnerFactory
from .learners import ConstantLearner, GLMLearner, KnownLearner, MeanLearner, NadarayaWatsonLearner
from .logistic import LogisticFit, fit_weighted_logistic
from .regressions import (
    FoldedPredictor,
    NuisanceFit,
    biomarker_support,
    fit_biomarker_laws,
    fit_kernel_regression_qkh,
    fit_outcome_regressions,
    fit_phase2_projection,
    fit_treatment_mechanism,
    phase2_projection,
)
from .selector import cv_select, weighted_loss

__all__ = [
    "BaseLearner",
    "ConstantLearner",
    "GLMLearner",
    "KnownLearner",
    "MeanLearner",
    "NadarayaWatsonLearner",
    "LearnerFactory",
    "DEFAULT_LIBRARY",
    "LogisticFit",
    "fit_weighted_logistic",
    "make_folds",
    "cv_select",
    "weighted_loss",
    "FoldedPredictor",
    "NuisanceFit",
    "biomarker_support",
    "fit_biomarker_laws",
    "fit_kernel_regression_qkh",
    "fit_outcome_regressions",
    "fit_phase2_projection",
    "fit_treatment_mechanism",
    "phase2_projection",
]
