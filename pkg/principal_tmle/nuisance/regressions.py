"""
Fitting of every nuisance component: treatment mechanism, stratum regressions,
kernel regressions, biomarker laws and phase-two projections
"""
import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import clone

from principal_tmle.core.pseudo_outcomes import arm_of, pseudo_outcomes, resolve_s1_star
from principal_tmle.exceptions import (
    LearnerError,
    PositivityError,
    StratumEmptyError,
    UnsupportedModeError,
)
from principal_tmle.models import BiomarkerKind, Dataset, FoldPlan, TargetSpec, TruncationBounds
from principal_tmle.nuisance.base_learner import BaseLearner
from principal_tmle.nuisance.folds import make_folds
from principal_tmle.nuisance.learner_factory import DEFAULT_LIBRARY, LearnerFactory
from principal_tmle.nuisance.learners import ConstantLearner, KnownLearner
from principal_tmle.nuisance.selector import cv_select

logger = logging.getLogger(__name__)

KnownTreatment = Union[float, Callable[[np.ndarray], np.ndarray]]
TREATMENT_MODES = ("known", "logistic", "ensemble")
_factory = LearnerFactory()


class FoldedPredictor:
    """
    Fitted learners for one nuisance role, one per training fold

    Predictions are clipped to the probability bounds, or floored at the
    density floor, when those are set.
    """

    def __init__(self, role: str, learners: List[BaseLearner],
                 bounds: Optional[Tuple[float, float]] = None, floor: Optional[float] = None):
        self.role = role
        self.learners = learners
        self.bounds = bounds
        self.floor = floor

    @property
    def n_folds(self) -> int:
        return len(self.learners)

    @property
    def selected(self) -> List[str]:
        return [learner.describe() for learner in self.learners]

    def _clip(self, values: np.ndarray) -> np.ndarray:
        if self.bounds is not None:
            values = np.clip(values, *self.bounds)
        if self.floor is not None:
            values = np.maximum(values, self.floor)
        return values

    def predict(self, w: np.ndarray, fold: int = 0) -> np.ndarray:
        """Predictions of the fit trained without fold `fold`"""
        return self._clip(self.learners[fold].predict(w))

    def predict_matrix(self, w: np.ndarray) -> np.ndarray:
        """V x n predictions, row v from the fold-v fit"""
        return np.vstack([self.predict(w, v) for v in range(self.n_folds)])

    def predict_own(self, w: np.ndarray, folds: Optional[FoldPlan]) -> np.ndarray:
        """Each subject's prediction from the fit that excludes its own fold"""
        if self.n_folds == 1:
            return self.predict(w)
        out = np.empty(w.shape[0])
        for v in range(self.n_folds):
            mask = folds.validation_mask(v)
            if np.any(mask):
                out[mask] = self.predict(w[mask], v)
        return out


class NuisanceFit:
    """Fitted nuisance components, possibly fold-specific"""

    def __init__(self, regressions: Dict[str, FoldedPredictor],
                 treatment_mechanism: Optional[FoldedPredictor] = None,
                 folds: Optional[FoldPlan] = None,
                 bounds: TruncationBounds = TruncationBounds(),
                 biomarker_support: Optional[Tuple[float, ...]] = None):
        self.regressions = dict(regressions)
        self.treatment_mechanism = treatment_mechanism
        self.folds = folds
        self.bounds = bounds
        self.biomarker_support = biomarker_support

    def __getitem__(self, role: str) -> FoldedPredictor:
        return self.regressions[role]

    def has(self, *roles: str) -> bool:
        return all(role in self.regressions for role in roles)

    def require(self, *roles: str) -> None:
        missing = [role for role in roles if role not in self.regressions]
        if missing:
            raise LearnerError("Nuisance fit lacks required regressions", {"missing": missing})
        if self.treatment_mechanism is None:
            raise LearnerError("Nuisance fit lacks a treatment mechanism")

    def with_treatment(self, treatment_mechanism: FoldedPredictor) -> "NuisanceFit":
        return NuisanceFit(self.regressions, treatment_mechanism, self.folds, self.bounds, self.biomarker_support)

    def merged(self, other: "NuisanceFit") -> "NuisanceFit":
        regressions = {**self.regressions, **other.regressions}
        support = self.biomarker_support or other.biomarker_support
        return NuisanceFit(regressions, self.treatment_mechanism or other.treatment_mechanism,
                           self.folds or other.folds, self.bounds, support)

    def treatment_probability(self, d: Dataset) -> np.ndarray:
        """P-hat(A_i | W_i) for every subject, from its own fold's fit"""
        g1 = self.treatment_mechanism.predict_own(d.w, self.folds)
        return np.where(d.a == 1, g1, 1.0 - g1)

    def summary(self) -> Dict[str, List[str]]:
        out = {role: predictor.selected for role, predictor in self.regressions.items()}
        if self.treatment_mechanism is not None:
            out["treatment_mechanism"] = self.treatment_mechanism.selected
        return out


def _fold_plan(folds: Optional[FoldPlan], n: int) -> FoldPlan:
    return folds if folds is not None else FoldPlan.single(n)


def _select_and_fit(library: Sequence[str], family: str, x: np.ndarray, y: np.ndarray,
                    weights: np.ndarray, seed: int, stream: Tuple[int, ...], inner_folds: int,
                    learner_params: Optional[Dict[str, Dict]] = None) -> BaseLearner:
    if np.all(y == y[0]):
        return ConstantLearner(family, float(y[0]))
    learners = _factory.create_library(library, family, learner_params)
    if len(learners) > 1 and len(y) >= 2:
        strata = (y > 0).astype(int)
        plan = make_folds(np.zeros(len(y), dtype=int), strata, V=min(inner_folds, len(y)),
                          seed=seed, stream=stream)
        learner, risks = cv_select(learners, x, y, weights, plan)
        logger.debug("Selected %s from risks %s", learner.describe(), risks)
    else:
        learner = learners[0]
    return clone(learner).fit(x, y, weights)


def _fit_role(role: str, stratum: str, d: Dataset, rows: np.ndarray, outcome: np.ndarray,
              weights: np.ndarray, folds: Optional[FoldPlan], library: Sequence[str], family: str,
              seed: int, role_id: int, inner_folds: int,
              bounds: Optional[Tuple[float, float]] = None, floor: Optional[float] = None,
              learner_params: Optional[Dict[str, Dict]] = None) -> FoldedPredictor:
    plan = _fold_plan(folds, d.n)
    fitting = rows & (weights > 0)
    if not np.any(fitting):
        raise StratumEmptyError(stratum)
    learners = []
    for v in range(plan.V):
        train = fitting & plan.training_mask(v)
        if not np.any(train):
            raise StratumEmptyError(stratum, f"No subjects in fitting stratum '{stratum}' for training fold {v}")
        learners.append(_select_and_fit(library, family, d.w[train], outcome[train], weights[train],
                                        seed, (role_id, v), inner_folds, learner_params))
    logger.debug("Fitted %s on %d subjects across %d folds", role, int(fitting.sum()), plan.V)
    return FoldedPredictor(role, learners, bounds=bounds, floor=floor)


def _weights(d: Dataset, weights: Optional[np.ndarray]) -> np.ndarray:
    if weights is None:
        return np.ones(d.n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (d.n,) or np.any(weights < 0):
        raise ValueError("Weights must be a nonnegative vector with one entry per subject")
    return weights


def fit_treatment_mechanism(d: Dataset, mode: str = "logistic", known: Optional[KnownTreatment] = None,
                            library: Sequence[str] = ("mean", "glm"), folds: Optional[FoldPlan] = None,
                            weights: Optional[np.ndarray] = None,
                            bounds: TruncationBounds = TruncationBounds(),
                            seed: int = 0, inner_folds: int = 5) -> FoldedPredictor:
    """
    Estimate w -> P(A=1 | w), truncated to the treatment bounds

    Args:
        d: Dataset
        mode: 'known' (value or function), 'logistic' or 'ensemble' (cv_select over library)
        known: Design probability for mode 'known'
        library: Candidate learners for mode 'ensemble'
        folds: Fit once per training fold when given (known probabilities are shared)
        weights: Observation weights
        bounds: Truncation bounds
        seed: Seed for inner selection folds
        inner_folds: Folds used by the selector

    Returns:
        FoldedPredictor for the treatment mechanism
    """
    if mode not in TREATMENT_MODES:
        raise UnsupportedModeError(f"Unknown treatment mechanism mode: {mode}", {"supported": TREATMENT_MODES})
    weights = _weights(d, weights)
    share = float(np.sum(weights * d.a) / np.sum(weights))
    if share <= 0.0 or share >= 1.0:
        raise PositivityError("Empirical treatment share is 0 or 1", {"share": share})

    lower, upper = bounds.treatment
    if mode == "known":
        if known is None:
            raise UnsupportedModeError("Mode 'known' needs the design probability")
        if not callable(known) and not lower <= float(known) <= upper:
            raise PositivityError("Known treatment probability violates the positivity bounds",
                                  {"value": float(known), "bounds": [lower, upper]})
        learner = KnownLearner("binomial", known).fit(d.w, d.a)
        if callable(known):
            values = learner.predict(d.w)
            if np.any(values < lower) or np.any(values > upper):
                raise PositivityError("Known treatment probabilities violate the positivity bounds",
                                      {"min": float(values.min()), "max": float(values.max())})
        n_folds = 1 if folds is None else folds.V
        return FoldedPredictor("treatment_mechanism", [learner] * n_folds, bounds=(lower, upper))

    chosen = ["glm"] if mode == "logistic" else list(library)
    predictor = _fit_role("treatment_mechanism", "all subjects", d, np.ones(d.n, dtype=bool),
                          d.a.astype(float), weights, folds, chosen, "binomial", seed, 0, inner_folds,
                          bounds=(lower, upper))
    return predictor


def _require_discrete(d: Dataset) -> None:
    if d.biomarker_kind != BiomarkerKind.DISCRETE:
        raise UnsupportedModeError("Operation requires a discrete biomarker",
                                   {"biomarker_kind": d.biomarker_kind.value})


def fit_outcome_regressions(d: Dataset, spec: TargetSpec, weights: Optional[np.ndarray] = None,
                            folds: Optional[FoldPlan] = None, library: Sequence[str] = DEFAULT_LIBRARY,
                            bounds: TruncationBounds = TruncationBounds(), seed: int = 0,
                            inner_folds: int = 5,
                            treatment_mechanism: Optional[FoldedPredictor] = None,
                            learner_params: Optional[Dict[str, Dict]] = None) -> NuisanceFit:
    """
    Fit q1, q2 and q3 for the stratum s1_star

    q1(w) = P(S=s1* | A=1, w) on measured treated subjects,
    q2(w) = P(Y=1 | S=s1*, A=1, w) on measured treated subjects with S=s1*,
    q3(w) = P(Y=0, S^c=s1* | A=0, w) on measured untreated subjects.
    """
    _require_discrete(d)
    weights = _weights(d, weights)
    s1 = resolve_s1_star(d, spec)
    measured = d.delta == 1
    treated = measured & (d.a == 1)
    untreated = measured & (d.a == 0)
    at_stratum = treated & (d.s == s1)
    common = dict(weights=weights, folds=folds, library=library, family="binomial", seed=seed,
                  inner_folds=inner_folds, bounds=bounds.probability, learner_params=learner_params)

    regressions = {
        "q1": _fit_role("q1", "treated subjects", d, treated, (d.s == s1).astype(float),
                        role_id=1, **common),
        "q2": _fit_role("q2", "treated subjects with s = s1_star", d, at_stratum, d.y.astype(float),
                        role_id=2, **common),
        "q3": _fit_role("q3", "untreated subjects", d, untreated,
                        ((d.y == 0) & (d.s_c == s1)).astype(float), role_id=3, **common),
    }
    return NuisanceFit(regressions, treatment_mechanism, folds, bounds)


def fit_kernel_regression_qkh(d: Dataset, spec: TargetSpec, k: int, folds: Optional[FoldPlan] = None,
                              library: Sequence[str] = DEFAULT_LIBRARY, weights: Optional[np.ndarray] = None,
                              bounds: TruncationBounds = TruncationBounds(), seed: int = 0,
                              inner_folds: int = 5,
                              learner_params: Optional[Dict[str, Dict]] = None) -> FoldedPredictor:
    """
    Fold-specific regressions of the kernel pseudo-outcome f_{k,h} on w within arm a_k

    Predictions are floored at the density floor.
    """
    if d.biomarker_kind != BiomarkerKind.CONTINUOUS:
        raise UnsupportedModeError("Kernel regressions require a continuous biomarker")
    weights = _weights(d, weights)
    a_k = arm_of(k)
    rows = (d.a == a_k) & (d.delta == 1)
    f = pseudo_outcomes(d, spec, k)
    return _fit_role(f"q{k}h", f"arm {a_k}", d, rows, f, weights, folds, library, "gaussian",
                     seed, 10 + k, inner_folds, floor=bounds.density_floor, learner_params=learner_params)


def biomarker_support(d: Dataset) -> Tuple[float, ...]:
    """Observed biomarker values among measured treated subjects and untreated non-cases"""
    s = d.s[(d.a == 1) & (d.delta == 1)]
    s_c = d.s_c[(d.a == 0) & (d.y == 0) & (d.delta == 1)]
    values = np.concatenate([s, s_c])
    return tuple(float(v) for v in np.unique(values[~np.isnan(values)]))


def law_role(kind: str, s: float) -> str:
    return f"{kind}:{s:.17g}"


def fit_biomarker_laws(d: Dataset, weights: Optional[np.ndarray] = None,
                       library: Sequence[str] = DEFAULT_LIBRARY,
                       bounds: TruncationBounds = TruncationBounds(), seed: int = 0,
                       inner_folds: int = 5) -> NuisanceFit:
    """
    Conditional biomarker laws over the whole support

    For each support value s: s -> P(S=s | A=1, w) and s -> P(S^c=s, Y=0 | A=0, w).
    """
    _require_discrete(d)
    weights = _weights(d, weights)
    support = biomarker_support(d)
    measured = d.delta == 1
    treated = measured & (d.a == 1)
    untreated = measured & (d.a == 0)
    regressions = {}
    for index, s in enumerate(support):
        regressions[law_role("treated", s)] = _fit_role(
            law_role("treated", s), "treated subjects", d, treated, (d.s == s).astype(float), weights,
            None, library, "binomial", seed, 100 + 2 * index, inner_folds, bounds=bounds.probability)
        regressions[law_role("crossover", s)] = _fit_role(
            law_role("crossover", s), "untreated subjects", d, untreated,
            ((d.y == 0) & (d.s_c == s)).astype(float), weights, None, library, "binomial", seed,
            101 + 2 * index, inner_folds, bounds=bounds.probability)
    return NuisanceFit(regressions, None, None, bounds, support)


def projection_role(k: int, a: int, y: int) -> str:
    return f"phase2_projection:{k}:{a}:{y}"


def fit_phase2_projection(d: Dataset, spec: TargetSpec, library: Sequence[str] = DEFAULT_LIBRARY,
                          seed: int = 0, inner_folds: int = 5) -> NuisanceFit:
    """
    Fit (a, w, y) -> E[f_k | Delta=1, a, w, y] among phase-two subjects, one fit per (a, y) cell

    Cells whose pseudo-outcome is constant get that constant exactly.
    """
    _require_discrete(d)
    measured = d.delta == 1
    regressions = {}
    for k in (1, 2, 3):
        a_k = arm_of(k)
        f = pseudo_outcomes(d, spec, k)
        for y in (0, 1):
            cell = (d.a == a_k) & (d.y == y)
            if not np.any(cell):
                continue
            rows = cell & measured
            if not np.any(rows):
                raise StratumEmptyError(f"a={a_k}, y={y} among phase-two subjects")
            role = projection_role(k, a_k, y)
            regressions[role] = _fit_role(role, f"a={a_k}, y={y} among phase-two subjects", d, rows, f,
                                          np.ones(d.n), None, library, "binomial", seed,
                                          200 + 10 * k + 2 * a_k + y, inner_folds)
    return NuisanceFit(regressions)


def phase2_projection(fit: NuisanceFit, d: Dataset, k: int) -> np.ndarray:
    """E-hat[f_k | Delta=1, A_i, W_i, Y_i] for subjects in arm a_k (0 elsewhere)"""
    a_k = arm_of(k)
    out = np.zeros(d.n)
    for y in (0, 1):
        cell = (d.a == a_k) & (d.y == y)
        if not np.any(cell):
            continue
        role = projection_role(k, a_k, y)
        if role not in fit.regressions:
            raise LearnerError("Phase-two projection is missing", {"role": role})
        out[cell] = fit[role].predict(d.w[cell])
    return out
