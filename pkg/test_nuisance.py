"""
Tests for nuisance estimation: IRLS, learners, factory, folds, the
cross-validated selector and the regression fitters
"""
import numpy as np
import pytest
from scipy import optimize
from scipy.special import expit, logit
from sklearn.base import BaseEstimator, clone

from principal_tmle.core.pseudo_outcomes import pseudo_outcomes
from principal_tmle.exceptions import (
    ConfigError,
    LearnerError,
    PositivityError,
    SeparationWarning,
    StratumEmptyError,
    UnsupportedModeError,
)
from principal_tmle.models import Dataset, KernelSpec, TargetSpec, TruncationBounds
from principal_tmle.nuisance import (
    BaseLearner,
    ConstantLearner,
    GLMLearner,
    LearnerFactory,
    MeanLearner,
    NadarayaWatsonLearner,
    biomarker_support,
    cv_select,
    fit_biomarker_laws,
    fit_kernel_regression_qkh,
    fit_outcome_regressions,
    fit_treatment_mechanism,
    fit_weighted_logistic,
    make_folds,
    weighted_loss,
)
from principal_tmle.simulation.truth import true_treated_stratum_probability

ONE = TargetSpec(s1_star=1.0)


def create_logistic_data(n: int = 50, seed: int = 3):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    y = (rng.random(n) < expit(x @ np.array([-0.3, 0.8, -0.5]))).astype(float)
    weights = rng.uniform(0.5, 2.0, n)
    return x, y, weights


class FailingLearner(BaseLearner):
    """Learner that always fails to fit"""

    name = "failing"

    def _fit(self, x, y, weights):
        raise LearnerError("cannot fit")

    def _predict(self, x):
        return np.zeros(x.shape[0])


# Weighted logistic regression

def test_intercept_only_fit_recovers_logit_of_mean():
    y = np.array([1, 0, 0, 0, 1, 0, 0, 0], dtype=float)
    fit = fit_weighted_logistic(np.ones((8, 1)), y)
    assert fit.converged
    assert fit.coef[0] == pytest.approx(logit(0.25), abs=1e-9)
    assert fit.coef[0] == pytest.approx(-1.0986, abs=1e-4)


def test_offset_at_saturated_fit_gives_zero_intercept():
    group = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1])
    y = np.array([1, 0, 0, 1, 1, 1, 0, 1, 1], dtype=float)
    fitted = np.where(group == 1, y[group == 1].mean(), y[group == 0].mean())
    fit = fit_weighted_logistic(np.ones((9, 1)), y, offset=logit(fitted))
    assert abs(fit.coef[0]) < 1e-10


def test_irls_matches_direct_likelihood_maximization():
    x, y, weights = create_logistic_data()
    fit = fit_weighted_logistic(x, y, weights)

    def negative_loglik(beta):
        eta = x @ beta
        return -np.sum(weights * (y * eta - np.logaddexp(0.0, eta)))

    def gradient(beta):
        return -x.T @ (weights * (y - expit(x @ beta)))

    direct = optimize.minimize(negative_loglik, np.zeros(3), jac=gradient, method="BFGS",
                               options={"gtol": 1e-12, "maxiter": 1000})
    np.testing.assert_allclose(fit.coef, direct.x, atol=1e-5)
    assert fit.max_score < 1e-10


def test_weight_scaling_leaves_coefficients_unchanged():
    x, y, weights = create_logistic_data(n=200, seed=5)
    base = fit_weighted_logistic(x, y, weights)
    scaled = fit_weighted_logistic(x, y, 3.7 * weights)
    np.testing.assert_allclose(base.coef, scaled.coef, atol=1e-8)


def test_separated_data_is_flagged_and_clipped():
    x = np.column_stack([np.ones(10), np.arange(10.0)])
    y = (np.arange(10) >= 5).astype(float)
    with pytest.warns(SeparationWarning):
        fit = fit_weighted_logistic(x, y)
    assert fit.separated
    predictions = fit.predict(x)
    assert np.all((predictions > 0) & (predictions < 1))


def test_zero_column_is_rank_deficient():
    x = np.column_stack([np.ones(6), np.zeros(6)])
    with pytest.raises(LearnerError):
        fit_weighted_logistic(x, np.array([0, 1, 0, 1, 1, 0], dtype=float))


def test_all_zero_weights_are_rejected():
    with pytest.raises(LearnerError):
        fit_weighted_logistic(np.ones((3, 1)), np.array([0.0, 1.0, 0.0]), weights=np.zeros(3))


# Learners and factory

def test_glm_on_binary_covariate_is_saturated():
    w = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1], dtype=float)
    y = np.array([1, 0, 0, 0, 1, 1, 0, 1, 1, 0], dtype=float)
    learner = GLMLearner("binomial").fit(w, y)
    predictions = learner.predict(np.array([0.0, 1.0]))
    np.testing.assert_allclose(predictions, [0.25, 4 / 6], atol=1e-9)


def test_gaussian_glm_is_weighted_least_squares():
    x = np.linspace(-1, 1, 20)
    y = 2.0 + 3.0 * x
    learner = GLMLearner("gaussian", interactions=True).fit(x, y)
    np.testing.assert_allclose(learner.predict(np.array([0.5])), [3.5], atol=1e-10)


def test_mean_learner_is_weighted_mean():
    learner = MeanLearner().fit(np.zeros((3, 1)), np.array([1.0, 0.0, 0.0]), np.array([2.0, 1.0, 1.0]))
    assert learner.predict(np.zeros((2, 1))).tolist() == [0.5, 0.5]


def test_predict_before_fit_fails():
    with pytest.raises(LearnerError):
        MeanLearner().predict(np.zeros((1, 1)))


def test_constant_and_nadaraya_watson_learners():
    assert ConstantLearner("binomial", 0.3).predict(np.zeros((2, 1))).tolist() == [0.3, 0.3]
    x = np.linspace(0, 1, 30)
    learner = NadarayaWatsonLearner("gaussian").fit(x, np.full(30, 0.7))
    np.testing.assert_allclose(learner.predict(np.array([0.2, 0.9])), [0.7, 0.7])


def test_factory_builds_named_learners():
    factory = LearnerFactory()
    assert set(factory.get_supported_learners()) >= {"mean", "glm", "glm_interaction", "nadaraya_watson"}
    library = factory.create_library(["glm_interaction", "mean"], "binomial")
    assert [learner.describe() for learner in library] == ["glm_interaction", "mean"]
    with pytest.raises(ConfigError):
        factory.create("random_forest")
    with pytest.raises(ConfigError):
        factory.create_library([])


def test_clone_is_unfitted_copy():
    x, y, _ = create_logistic_data()
    learner = GLMLearner("binomial", interactions=True).fit(x[:, 1:], y)
    copy = clone(learner)
    assert copy is not learner
    assert copy.get_params() == {"family": "binomial", "interactions": True}
    assert learner.fitted and not copy.fitted
    assert copy.describe() == "glm_interaction"


def test_learners_follow_the_estimator_protocol():
    learner = NadarayaWatsonLearner("gaussian", bandwidth=0.3)
    assert isinstance(learner, BaseEstimator)
    assert learner.describe() == "nadaraya_watson(bandwidth=0.3, chunk_size=2048)"
    learner.set_params(bandwidth=0.5)
    assert clone(learner).bandwidth == 0.5
    constant = clone(ConstantLearner("binomial", 0.4))
    assert constant.fitted and constant.predict(np.zeros((1, 1))).tolist() == [0.4]


def test_gaussian_glm_matches_weighted_normal_equations():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(60, 2))
    y = 1.0 + x @ np.array([0.5, -2.0]) + rng.normal(size=60)
    weights = rng.uniform(0.2, 3.0, 60)
    learner = GLMLearner("gaussian").fit(x, y, weights)
    design = np.column_stack([np.ones(60), x])
    beta = np.linalg.solve(design.T @ (weights[:, None] * design), design.T @ (weights * y))
    np.testing.assert_allclose(learner.predict(x), design @ beta, atol=1e-8)


# Folds

def test_folds_are_balanced_and_stratified():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, 503)
    y = rng.integers(0, 2, 503)
    plan = make_folds(a, y, V=10, seed=4)
    sizes = plan.sizes()
    assert max(sizes) - min(sizes) <= 1
    for arm in (0, 1):
        for outcome in (0, 1):
            counts = np.bincount(plan.assignment[(a == arm) & (y == outcome)], minlength=10)
            assert counts.max() - counts.min() <= 2


def test_folds_are_seeded():
    a = np.array([0, 1] * 20)
    y = np.array([0, 0, 1, 1] * 10)
    first = make_folds(a, y, V=4, seed=9)
    np.testing.assert_array_equal(first.assignment, make_folds(a, y, V=4, seed=9).assignment)
    assert not np.array_equal(first.assignment, make_folds(a, y, V=4, seed=9, stream=(1,)).assignment)
    with pytest.raises(ValueError):
        make_folds(a, y, V=41)


def test_single_fold_and_sparse_strata():
    assert make_folds(np.zeros(5, dtype=int), np.arange(5) % 2, V=1).assignment.tolist() == [0] * 5
    plan = make_folds(np.zeros(5, dtype=int), np.array([0, 0, 0, 1, 1]), V=5, seed=2)
    assert sorted(plan.assignment.tolist()) == [0, 1, 2, 3, 4]


# Selector

def test_single_learner_is_returned_unchanged():
    learner = MeanLearner()
    plan = make_folds(np.zeros(10, dtype=int), np.arange(10) % 2, V=2)
    chosen, risks = cv_select([learner], np.zeros((10, 1)), np.arange(10) % 2, None, plan)
    assert chosen is learner and risks == {}


def test_tie_goes_to_first_learner():
    first, second = MeanLearner(), MeanLearner()
    y = (np.arange(40) % 3 == 0).astype(float)
    plan = make_folds(np.zeros(40, dtype=int), y, V=5)
    chosen, _ = cv_select([first, second], np.zeros((40, 1)), y, None, plan)
    assert chosen is first


def test_logistic_beats_intercept_on_linear_logistic_truth():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(2000, 1))
    y = (rng.random(2000) < expit(-0.2 + 1.5 * x[:, 0])).astype(float)
    plan = make_folds(np.zeros(2000, dtype=int), y, V=5, seed=1)
    chosen, risks = cv_select([MeanLearner(), GLMLearner()], x, y, None, plan)
    assert chosen.name == "glm"
    assert risks["glm"] < risks["mean"]


def test_failing_learner_is_excluded_with_warning():
    y = (np.arange(30) % 2).astype(float)
    plan = make_folds(np.zeros(30, dtype=int), y, V=3)
    with pytest.warns(UserWarning):
        chosen, risks = cv_select([FailingLearner(), MeanLearner()], np.zeros((30, 1)), y, None, plan)
    assert chosen.name == "mean"
    assert "failing" not in risks


def test_library_where_every_learner_fails():
    y = (np.arange(30) % 2).astype(float)
    plan = make_folds(np.zeros(30, dtype=int), y, V=3)
    with pytest.warns(UserWarning), pytest.raises(LearnerError):
        cv_select([FailingLearner(), FailingLearner()], np.zeros((30, 1)), y, None, plan)


def test_weighted_losses():
    y = np.array([1.0, 0.0])
    p = np.array([0.5, 0.5])
    assert weighted_loss(y, p, np.ones(2), "weighted_bernoulli") == pytest.approx(np.log(2))
    assert weighted_loss(y, p, np.array([1.0, 3.0]), "weighted_squared_error") == pytest.approx(0.25)
    with pytest.raises(ValueError):
        weighted_loss(y, p, np.ones(2), "hinge")


# Treatment mechanism

def test_known_treatment_probability(discrete_trial):
    predictor = fit_treatment_mechanism(discrete_trial, mode="known", known=0.5)
    assert np.all(predictor.predict(discrete_trial.w) == 0.5)


def test_known_probability_outside_bounds(discrete_trial):
    with pytest.raises(PositivityError):
        fit_treatment_mechanism(discrete_trial, mode="known", known=0.995)


def test_logistic_treatment_mechanism_under_randomization(large_discrete_trial):
    d = large_discrete_trial
    predictor = fit_treatment_mechanism(d, mode="logistic")
    assert np.max(np.abs(predictor.predict(d.w) - d.a.mean())) < 0.03


def test_ensemble_treatment_mechanism_prefers_the_lower_risk_model():
    rng = np.random.default_rng(8)
    n = 3000
    w = rng.normal(size=n)
    a = (rng.random(n) < expit(1.2 * w)).astype(int)
    d = Dataset(w=w, a=a, s=np.zeros(n), y=np.zeros(n, dtype=int), s_c=np.zeros(n),
                delta=np.ones(n, dtype=int), pi=np.ones(n))
    predictor = fit_treatment_mechanism(d, mode="ensemble", library=("mean", "glm"))
    assert predictor.selected == ["glm"]


def test_unknown_treatment_mode_and_single_arm(discrete_trial):
    with pytest.raises(UnsupportedModeError):
        fit_treatment_mechanism(discrete_trial, mode="forest")
    treated = discrete_trial.subset(discrete_trial.a == 1)
    with pytest.raises(PositivityError):
        fit_treatment_mechanism(treated)


# Stratum regressions

def test_saturated_regressions_equal_stratum_means(binary_covariate_dataset):
    d = binary_covariate_dataset
    fit = fit_outcome_regressions(d, ONE, library=("glm",))
    for w in (0.0, 1.0):
        treated = (d.a == 1) & (d.w[:, 0] == w)
        untreated = (d.a == 0) & (d.w[:, 0] == w)
        at_stratum = treated & (d.s == 1)
        point = np.array([[w]])
        assert fit["q1"].predict(point)[0] == pytest.approx(np.mean(d.s[treated] == 1), abs=1e-9)
        assert fit["q2"].predict(point)[0] == pytest.approx(d.y[at_stratum].mean(), abs=1e-9)
        assert fit["q3"].predict(point)[0] == pytest.approx(
            np.mean((d.y[untreated] == 0) & (d.s_c[untreated] == 1)), abs=1e-9)


def test_unit_weights_match_unweighted_fit(discrete_trial):
    plain = fit_outcome_regressions(discrete_trial, ONE)
    weighted = fit_outcome_regressions(discrete_trial, ONE, weights=np.ones(discrete_trial.n))
    for role in ("q1", "q2", "q3"):
        np.testing.assert_array_equal(plain[role].predict(discrete_trial.w),
                                      weighted[role].predict(discrete_trial.w))


def test_predictions_respect_probability_bounds(discrete_trial):
    bounds = TruncationBounds(probability=(0.2, 0.8))
    fit = fit_outcome_regressions(discrete_trial, ONE, bounds=bounds)
    for role in ("q1", "q2", "q3"):
        predictions = fit[role].predict(discrete_trial.w)
        assert predictions.min() >= 0.2 and predictions.max() <= 0.8


def test_treated_stratum_regression_tracks_truth(sim_config):
    from principal_tmle.simulation import discretize_biomarker, simulate_trial
    cfg = sim_config.model_copy(update={"n": 10000})
    d = discretize_biomarker(simulate_trial(cfg), 0.41)
    fit = fit_outcome_regressions(d, ONE)
    points = np.array([-0.5, 0.0, 0.5])
    truth = true_treated_stratum_probability(cfg, 0.41, points)
    np.testing.assert_allclose(fit["q1"].predict(points.reshape(-1, 1)), truth, atol=0.05)


def test_empty_stratum_is_an_error(discrete_trial):
    with pytest.raises(StratumEmptyError) as excinfo:
        fit_outcome_regressions(discrete_trial, TargetSpec(s1_star=5.0))
    assert "s1_star" in excinfo.value.details["stratum"]


def test_fold_fits_exclude_their_validation_fold(discrete_trial):
    d = discrete_trial
    folds = make_folds(d.a, d.y, V=4, seed=2)
    fit = fit_outcome_regressions(d, ONE, folds=folds, library=("mean",))
    own = fit["q1"].predict_own(d.w, folds)
    f1 = pseudo_outcomes(d, ONE, 1)
    treated = d.a == 1
    for v in range(4):
        expected = f1[treated & (folds.assignment != v)].mean()
        np.testing.assert_allclose(own[folds.assignment == v], expected, atol=1e-12)
    assert fit["q1"].n_folds == 4


def test_discrete_regressions_reject_continuous_data(continuous_trial):
    with pytest.raises(UnsupportedModeError):
        fit_outcome_regressions(continuous_trial, TargetSpec(s1_star=0.6))


# Kernel regressions and biomarker laws

def test_kernel_regression_of_constant_mean(continuous_trial):
    d = continuous_trial
    spec = TargetSpec(s1_star=0.6, kernel=KernelSpec(), bandwidth=0.2)
    predictor = fit_kernel_regression_qkh(d, spec, 1, library=("mean",))
    f1 = pseudo_outcomes(d, spec, 1)
    np.testing.assert_allclose(predictor.predict(d.w[:3]), f1[d.a == 1].mean())


def test_kernel_regression_needs_continuous_biomarker(discrete_trial):
    spec = TargetSpec(s1_star=1.0, kernel=KernelSpec(), bandwidth=0.2)
    with pytest.raises(UnsupportedModeError):
        fit_kernel_regression_qkh(discrete_trial, spec, 1)


def test_kernel_regression_mean_matches_smoothed_truth(large_sim_config):
    from principal_tmle.simulation import simulate_trial, true_psi
    d = simulate_trial(large_sim_config)
    spec = TargetSpec(s1_star=0.6, kernel=KernelSpec(), bandwidth=0.2)
    predictor = fit_kernel_regression_qkh(d, spec, 1, library=("glm",))
    truth = true_psi(large_sim_config, 0.6, smoothed=(KernelSpec(), 0.2))
    assert predictor.predict(d.w).mean() == pytest.approx(truth[0], abs=0.05)


def test_biomarker_laws_cover_the_support(discrete_trial):
    assert biomarker_support(discrete_trial) == (0.0, 1.0)
    laws = fit_biomarker_laws(discrete_trial)
    assert laws.biomarker_support == (0.0, 1.0)
    assert laws.has("treated:0", "treated:1", "crossover:0", "crossover:1")
