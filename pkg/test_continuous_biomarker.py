"""
Tests for continuous biomarkers: bandwidth selection, the log-linear fluctuation,
CV-TMLE of the smoothed parameters and the smoothed contrasts
"""
import numpy as np
import pytest
from scipy import integrate, optimize, stats

from principal_tmle.core.pseudo_outcomes import pseudo_outcomes
from principal_tmle.estimators import (
    as_smoothed,
    cv_tmle_continuous,
    lscv_criterion,
    run_tmle,
    select_bandwidth,
    smoothed_contrast,
)
from principal_tmle.estimators.bandwidth import bandwidth_grid, treated_biomarker
from principal_tmle.estimators.targeting import smoothed_score, solve_log_fluctuation
from principal_tmle.exceptions import DataValidationError, FluctuationError, UnsupportedModeError
from principal_tmle.models import (
    BiomarkerKind,
    ContrastKind,
    Dataset,
    EstimatorMode,
    FoldPlan,
    KernelFamily,
    KernelSpec,
    NuisanceSettings,
    PsiEstimate,
    TargetSpec,
)
from principal_tmle.simulation import smoothed_psi_by_covariate, true_psi

GAUSSIAN = KernelSpec()
SMOOTHED = TargetSpec(s1_star=0.6, kernel=GAUSSIAN, bandwidth=0.2)


def create_treated_biomarker_dataset(s: np.ndarray) -> Dataset:
    n = len(s)
    return Dataset(w=np.zeros((n, 1)), a=np.ones(n, dtype=int), s=s, y=np.zeros(n, dtype=int),
                   s_c=np.zeros(n), delta=np.ones(n, dtype=int), pi=np.ones(n),
                   biomarker_kind=BiomarkerKind.CONTINUOUS)


# Bandwidth selection

def test_fixed_bandwidth_passes_through(continuous_trial):
    assert select_bandwidth(continuous_trial, 0.2) == 0.2
    with pytest.raises(ValueError):
        select_bandwidth(continuous_trial, -1.0)
    with pytest.raises(ValueError):
        select_bandwidth(continuous_trial, "silverman")


def test_lscv_bandwidth_on_normal_sample():
    s = np.random.default_rng(6).normal(size=1000)
    d = create_treated_biomarker_dataset(s)
    h = select_bandwidth(d)
    reference = 1.06 * np.std(s, ddof=1) * 1000 ** (-0.2)
    assert reference / 3 <= h <= 3 * reference

    grid = bandwidth_grid(s)
    position = int(np.flatnonzero(np.isclose(grid, h))[0])
    score = lscv_criterion(s, h)
    for neighbor in (position - 1, position + 1):
        if 0 <= neighbor < len(grid):
            assert score <= lscv_criterion(s, grid[neighbor])


def test_lscv_needs_enough_treated_biomarkers():
    with pytest.raises(DataValidationError) as excinfo:
        select_bandwidth(create_treated_biomarker_dataset(np.linspace(0, 1, 19)))
    assert excinfo.value.violations[0]["rule"] == "bandwidth_sample_size"
    with pytest.raises(DataValidationError):
        select_bandwidth(create_treated_biomarker_dataset(np.full(30, 0.4)))


def test_lscv_criterion_matches_quadrature():
    x = np.random.default_rng(1).normal(size=15)
    h = 0.5
    n = len(x)

    def density(t):
        return np.mean(stats.norm.pdf((t - x) / h)) / h

    integral_sq, _ = integrate.quad(lambda t: density(t) ** 2, x.min() - 10 * h, x.max() + 10 * h,
                                  epsabs=1e-12, epsrel=1e-12, limit=200)
    pairs = stats.norm.pdf((x[:, None] - x[None, :]) / h) / h
    leave_one_out = (pairs.sum() - np.trace(pairs)) / (n * (n - 1))
    assert lscv_criterion(x, h) == pytest.approx(integral_sq - 2 * leave_one_out, abs=1e-8)


def test_lscv_with_uniform_and_higher_order_kernels():
    x = np.random.default_rng(2).normal(size=200)
    for family in (KernelFamily.UNIFORM, KernelFamily.GAUSSIAN4):
        assert np.isfinite(lscv_criterion(x, 0.4, KernelSpec(family=family)))


def test_treated_biomarker_skips_missing_and_untreated(continuous_trial):
    values = treated_biomarker(continuous_trial)
    assert len(values) == int(np.sum(continuous_trial.a == 1))


# Log-linear fluctuation

def test_closed_form_fluctuation_solves_the_score():
    rng = np.random.default_rng(4)
    f = rng.exponential(size=300)
    fitted = rng.uniform(0.5, 1.5, 300)
    weights = rng.uniform(1.0, 3.0, 300)
    eps = solve_log_fluctuation(f, fitted, weights)
    assert abs(smoothed_score(eps, f, fitted, weights)) < 1e-12
    root = optimize.brentq(smoothed_score, -5, 5, args=(f, fitted, weights), xtol=1e-14)
    assert eps == pytest.approx(root, abs=1e-10)
    at_root = smoothed_score(eps, f, fitted, weights) ** 2
    for shifted in (eps - 1e-6, eps + 1e-6):
        assert smoothed_score(shifted, f, fitted, weights) ** 2 > at_root


def test_closed_form_fluctuation_needs_positive_mass():
    with pytest.raises(FluctuationError):
        solve_log_fluctuation(np.zeros(3), np.ones(3), np.ones(3))
    with pytest.raises(FluctuationError):
        solve_log_fluctuation(np.ones(3), np.zeros(3), np.ones(3))


# Estimator

def test_arm_mean_fit_needs_no_fluctuation(continuous_trial):
    settings = NuisanceSettings(library=("mean",), treatment="known", treatment_probability=0.5)
    est = cv_tmle_continuous(continuous_trial, SMOOTHED, folds=FoldPlan.single(continuous_trial.n),
                             settings=settings)
    assert np.max(np.abs(est.epsilons)) < 1e-12
    assert est.notes == ["kernel=gaussian"]


def test_smoothed_estimate_recovers_truth(sim_config, continuous_trial):
    settings = NuisanceSettings(library=("glm", "glm_interaction"), folds=5)
    est = cv_tmle_continuous(continuous_trial, SMOOTHED, settings=settings)
    truth = true_psi(sim_config, 0.6, smoothed=(GAUSSIAN, 0.2))
    se = np.sqrt(np.diag(est.sigma) / est.n)
    assert np.all(np.abs(est.psi - truth) < 4 * se)
    assert est.bandwidth_used == 0.2
    assert est.mode == EstimatorMode.CONTINUOUS_CV_TMLE

    report = smoothed_contrast(est, ContrastKind.LOG_RELATIVE_RISK)
    assert report.bandwidth == 0.2
    assert report.ci_lower < report.estimate < report.ci_upper

    view = as_smoothed(est)
    np.testing.assert_array_equal(view.psi_h, est.psi)
    assert view.h == 0.2


def test_selected_bandwidth_is_recorded(continuous_trial):
    spec = TargetSpec(s1_star=0.6, kernel=GAUSSIAN, bandwidth="lscv_density")
    settings = NuisanceSettings(library=("glm",), folds=3)
    est = cv_tmle_continuous(continuous_trial, spec, settings=settings)
    assert est.bandwidth_used == pytest.approx(select_bandwidth(continuous_trial))


def test_continuous_estimator_rejects_discrete_data(discrete_trial):
    with pytest.raises(UnsupportedModeError):
        cv_tmle_continuous(discrete_trial, SMOOTHED)


def test_continuous_estimator_needs_smoothing(continuous_trial):
    with pytest.raises(UnsupportedModeError):
        cv_tmle_continuous(continuous_trial, TargetSpec(s1_star=0.6))


def test_null_smoothed_contrast():
    rows = np.array([[1.0, 0.5, 0.0], [-1.0, -0.5, 0.0], [0.0, 0.2, 0.3], [0.0, -0.2, -0.3]])
    centered = rows.T @ rows / 4
    est = PsiEstimate(psi=[2.0, 1.0, 1.0], influence_rows=rows, sigma=(centered + centered.T) / 2,
                      epsilons=np.zeros(3), mode=EstimatorMode.CONTINUOUS_CV_TMLE, bandwidth_used=0.3)
    report = smoothed_contrast(est)
    assert report.estimate == pytest.approx(0.0, abs=1e-15)
    assert report.bandwidth == 0.3


def test_smoothed_contrast_needs_continuous_estimate(binary_covariate_dataset):
    est = run_tmle(binary_covariate_dataset, TargetSpec(s1_star=1.0), NuisanceSettings(library=("glm",)))
    with pytest.raises(UnsupportedModeError):
        smoothed_contrast(est)
    with pytest.raises(UnsupportedModeError):
        as_smoothed(est)


# Smoothed pseudo-outcomes and truth

def test_uniform_kernel_on_lattice_rescales_indicators(discrete_trial):
    lattice = discrete_trial.replace(biomarker_kind=BiomarkerKind.CONTINUOUS)
    spec = TargetSpec(s1_star=1.0, kernel=KernelSpec(family=KernelFamily.UNIFORM), bandwidth=0.5)
    discrete = TargetSpec(s1_star=1.0)
    for k in (1, 2, 3):
        np.testing.assert_allclose(pseudo_outcomes(lattice, spec, k),
                                   pseudo_outcomes(discrete_trial, discrete, k) / 0.5)


def test_smoothed_truth_does_not_depend_on_integration_order(sim_config):
    np.testing.assert_allclose(true_psi(sim_config, 0.6, smoothed=(GAUSSIAN, 0.2)),
                               smoothed_psi_by_covariate(sim_config, 0.6, GAUSSIAN, 0.2), atol=1e-6)
