"""
Tests for the simulated trial, its quadrature truth, the enumerated toy laws
and the Monte Carlo harness

Acceptance-scale Monte Carlo runs are marked slow.
"""
import numpy as np
import pandas as pd
import pytest
from scipy import stats

from principal_tmle.core.pseudo_outcomes import pseudo_outcome_matrix
from principal_tmle.estimators import (
    contrast,
    cv_tmle_estimate,
    ipw_tmle,
    one_step_estimate,
    run_tmle,
    tmle_estimate,
)
from principal_tmle.exceptions import UnsupportedModeError
from principal_tmle.models import (
    ContrastKind,
    KernelFamily,
    KernelSpec,
    NuisanceSettings,
    SimConfig,
    TargetSpec,
)
from principal_tmle.nuisance import ConstantLearner
from principal_tmle.nuisance.regressions import FoldedPredictor, NuisanceFit
from principal_tmle.simulation import (
    DiscreteToyDistribution,
    bias_decay_probe,
    construct_compatible_counterfactual,
    coverage_by_bandwidth,
    coverage_experiment,
    discretize_biomarker,
    empirical_toy,
    identification_plugins,
    pathwise_derivative_check,
    psi4_of_toy,
    psi_of_toy,
    random_score,
    random_toy,
    remainder,
    run_replications,
    simulate_trial,
    true_psi,
    true_psi_discretized,
    two_phase_subsample,
)
from principal_tmle.simulation.coverage import COVERAGE_COLUMNS
from principal_tmle.simulation.toy import eif_of_toy, observable_cells
from principal_tmle.simulation.truth import psi_at, true_log_relative_risk

GAUSSIAN = KernelSpec()
ONE = TargetSpec(s1_star=1.0)
SMALL_SETTINGS = NuisanceSettings(library=("glm",), folds=3, treatment="known", treatment_probability=0.5)


def with_treatment_of(toy_hat: DiscreteToyDistribution, toy: DiscreteToyDistribution) -> DiscreteToyDistribution:
    """toy_hat rescaled so that its P(A | W) equals that of toy"""
    ratio = toy.p_a_given_w() / toy_hat.p_a_given_w()
    table = toy_hat.table * ratio[:, :, None, None, None]
    return DiscreteToyDistribution(w_support=toy_hat.w_support, s_support=toy_hat.s_support, table=table)


# Simulated trial

def test_simulation_is_deterministic(sim_config):
    first, second = simulate_trial(sim_config), simulate_trial(sim_config)
    np.testing.assert_array_equal(first.w, second.w)
    np.testing.assert_array_equal(first.y, second.y)
    assert not np.array_equal(simulate_trial(sim_config, rep=0).w, simulate_trial(sim_config, rep=1).w)


def test_fixed_margins_and_sentinels():
    d = simulate_trial(SimConfig(n=1001, seed=4, fixed_margins=True, arm_prob=0.3))
    assert d.a.sum() == round(1001 * 0.3)
    assert np.all(d.s[d.a == 0] == 0.0)
    assert np.all(d.s_c[d.a == 1] == 0.0)
    assert np.all(d.s_c[(d.a == 0) & (d.y == 1)] == 0.0)
    assert np.all(d.delta == 1) and not d.is_two_phase


def test_discretized_biomarker_keeps_sentinels(continuous_trial):
    d = discretize_biomarker(continuous_trial, 0.41)
    treated = d.a == 1
    crossed = (d.a == 0) & (d.y == 0)
    np.testing.assert_array_equal(d.s[treated], (continuous_trial.s[treated] > 0.41).astype(float))
    np.testing.assert_array_equal(d.s_c[crossed], (continuous_trial.s_c[crossed] > 0.41).astype(float))
    assert np.all(d.s[~treated] == 0.0)
    assert d.biomarker_kind.value == "discrete"


def test_noisy_crossover_needs_noise_and_has_no_closed_form():
    with pytest.raises(ValueError):
        SimConfig(crossover_rule="noisy")
    noisy = SimConfig(n=200, crossover_rule="noisy", noise_sd=0.1)
    d = simulate_trial(noisy)
    assert d.n == 200
    with pytest.raises(UnsupportedModeError):
        true_psi(noisy, 0.6)


def test_arm_disease_rates_match_calibration():
    d = simulate_trial(SimConfig(n=1_000_000, seed=1))
    assert d.y[d.a == 1].mean() == pytest.approx(0.095, abs=0.003)
    assert d.y[d.a == 0].mean() == pytest.approx(0.188, abs=0.003)


# Truth

def test_unsmoothed_truth_at_biomarker_mean(sim_config):
    psi = true_psi(sim_config, 0.41)
    assert psi[0] == pytest.approx(1 / (0.55 * np.sqrt(2 * np.pi)), abs=1e-10)
    assert psi[0] == pytest.approx(0.72534, abs=1e-5)
    assert 0 < psi[1] < psi[0] and 0 < psi[2] < psi[0]


def test_narrow_smoothing_approaches_truth(sim_config):
    smoothed = true_psi(sim_config, 0.6, smoothed=(GAUSSIAN, 0.01))
    assert np.linalg.norm(smoothed - true_psi(sim_config, 0.6)) < 1e-3


def test_identifying_formulas_match_truth(sim_config):
    d = simulate_trial(sim_config.model_copy(update={"n": 20000}))
    plugins = identification_plugins(d, sim_config, 0.6)
    truth = true_psi(sim_config, 0.6)
    assert np.all(np.abs(np.array(plugins["psi"]) - truth) < 4 * np.array(plugins["se"]))


def test_discretized_strata_partition_the_treated(sim_config):
    upper = true_psi_discretized(sim_config, 0.41, 1)
    lower = true_psi_discretized(sim_config, 0.41, 0)
    assert upper[0] + lower[0] == pytest.approx(1.0, abs=1e-8)
    assert upper[0] == pytest.approx(0.5, abs=1e-8)
    with pytest.raises(ValueError):
        true_psi_discretized(sim_config, 0.41, 2)


def test_true_log_relative_risk(sim_config):
    psi = psi_at(sim_config, 0.6)
    assert true_log_relative_risk(psi) == pytest.approx(np.log(psi[1]) - np.log(psi[0] - psi[2]))


# Enumerated toys

def test_feasible_toys_admit_a_compatible_counterfactual():
    rng = np.random.default_rng(100)
    for _ in range(100):
        toy, witness = random_toy(rng, n_w=int(rng.integers(1, 4)), n_s=int(rng.integers(2, 4)))
        construction = construct_compatible_counterfactual(toy)
        assert witness is None
        assert construction.psi4 == 0.0
        assert construction.passed(1e-10), construction.checks


def test_infeasible_toys_return_their_witness():
    rng = np.random.default_rng(200)
    for _ in range(100):
        toy, witness = random_toy(rng, n_w=2, n_s=3, feasible=False)
        construction = construct_compatible_counterfactual(toy)
        assert not construction.feasible
        assert construction.psi4 > 0
        assert construction.witnesses == [witness]
        assert not construction.passed()


def test_psi4_witnesses_agree_with_construction():
    toy, witness = random_toy(np.random.default_rng(3), feasible=False)
    psi4, witnesses = psi4_of_toy(toy)
    assert psi4 > 0 and witnesses == [witness]


def test_efficient_influence_function_has_mean_zero():
    toy, _ = random_toy(np.random.default_rng(5), n_w=3, n_s=3)
    eif = eif_of_toy(toy, 1)
    for j in range(3):
        assert abs(np.sum(toy.table * eif[j])) < 1e-14


def test_pathwise_defect_is_second_order():
    rng = np.random.default_rng(7)
    toy, _ = random_toy(rng, n_w=2, n_s=2)
    check = pathwise_derivative_check(toy, random_score(rng, toy), s_index=1)
    assert max(check.ratios) / min(check.ratios) < 3


def test_pathwise_defect_is_small_for_random_laws():
    rng = np.random.default_rng(11)
    for _ in range(20):
        toy, _ = random_toy(rng, n_w=3, n_s=2)
        for known in (False, True):
            check = pathwise_derivative_check(toy, random_score(rng, toy, known_treatment=known))
            assert check.defects[-1] < 1e-4
            assert check.defects[-1] < check.defects[0]


def test_pathwise_check_rejects_bad_directions():
    toy, _ = random_toy(np.random.default_rng(9))
    with pytest.raises(ValueError):
        pathwise_derivative_check(toy, np.ones((2, 2)))
    with pytest.raises(ValueError):
        pathwise_derivative_check(toy, observable_cells(toy.n_w, toy.n_s).astype(float))
    with pytest.raises(ValueError):
        pathwise_derivative_check(toy, random_score(np.random.default_rng(1), toy), eps_grid=(0.0,))


def test_remainder_closed_form_and_double_robustness():
    rng = np.random.default_rng(13)
    toy, _ = random_toy(rng, n_w=3, n_s=2)
    toy_hat, _ = random_toy(rng, n_w=3, n_s=2)
    check = remainder(toy, toy_hat)
    np.testing.assert_allclose(check.enumerated, check.closed_form, atol=1e-12)

    matched = remainder(toy, with_treatment_of(toy_hat, toy))
    np.testing.assert_allclose(matched.enumerated, 0.0, atol=1e-12)


def test_toy_validation():
    toy, _ = random_toy(np.random.default_rng(15))
    with pytest.raises(ValueError):
        DiscreteToyDistribution(w_support=(0.0,), s_support=toy.s_support, table=toy.table)
    negative = np.array(toy.table)
    negative[0, 1, 0, 0, 0] = -0.1
    with pytest.raises(ValueError):
        DiscreteToyDistribution(w_support=toy.w_support, s_support=toy.s_support, table=negative)
    with pytest.raises(ValueError):
        DiscreteToyDistribution(w_support=toy.w_support, s_support=toy.s_support, table=toy.table * 2)
    unobservable = np.array(toy.table)
    unobservable[0, 0, 1, 0, 0] += 0.1
    unobservable /= unobservable.sum()
    with pytest.raises(ValueError):
        DiscreteToyDistribution(w_support=toy.w_support, s_support=toy.s_support, table=unobservable)


def test_empirical_toy_tabulates_a_dataset(discrete_trial):
    toy = empirical_toy(discrete_trial, w_bins=4)
    assert toy.table.shape == (4, 2, 2, 2, 2)
    assert toy.table.sum() == pytest.approx(1.0)
    psi = psi_of_toy(toy, 1)
    treated = discrete_trial.a == 1
    assert psi[0] == pytest.approx(np.mean(discrete_trial.s[treated] == 1), abs=0.05)
    with pytest.raises(ValueError):
        empirical_toy(simulate_trial(SimConfig(n=100)))


# Bias decay

def test_bias_decays_quadratically_with_second_order_kernel(sim_config):
    slope, table = bias_decay_probe(sim_config, GAUSSIAN, 0.6, (0.4, 0.2, 0.1, 0.05))
    assert 1.7 <= slope <= 2.3
    assert list(table.columns) == ["h", "bias_norm"]
    assert table["bias_norm"].is_monotonic_decreasing

    higher, _ = bias_decay_probe(sim_config, KernelSpec(family=KernelFamily.GAUSSIAN4), 0.6,
                                 (0.4, 0.2, 0.1, 0.05))
    assert higher >= slope - 0.2


def test_bias_probe_on_constant_curve():
    slope, table = bias_decay_probe(lambda s: np.array([1.0, 0.5, 0.2]), GAUSSIAN, 0.0, (0.4, 0.2))
    assert slope is None
    assert len(table) == 2


def test_bias_probe_arguments():
    with pytest.raises(TypeError):
        bias_decay_probe(5)
    with pytest.raises(ValueError):
        bias_decay_probe(SimConfig(), h_grid=(0.1,))


# Monte Carlo harness

def test_replications_run_in_order():
    assert run_replications(lambda rep: rep * rep, 4) == [0, 1, 4, 9]


def test_small_coverage_run():
    cfg = SimConfig(n=400, seed=3, reps=4)
    frame = coverage_experiment(cfg, s1_grid=(0.3, 0.6), h=0.3, settings=SMALL_SETTINGS)
    assert list(frame.columns) == COVERAGE_COLUMNS
    assert frame["s1_star"].tolist() == [0.3, 0.6]
    assert (frame["reps"] == 4).all() and (frame["n"] == 400).all()
    assert (frame["failures"] <= 4).all()

    parallel = coverage_experiment(cfg, s1_grid=(0.3, 0.6), h=0.3, settings=SMALL_SETTINGS, workers=2)
    pd.testing.assert_frame_equal(frame, parallel)


def test_coverage_by_bandwidth_rows():
    cfg = SimConfig(n=400, seed=3)
    frame = coverage_by_bandwidth(cfg, h_grid=(0.2, 0.5), reps=2, settings=SMALL_SETTINGS)
    assert frame["h"].tolist() == [0.2, 0.5]
    assert (frame["s1_star"] == 0.6).all()


@pytest.mark.slow
def test_smoothed_intervals_reach_nominal_coverage():
    cfg = SimConfig(n=5000, seed=2024, reps=300)
    frame = coverage_experiment(cfg, s1_grid=(0.0, 0.3, 0.6), h=0.2, workers=8)
    assert frame["coverage_smoothed"].between(0.92, 0.98).all()
    assert (frame["bias_smoothed"].abs() <= 0.03).all()
    assert ((frame["mean_se"] - frame["sampling_sd"]).abs() <= 0.2 * frame["sampling_sd"]).all()


@pytest.mark.slow
def test_coverage_drops_only_for_small_bandwidths():
    cfg = SimConfig(n=5000, seed=2025, reps=300)
    frame = coverage_by_bandwidth(cfg, h_grid=(0.02, 0.2, 0.8), s1_star=0.6, workers=8)
    small, middle, large = frame["coverage_smoothed"].tolist()
    assert small < 0.92
    assert 0.92 <= middle <= 0.98
    assert 0.92 <= large <= 0.98


def _case_cohort_log_rr(rep: int):
    cfg = SimConfig(n=2000, seed=31)
    d = two_phase_subsample(discretize_biomarker(simulate_trial(cfg, rep=rep), 0.41), "case_cohort", 0.25,
                            seed=cfg.seed, stream=(rep, 2))
    spec = TargetSpec(s1_star=1.0)
    settings = NuisanceSettings(library=("glm",), treatment="known", treatment_probability=0.5)
    values = []
    for estimator in (ipw_tmle, one_step_estimate):
        report = contrast(estimator(d, spec, settings=settings), ContrastKind.LOG_RELATIVE_RISK)
        values.append(report.estimate)
    return values


@pytest.mark.slow
def test_one_step_is_no_less_efficient_than_ipw_tmle():
    draws = np.array(run_replications(_case_cohort_log_rr, 500, workers=8), dtype=float)
    draws = draws[np.all(np.isfinite(draws), axis=1)]
    ipw_variance, one_step_variance = draws.var(axis=0, ddof=1)
    assert one_step_variance <= ipw_variance


def _standardized_cv_tmle(rep: int):
    cfg = SimConfig(n=2000, seed=41)
    d = discretize_biomarker(simulate_trial(cfg, rep=rep), 0.41)
    est = cv_tmle_estimate(d, TargetSpec(s1_star=1.0), settings=NuisanceSettings(folds=5))
    eigenvalues, vectors = np.linalg.eigh(est.sigma)
    inverse_root = vectors @ np.diag(eigenvalues ** -0.5) @ vectors.T
    return np.sqrt(est.n) * inverse_root @ (est.psi - true_psi_discretized(cfg, 0.41, 1))


@pytest.mark.slow
def test_standardized_estimates_are_normal():
    draws = np.array(run_replications(_standardized_cv_tmle, 500, workers=8))
    for j in range(3):
        assert stats.kstest(draws[:, j], "norm").pvalue > 0.01


STRONG_COVARIATE = SimConfig(n=1000, seed=51, cov=((0.3025, 0.27225), (0.27225, 0.3025)))


def _adjusted_and_unadjusted(rep: int):
    d = discretize_biomarker(simulate_trial(STRONG_COVARIATE, rep=rep), 0.41)
    settings = NuisanceSettings(library=("glm",), treatment="known", treatment_probability=0.5)
    f = pseudo_outcome_matrix(d, ONE, 1.0)
    treated, untreated = d.a == 1, d.a == 0
    unadjusted = [f[treated, 0].mean(), f[treated, 1].mean(), f[untreated, 2].mean()]
    return np.r_[run_tmle(d, ONE, settings).psi, unadjusted]


@pytest.mark.slow
def test_tmle_is_no_less_efficient_than_unadjusted():
    draws = np.array(run_replications(_adjusted_and_unadjusted, 500, workers=8))
    variances = draws.var(axis=0, ddof=1)
    assert np.all(variances[:3] <= variances[3:])


def _misspecified_outcome_tmle(rep: int):
    cfg = SimConfig(n=2000, seed=61)
    d = discretize_biomarker(simulate_trial(cfg, rep=rep), 0.41)

    def constant(role, value):
        return FoldedPredictor(role, [ConstantLearner("binomial", value)])

    wrong = NuisanceFit({"q1": constant("q1", 0.2), "q2": constant("q2", 0.05), "q3": constant("q3", 0.7)},
                        treatment_mechanism=constant("treatment", 0.5))
    return tmle_estimate(d, ONE, wrong).psi


@pytest.mark.slow
def test_known_treatment_corrects_a_misspecified_outcome_regression():
    draws = np.array(run_replications(_misspecified_outcome_tmle, 300, workers=8))
    truth = true_psi_discretized(SimConfig(n=2000, seed=61), 0.41, 1)
    bias = draws.mean(axis=0) - truth
    monte_carlo_se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(bias) < 4 * monte_carlo_se)
    assert abs(0.2 - truth[0]) > 0.1
