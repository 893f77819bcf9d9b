"""
Estimation service combining nuisance settings, estimators, contrasts and diagnostics
"""
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from principal_tmle.estimators import (
    contrast,
    cv_tmle_continuous,
    cv_tmle_estimate,
    eif_diagnostics,
    estimate_psi4,
    estimate_sampling_probabilities,
    ipw_tmle,
    one_step_estimate,
    run_tmle,
    smoothed_contrast,
    stabilize_weights,
)
from principal_tmle.exceptions import ConfigError, UnsupportedModeError
from principal_tmle.models import (
    BiomarkerKind,
    ContrastKind,
    ContrastReport,
    Dataset,
    EstimatorMode,
    KernelSpec,
    NuisanceSettings,
    PsiEstimate,
    RunConfig,
    TargetSpec,
)
from principal_tmle.nuisance import fit_biomarker_laws
from principal_tmle.simulation import (
    bias_decay_probe,
    construct_compatible_counterfactual,
    coverage_by_bandwidth,
    coverage_experiment,
    discretize_biomarker,
    empirical_toy,
    pathwise_derivative_check,
    random_score,
    simulate_trial,
    two_phase_subsample,
)
from principal_tmle.utils.helpers import make_rng

logger = logging.getLogger(__name__)

# Child streams of the run seed, kept apart from simulate_trial's (rep,) streams
BOOTSTRAP_STREAM = 3
SUBSAMPLE_STREAM = 2

ESTIMATORS = {
    EstimatorMode.TMLE: lambda d, spec, settings: run_tmle(d, spec, settings),
    EstimatorMode.CV_TMLE: lambda d, spec, settings: cv_tmle_estimate(d, spec, settings=settings),
    EstimatorMode.IPW_TMLE: lambda d, spec, settings: ipw_tmle(d, spec, settings=settings),
    EstimatorMode.ONE_STEP: lambda d, spec, settings: one_step_estimate(d, spec, settings=settings),
    EstimatorMode.CONTINUOUS_CV_TMLE: lambda d, spec, settings: cv_tmle_continuous(d, spec, settings=settings),
}


class EstimationService:
    """Runs the configured estimator, contrast and diagnostics on a dataset"""

    def __init__(self, cfg: RunConfig):
        """
        Initialize the estimation service

        Args:
            cfg: Validated run configuration
        """
        self.cfg = cfg
        self.settings: NuisanceSettings = cfg.settings()
        self.mode = cfg.run.mode
        logger.info("Estimation service initialized: mode=%s, library=%s, folds=%d",
                    self.mode.value, ",".join(self.settings.library), self.settings.folds)

    def prepare(self, d: Dataset) -> Dataset:
        """Re-estimate sampling probabilities when a coarsening column is configured"""
        column = self.cfg.two_phase.coarsening
        if column is None:
            return d
        if column not in d.covariate_names:
            raise ConfigError(f"Coarsening column '{column}' is not a covariate",
                              {"covariates": list(d.covariate_names)})
        coarsening = d.w[:, d.covariate_names.index(column)]
        logger.info("Estimating sampling probabilities within (%s, A, Y) cells", column)
        return estimate_sampling_probabilities(d, coarsening)

    def target(self, s1_star: Optional[Any] = None) -> TargetSpec:
        try:
            return self.cfg.target_spec(s1_star)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def estimate(self, d: Dataset, spec: Optional[TargetSpec] = None,
                 mode: Optional[EstimatorMode] = None) -> PsiEstimate:
        """
        Estimate (psi_1, psi_2, psi_3) with the configured estimator

        Args:
            d: Dataset
            spec: Target (default from the configuration)
            mode: Estimator overriding the configured one

        Returns:
            PsiEstimate
        """
        mode = EstimatorMode(mode or self.mode)
        spec = spec or self.target()
        if (mode == EstimatorMode.CONTINUOUS_CV_TMLE) != (d.biomarker_kind == BiomarkerKind.CONTINUOUS):
            raise UnsupportedModeError(f"Estimator {mode.value} does not apply to a {d.biomarker_kind.value} biomarker",
                                       {"mode": mode.value, "biomarker": d.biomarker_kind.value})
        return ESTIMATORS[mode](self.prepare(d), spec, self.settings)

    def summarize(self, est: PsiEstimate, kind: Optional[ContrastKind] = None,
                  psi4: Optional[float] = None) -> ContrastReport:
        kind = ContrastKind(kind or self.cfg.target.contrast)
        if est.mode == EstimatorMode.CONTINUOUS_CV_TMLE:
            return smoothed_contrast(est, kind, self.cfg.target.component)
        return contrast(est, kind, self.cfg.target.component, psi4=psi4)

    def estimate_and_summarize(self, d: Dataset) -> Tuple[PsiEstimate, ContrastReport]:
        est = self.estimate(d)
        report = self.summarize(est)
        if report.identifiability_failure:
            logger.warning("Contrast not identified: %s", report.message)
        else:
            logger.info("%s = %.6g (SE %.4g)", report.kind.value, report.estimate, report.std_error)
        return est, report

    def psi4(self, d: Dataset) -> float:
        """Plug-in Psi_4 with the configured library, weighted for two-phase data"""
        weights = stabilize_weights(d).w_eff if d.is_two_phase else None
        laws = fit_biomarker_laws(d, weights=weights, library=self.settings.library,
                                  bounds=self.settings.bounds, seed=self.settings.seed,
                                  inner_folds=self.settings.inner_folds)
        return estimate_psi4(d, laws)

    def bootstrap_checks(self, d: Dataset, spec: TargetSpec) -> List[Dict[str, Any]]:
        """Counterfactual construction and pathwise check on tabulated bootstrap resamples"""
        section = self.cfg.diagnose
        weights = stabilize_weights(d).w_eff if d.is_two_phase else None
        s1_code = d.encode_biomarker(spec.s1_star)
        results = []
        for b in range(section.bootstrap):
            rng = make_rng(self.cfg.run.seed, b, BOOTSTRAP_STREAM)
            index = rng.integers(0, d.n, size=d.n)
            entry: Dict[str, Any] = {"resample": b}
            try:
                toy = empirical_toy(d.subset(index), section.w_bins,
                                    weights=None if weights is None else weights[index])
                construction = construct_compatible_counterfactual(toy)
                entry.update(feasible=construction.feasible, psi4=construction.psi4,
                             witnesses=construction.witnesses,
                             checks_passed=construction.passed() if construction.feasible else None)
                if s1_code in toy.s_support:
                    check = pathwise_derivative_check(toy, random_score(rng, toy), section.eps_grid,
                                                      toy.s_support.index(s1_code))
                    entry.update(pathwise_ratios=check.ratios)
            except ValueError as exc:
                entry.update(skipped=str(exc))
            results.append(entry)
        return results

    def diagnose(self, d: Dataset) -> Dict[str, Any]:
        """
        Psi_4 plug-in, influence-function diagnostics and bootstrap identification checks

        Returns:
            JSON-ready dictionary
        """
        spec = self.target()
        est = self.estimate(d, spec)
        eif = eif_diagnostics(est)
        payload: Dict[str, Any] = {
            "mode": est.mode.value,
            "n": est.n,
            "psi": est.psi,
            "eif_mean_max_abs": eif["eif_mean_max_abs"],
            "min_eigenvalue_sigma": eif["min_eigenvalue_sigma"],
            "sigma_eigenvalues": eif["sigma_eigenvalues"],
            "degenerate_sigma": eif["degenerate"],
            "seed": self.cfg.run.seed,
        }
        if d.biomarker_kind == BiomarkerKind.DISCRETE:
            payload["psi4_hat"] = self.psi4(d)
            payload["bootstrap"] = self.bootstrap_checks(d, spec)
        else:
            payload["psi4_hat"] = None
            payload["notes"] = ["Psi_4 and the bootstrap checks need a discrete biomarker"]
        return payload

    def simulate(self) -> Dataset:
        """Simulated trial, optionally discretized and subsampled per the configuration"""
        section = self.cfg.simulation
        d = simulate_trial(section.sim_config(self.cfg.run.seed))
        if section.threshold is not None:
            d = discretize_biomarker(d, section.threshold)
        if section.subsample:
            two_phase = self.cfg.two_phase
            d = two_phase_subsample(d, two_phase.design, two_phase.design_probability(),
                                    seed=self.cfg.run.seed, stream=(0, SUBSAMPLE_STREAM))
        return d

    def coverage(self) -> pd.DataFrame:
        """Coverage study at one bandwidth, or a bandwidth sweep when SIMULATION__H_GRID is set"""
        if "mode" in self.cfg.run.model_fields_set and self.mode != EstimatorMode.CONTINUOUS_CV_TMLE:
            raise ConfigError(f"The coverage study runs {EstimatorMode.CONTINUOUS_CV_TMLE.value}, not {self.mode.value}",
                              {"mode": self.mode.value, "supported": [EstimatorMode.CONTINUOUS_CV_TMLE.value]})
        section = self.cfg.simulation
        sim = section.sim_config(self.cfg.run.seed)
        kernel = KernelSpec(family=self.cfg.continuous.kernel)
        settings = self.settings
        if self.cfg.nuisance.treatment == "logistic" and self.cfg.nuisance.treatment_probability is None:
            settings = settings.model_copy(update={"treatment": "known", "treatment_probability": sim.arm_prob})
        workers = self.cfg.run.workers
        if section.h_grid:
            frames = [coverage_by_bandwidth(sim, section.h_grid, s1_star=s, kernel=kernel, workers=workers,
                                            settings=settings) for s in section.s1_grid]
            return pd.concat(frames, ignore_index=True)
        h = self.cfg.continuous.bandwidth
        if not isinstance(h, float):
            raise ConfigError("Coverage needs a fixed CONTINUOUS__BANDWIDTH", {"bandwidth": h})
        return coverage_experiment(sim, s1_grid=section.s1_grid, h=h, kernel=kernel, workers=workers,
                                   settings=settings)

    def bias_probe(self, s1_star: float) -> Tuple[Optional[float], pd.DataFrame]:
        sim = self.cfg.simulation.sim_config(self.cfg.run.seed)
        kernel = KernelSpec(family=self.cfg.continuous.kernel)
        return bias_decay_probe(sim, kernel, s1_star, self.cfg.continuous.h_grid)

    def get_service_info(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "library": list(self.settings.library),
            "treatment": self.settings.treatment,
            "folds": self.settings.folds,
            "supported_modes": [m.value for m in ESTIMATORS],
        }
