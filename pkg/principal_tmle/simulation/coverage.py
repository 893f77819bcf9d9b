"""
Monte Carlo coverage of smoothed log relative risk intervals
"""
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from principal_tmle.estimators.continuous import cv_tmle_continuous
from principal_tmle.estimators.contrasts import contrast, smoothed_contrast
from principal_tmle.exceptions import PrincipalTMLEError
from principal_tmle.models import (
    ContrastKind,
    Dataset,
    EstimatorMode,
    FoldPlan,
    KernelSpec,
    NuisanceSettings,
    PsiEstimate,
    SimConfig,
    TargetSpec,
)
from principal_tmle.nuisance.folds import make_folds
from principal_tmle.simulation.dgp import simulate_trial
from principal_tmle.simulation.truth import true_log_relative_risk, true_psi

logger = logging.getLogger(__name__)

COVERAGE_COLUMNS = [
    "s1_star", "h", "n", "reps", "bias_truth", "bias_smoothed", "coverage_truth",
    "coverage_smoothed", "mean_se", "sampling_sd", "failures",
]
MIN_REPS = 100
FOLD_STREAM = 1

Estimator = Callable[[Dataset, TargetSpec, FoldPlan, NuisanceSettings], PsiEstimate]


def continuous_estimator(d: Dataset, spec: TargetSpec, folds: FoldPlan, settings: NuisanceSettings) -> PsiEstimate:
    return cv_tmle_continuous(d, spec, folds=folds, settings=settings)


def default_settings(cfg: SimConfig) -> NuisanceSettings:
    """Known randomization probability with the default learner library"""
    return NuisanceSettings(treatment="known", treatment_probability=cfg.arm_prob, seed=cfg.seed)


def run_replications(task: Callable[[int], Any], reps: int, workers: int = 1) -> List[Any]:
    """task(rep) for rep = 0..reps-1, results in replication order"""
    if workers == 1:
        return [task(rep) for rep in range(reps)]
    return Parallel(n_jobs=workers)(delayed(task)(rep) for rep in range(reps))


def _replicate(rep: int, cfg: SimConfig, estimator: Estimator, s1_grid: Sequence[float], h: float,
               kernel: KernelSpec, settings: NuisanceSettings) -> List[Dict[str, Any]]:
    d = simulate_trial(cfg, rep=rep)
    folds = make_folds(d.a, d.y, V=settings.folds, seed=cfg.seed, stream=(rep, FOLD_STREAM))
    rows = []
    for s1_star in s1_grid:
        spec = TargetSpec(s1_star=s1_star, contrast=ContrastKind.LOG_RELATIVE_RISK, kernel=kernel, bandwidth=h)
        row = {"rep": rep, "s1_star": float(s1_star), "estimate": np.nan, "se": np.nan,
               "ci_lower": np.nan, "ci_upper": np.nan, "failed": True}
        try:
            est = estimator(d, spec, folds, settings)
            if est.mode == EstimatorMode.CONTINUOUS_CV_TMLE:
                report = smoothed_contrast(est, ContrastKind.LOG_RELATIVE_RISK)
            else:
                report = contrast(est, ContrastKind.LOG_RELATIVE_RISK)
        except PrincipalTMLEError as exc:
            logger.warning("Replication %d failed at s1_star=%s: %s", rep, s1_star, exc)
            rows.append(row)
            continue
        if not report.identifiability_failure:
            row.update(estimate=report.estimate, se=report.std_error, ci_lower=report.ci_lower,
                       ci_upper=report.ci_upper, failed=False)
        rows.append(row)
    return rows


class _Replicate:
    """Picklable per-replication task"""

    def __init__(self, **kwargs: Any) -> None:
        self.kwargs = kwargs

    def __call__(self, rep: int) -> List[Dict[str, Any]]:
        return _replicate(rep, **self.kwargs)


def summarize(frame: pd.DataFrame, truths: Dict[float, float], smoothed_truths: Dict[float, float],
              h: float, n: int, reps: int) -> pd.DataFrame:
    """Aggregate per-replication rows into one line per stratum value"""
    lines = []
    for s1_star, group in frame.groupby("s1_star", sort=True):
        valid = group[~group["failed"]]
        truth, smoothed = truths[s1_star], smoothed_truths[s1_star]
        if valid.empty:
            stats = dict.fromkeys(["bias_truth", "bias_smoothed", "coverage_truth", "coverage_smoothed",
                                   "mean_se", "sampling_sd"], np.nan)
        else:
            estimates = valid["estimate"].to_numpy()
            lower, upper = valid["ci_lower"].to_numpy(), valid["ci_upper"].to_numpy()
            stats = {
                "bias_truth": float(estimates.mean() - truth),
                "bias_smoothed": float(estimates.mean() - smoothed),
                "coverage_truth": float(np.mean((lower <= truth) & (truth <= upper))),
                "coverage_smoothed": float(np.mean((lower <= smoothed) & (smoothed <= upper))),
                "mean_se": float(valid["se"].mean()),
                "sampling_sd": float(estimates.std(ddof=1)) if len(estimates) > 1 else np.nan,
            }
        lines.append({"s1_star": float(s1_star), "h": float(h), "n": n, "reps": reps, **stats,
                      "failures": int(group["failed"].sum())})
    return pd.DataFrame(lines, columns=COVERAGE_COLUMNS)


def coverage_experiment(cfg: SimConfig, estimator: Estimator = continuous_estimator,
                        s1_grid: Sequence[float] = (0.0, 0.3, 0.6), h: float = 0.2,
                        kernel: KernelSpec = KernelSpec(), reps: Optional[int] = None, workers: int = 1,
                        settings: Optional[NuisanceSettings] = None) -> pd.DataFrame:
    """
    Bias, interval coverage and standard errors of the log relative risk estimate
    against both the unsmoothed and the smoothed truth

    Replication r simulates with stream (r,) and folds with stream (r, 1) of
    cfg.seed, so results do not depend on the worker count. Replications in
    which the estimator raises or the contrast is not identified are counted
    as failures and excluded.

    Args:
        cfg: Simulation configuration
        estimator: (dataset, target, folds, settings) -> PsiEstimate
        s1_grid: Stratum values
        h: Bandwidth
        kernel: Kernel
        reps: Replications (default cfg.reps)
        workers: joblib worker processes
        settings: Nuisance settings (default: known randomization probability)

    Returns:
        One row per s1_star with the coverage columns
    """
    reps = cfg.reps if reps is None else reps
    if reps < MIN_REPS:
        logger.warning("Coverage with only %d replications is very noisy", reps)
    settings = settings or default_settings(cfg)
    truths = {float(s): true_log_relative_risk(true_psi(cfg, s)) for s in s1_grid}
    smoothed_truths = {float(s): true_log_relative_risk(true_psi(cfg, s, smoothed=(kernel, h))) for s in s1_grid}
    logger.info("Coverage experiment: n=%d, reps=%d, h=%.4g, s1_grid=%s, workers=%d",
                cfg.n, reps, h, list(s1_grid), workers)

    task = _Replicate(cfg=cfg, estimator=estimator, s1_grid=tuple(s1_grid), h=h, kernel=kernel, settings=settings)
    rows = [row for rep_rows in run_replications(task, reps, workers) for row in rep_rows]
    return summarize(pd.DataFrame(rows), truths, smoothed_truths, h, cfg.n, reps)


def coverage_by_bandwidth(cfg: SimConfig, h_grid: Sequence[float] = (0.02, 0.2, 0.8), s1_star: float = 0.6,
                          estimator: Estimator = continuous_estimator, kernel: KernelSpec = KernelSpec(),
                          reps: Optional[int] = None, workers: int = 1,
                          settings: Optional[NuisanceSettings] = None) -> pd.DataFrame:
    """Coverage at one stratum value across bandwidths, one row per h"""
    frames = [
        coverage_experiment(cfg, estimator, (s1_star,), h, kernel, reps=reps, workers=workers, settings=settings)
        for h in h_grid
    ]
    return pd.concat(frames, ignore_index=True)
