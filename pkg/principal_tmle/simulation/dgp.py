"""
Gaussian-logistic crossover trial
"""
import logging
from typing import Optional

import numpy as np

from principal_tmle.models import BiomarkerKind, Dataset, SimConfig
from principal_tmle.utils.helpers import bounded_expit, make_rng

logger = logging.getLogger(__name__)

SENTINEL = 0.0


def outcome_probability(cfg: SimConfig, a: np.ndarray, w: np.ndarray, s1: np.ndarray) -> np.ndarray:
    """P(Y_a = 1 | W, S_1) = expit(b0 + b1 a + b2 W + b3 S_1 + b4 a S_1)"""
    b0, b1, b2, b3, b4 = cfg.betas
    return bounded_expit(b0 + b1 * a + b2 * w + b3 * s1 + b4 * a * s1)


def simulate_trial(cfg: SimConfig, rep: Optional[int] = None) -> Dataset:
    """
    Draw one trial

    (W, S_1) is bivariate normal; both potential outcomes follow the logistic
    model; A is independent of everything. Untreated non-cases are crossed over
    and their biomarker S^c equals S_1 (plus independent noise in noisy mode,
    which is also added to S). Unused biomarker fields hold the sentinel 0.

    Args:
        cfg: Simulation configuration
        rep: Replication index; selects an independent child stream of cfg.seed

    Returns:
        Continuous-biomarker Dataset
    """
    rng = make_rng(cfg.seed) if rep is None else make_rng(cfg.seed, rep)
    n = cfg.n
    ws = rng.multivariate_normal(np.asarray(cfg.mu), np.asarray(cfg.cov), size=n)
    w, s1 = ws[:, 0], ws[:, 1]

    if cfg.fixed_margins:
        a = np.zeros(n, dtype=int)
        a[rng.permutation(n)[: int(round(n * cfg.arm_prob))]] = 1
    else:
        a = (rng.random(n) < cfg.arm_prob).astype(int)

    y1 = (rng.random(n) < outcome_probability(cfg, np.ones(n), w, s1)).astype(int)
    y0 = (rng.random(n) < outcome_probability(cfg, np.zeros(n), w, s1)).astype(int)
    y = np.where(a == 1, y1, y0)

    if cfg.crossover_rule == "noisy":
        s_observed = s1 + rng.normal(0.0, cfg.noise_sd, n)
        s_crossover = s1 + rng.normal(0.0, cfg.noise_sd, n)
    else:
        s_observed = s_crossover = s1

    s = np.where(a == 1, s_observed, SENTINEL)
    s_c = np.where((a == 0) & (y == 0), s_crossover, SENTINEL)
    logger.debug("Simulated trial: n=%d, rep=%s, treated=%d", n, rep, int(a.sum()))
    return Dataset(
        w=w.reshape(-1, 1), a=a, s=s, y=y, s_c=s_c,
        delta=np.ones(n, dtype=int), pi=np.ones(n),
        biomarker_kind=BiomarkerKind.CONTINUOUS, covariate_names=("w",),
    )


def discretize_biomarker(d: Dataset, threshold: float = 0.41) -> Dataset:
    """
    Threshold the biomarker into categories {0: <= threshold, 1: > threshold}

    Only fields that are read (S for treated, S^c for untreated non-cases) are
    mapped; unmeasured values stay missing and the rest keep the sentinel.
    """
    def code(values: np.ndarray, used: np.ndarray) -> np.ndarray:
        coded = np.where(values > threshold, 1.0, 0.0)
        coded = np.where(np.isnan(values), np.nan, coded)
        return np.where(used, coded, SENTINEL)

    s = code(d.s, d.a == 1)
    s_c = code(d.s_c, (d.a == 0) & (d.y == 0))
    return d.replace(s=s, s_c=s_c, biomarker_kind=BiomarkerKind.DISCRETE, biomarker_labels=None)
