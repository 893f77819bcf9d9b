"""
Phase-two subsampling designs
"""
import logging
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from principal_tmle.exceptions import ConfigError
from principal_tmle.models import Dataset
from principal_tmle.utils.helpers import make_rng

logger = logging.getLogger(__name__)

DESIGNS = ("case_cohort", "stratified")
# Child stream distinct from simulate_trial's (rep,) streams
SUBSAMPLE_STREAM = (0, 2)


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"Sampling probability must lie in (0, 1], got {p}")
    return p


def sampling_probabilities(d: Dataset, design: str,
                           p: Union[float, Dict[Tuple[int, int], float]]) -> np.ndarray:
    """
    Design probabilities pi_i

    case_cohort(p): cases are always sampled, non-cases with probability p.
    stratified(p): p maps each (a, y) cell to its probability; untreated cases
    are always sampled.
    """
    if design == "case_cohort":
        p = _check_probability(p)
        return np.where(d.y == 1, 1.0, p)
    if design == "stratified":
        if not isinstance(p, dict):
            raise ConfigError("Stratified design needs a probability per (a, y) cell")
        pi = np.empty(d.n)
        for arm in (0, 1):
            for outcome in (0, 1):
                cell = (d.a == arm) & (d.y == outcome)
                if arm == 0 and outcome == 1:
                    pi[cell] = 1.0
                elif np.any(cell):
                    if (arm, outcome) not in p:
                        raise ConfigError(f"No sampling probability for cell a={arm}, y={outcome}")
                    pi[cell] = _check_probability(p[(arm, outcome)])
        return pi
    raise ConfigError(f"Unknown sampling design: {design}", {"supported": DESIGNS})


def two_phase_subsample(d: Dataset, design: str = "case_cohort",
                        p: Union[float, Dict[Tuple[int, int], float]] = 0.25, seed: int = 0,
                        stream: Optional[Sequence[int]] = None) -> Dataset:
    """
    Draw phase-two indicators given the phase-one data

    Delta_i ~ Bernoulli(pi_i) independently; biomarkers of unsampled subjects
    are set missing and pi holds the exact design probabilities.
    """
    pi = sampling_probabilities(d, design, p)
    rng = make_rng(seed, *(stream if stream is not None else SUBSAMPLE_STREAM))
    delta = (rng.random(d.n) < pi).astype(int)
    delta[pi == 1.0] = 1
    unsampled = delta == 0
    s = np.where(unsampled & (d.a == 1), np.nan, d.s)
    s_c = np.where(unsampled & (d.a == 0) & (d.y == 0), np.nan, d.s_c)
    logger.debug("Subsampled %d of %d subjects (%s)", int(delta.sum()), d.n, design)
    return d.replace(delta=delta, pi=pi, s=s, s_c=s_c, pi_known=True)
