"""
Smoothing bias of the stratum parameters as the bandwidth shrinks
"""
import logging
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from principal_tmle.core.kernels import smooth_against_kernel
from principal_tmle.models import KernelSpec, SimConfig
from principal_tmle.simulation.truth import QUAD_TOLERANCE, psi_at, require_closed_form

logger = logging.getLogger(__name__)

DEFAULT_H_GRID = (0.4, 0.2, 0.1, 0.05)
# Below this every bias is treated as exactly zero
ZERO_BIAS = 1e-9

PsiCurve = Callable[[float], np.ndarray]


def _as_curve(dgp: Union[SimConfig, PsiCurve]) -> PsiCurve:
    if isinstance(dgp, SimConfig):
        require_closed_form(dgp)
        return lambda s: psi_at(dgp, s)
    if callable(dgp):
        return lambda s: np.asarray(dgp(s), dtype=float)
    raise TypeError("dgp must be a SimConfig or a callable s -> (Psi_1, Psi_2, Psi_3)")


def bias_decay_probe(dgp: Union[SimConfig, PsiCurve], kernel: KernelSpec = KernelSpec(),
                     s1_star: float = 0.6,
                     h_grid: Sequence[float] = DEFAULT_H_GRID) -> Tuple[Optional[float], pd.DataFrame]:
    """
    Log-log slope of ||Psi_h - Psi|| against h

    Args:
        dgp: Simulation config with a closed-form truth, or the map s -> Psi(s)
        kernel: Smoothing kernel
        s1_star: Stratum value
        h_grid: Bandwidths (at least two)

    Returns:
        (slope, table with columns h and bias_norm); slope is None when every
        bias vanishes
    """
    if len(h_grid) < 2:
        raise ValueError("h_grid needs at least two bandwidths")
    curve = _as_curve(dgp)
    psi = curve(s1_star)
    rows = []
    for h in h_grid:
        smoothed = np.array([
            smooth_against_kernel(kernel, h, s1_star, lambda s, j=j: float(curve(s)[j]), tol=QUAD_TOLERANCE)
            for j in range(3)
        ])
        rows.append({"h": float(h), "bias_norm": float(np.linalg.norm(smoothed - psi))})
    table = pd.DataFrame(rows, columns=["h", "bias_norm"])

    if (table["bias_norm"] <= ZERO_BIAS).all():
        logger.info("Smoothing bias vanishes on the whole grid")
        return None, table
    positive = table[table["bias_norm"] > ZERO_BIAS]
    if len(positive) < 2:
        return None, table
    fit = stats.linregress(np.log(positive["h"]), np.log(positive["bias_norm"]))
    logger.info("Bias decay slope %.4f (%s kernel, s1_star=%s)", fit.slope, kernel.family.value, s1_star)
    return float(fit.slope), table
