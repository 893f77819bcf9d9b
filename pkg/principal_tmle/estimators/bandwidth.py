"""
Bandwidth selection by least-squares cross-validation of the treated-arm biomarker density
"""
import logging
from typing import Tuple, Union

import numpy as np

from principal_tmle.core.kernels import CONVOLUTIONS, KERNELS
from principal_tmle.exceptions import DataValidationError
from principal_tmle.models import LSCV_DENSITY, Dataset, KernelFamily, KernelSpec

logger = logging.getLogger(__name__)

GRID_SIZE = 30
GRID_RANGE = (0.05, 5.0)
MIN_TREATED = 20
_BLOCK = 1024


def _pair_sums(x: np.ndarray, h: float, family: KernelFamily) -> Tuple[float, float]:
    """sum_{i != j} of (K*K)((x_i - x_j)/h) and of K((x_i - x_j)/h)"""
    kernel, convolution = KERNELS[family], CONVOLUTIONS[family]
    conv_total = 0.0
    kern_total = 0.0
    for start in range(0, len(x), _BLOCK):
        u = (x[start:start + _BLOCK, None] - x[None, :]) / h
        conv_total += float(np.sum(convolution(u)))
        kern_total += float(np.sum(kernel(u)))
    n = len(x)
    conv_total -= n * float(convolution(0.0))
    kern_total -= n * float(kernel(0.0))
    return conv_total, kern_total


def lscv_criterion(x: np.ndarray, h: float, kernel: KernelSpec = KernelSpec()) -> float:
    """
    Least-squares cross-validation score of a kernel density estimate

    int f-hat_h^2 - (2/n) sum_i f-hat_{h,-i}(x_i), using the exact self-convolution.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    conv_pairs, kern_pairs = _pair_sums(x, h, kernel.family)
    integral_sq = (n * float(CONVOLUTIONS[kernel.family](0.0)) + conv_pairs) / (n ** 2 * h)
    leave_one_out = kern_pairs / (n * (n - 1) * h)
    return integral_sq - 2.0 * leave_one_out


def bandwidth_grid(x: np.ndarray) -> np.ndarray:
    """Log grid of candidates around sigma-hat * n^(-1/5)"""
    base = float(np.std(x, ddof=1)) * len(x) ** (-0.2)
    return np.geomspace(GRID_RANGE[0] * base, GRID_RANGE[1] * base, GRID_SIZE)


def treated_biomarker(d: Dataset) -> np.ndarray:
    s = d.s[(d.a == 1) & (d.delta == 1)]
    return s[~np.isnan(s)]


def select_bandwidth(d: Dataset, method: Union[str, float] = LSCV_DENSITY,
                     kernel: KernelSpec = KernelSpec()) -> float:
    """
    Resolve the bandwidth

    Args:
        d: Dataset; the density of S among measured treated subjects drives selection
        method: 'lscv_density' or a fixed positive bandwidth
        kernel: Kernel family used in the criterion

    Returns:
        Positive bandwidth
    """
    if not isinstance(method, str):
        h = float(method)
        if h <= 0:
            raise ValueError(f"Bandwidth must be positive, got {h}")
        return h
    if method != LSCV_DENSITY:
        raise ValueError(f"Unknown bandwidth selector: {method}")

    x = treated_biomarker(d)
    if len(x) < MIN_TREATED:
        raise DataValidationError(f"Bandwidth selection needs at least {MIN_TREATED} treated biomarkers",
                                  [{"row": None, "field": "s", "rule": "bandwidth_sample_size",
                                    "count": int(len(x))}])
    if np.std(x) == 0:
        raise DataValidationError("Treated biomarker has zero variance",
                                  [{"row": None, "field": "s", "rule": "bandwidth_variance"}])
    grid = bandwidth_grid(x)
    scores = np.array([lscv_criterion(x, h, kernel) for h in grid])
    h = float(grid[int(np.argmin(scores))])
    logger.info("LSCV bandwidth %.5g selected from %d candidates (m=%d)", h, len(grid), len(x))
    return h
