"""
Quadrature ground truth for the Gaussian-logistic trial
"""
import logging
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, stats

from principal_tmle.core.kernels import smooth_against_kernel, KERNELS, SUPPORT
from principal_tmle.exceptions import UnsupportedModeError
from principal_tmle.models import KernelSpec, SimConfig
from principal_tmle.simulation.dgp import outcome_probability

logger = logging.getLogger(__name__)

HERMITE_NODES = 64
QUAD_TOLERANCE = 1e-10


@lru_cache(maxsize=None)
def _hermite() -> Tuple[np.ndarray, np.ndarray]:
    return hermgauss(HERMITE_NODES)


def gaussian_expectation(func: Callable[[np.ndarray], np.ndarray], mean: float, var: float) -> float:
    """E[func(X)] for X ~ N(mean, var) by Gauss-Hermite"""
    nodes, weights = _hermite()
    return float(np.sum(weights * func(mean + np.sqrt(2.0 * var) * nodes)) / np.sqrt(np.pi))


def _moments(cfg: SimConfig) -> Tuple[float, float, float, float, float]:
    (mu_w, mu_s), cov = cfg.mu, np.asarray(cfg.cov)
    return mu_w, mu_s, cov[0, 0], cov[1, 1], cov[0, 1]


def require_closed_form(cfg: SimConfig) -> None:
    if cfg.crossover_rule != "exact":
        raise UnsupportedModeError("Closed-form truth is available for the exact crossover rule only")


def w_given_s(cfg: SimConfig, s: float) -> Tuple[float, float]:
    """Mean and variance of W | S_1 = s"""
    mu_w, mu_s, var_w, var_s, cov_ws = _moments(cfg)
    return mu_w + cov_ws / var_s * (s - mu_s), var_w - cov_ws ** 2 / var_s


def s_given_w(cfg: SimConfig, w: np.ndarray) -> Tuple[np.ndarray, float]:
    """Mean and variance of S_1 | W = w"""
    mu_w, mu_s, var_w, var_s, cov_ws = _moments(cfg)
    return mu_s + cov_ws / var_w * (np.asarray(w) - mu_w), var_s - cov_ws ** 2 / var_w


def biomarker_density(cfg: SimConfig, s: float) -> float:
    _, mu_s, _, var_s, _ = _moments(cfg)
    return float(stats.norm.pdf(s, loc=mu_s, scale=np.sqrt(var_s)))


def psi_at(cfg: SimConfig, s: float) -> np.ndarray:
    """
    Unsmoothed (Psi_1, Psi_2, Psi_3) at biomarker value s

    Psi_1 = f_S(s); Psi_2 = f_S(s) E[P(Y_1=1 | S_1=s, W) | S_1=s];
    Psi_3 = f_S(s) E[P(Y_0=0 | S_1=s, W) | S_1=s].
    """
    density = biomarker_density(cfg, s)
    mean, var = w_given_s(cfg, s)
    risk_treated = gaussian_expectation(lambda w: outcome_probability(cfg, 1.0, w, s), mean, var)
    risk_untreated = gaussian_expectation(lambda w: outcome_probability(cfg, 0.0, w, s), mean, var)
    return np.array([density, density * risk_treated, density * (1.0 - risk_untreated)])


def true_psi(cfg: SimConfig, s1_star: float, smoothed: Optional[Tuple[KernelSpec, float]] = None) -> np.ndarray:
    """
    True stratum parameters, unsmoothed or kernel-smoothed

    Args:
        cfg: Simulation configuration (exact crossover)
        s1_star: Stratum value
        smoothed: (kernel, h) for the smoothed parameter int Psi(s) K_h(s - s1_star) ds

    Returns:
        3-vector
    """
    require_closed_form(cfg)
    if smoothed is None:
        return psi_at(cfg, s1_star)
    kernel, h = smoothed
    return np.array([
        smooth_against_kernel(kernel, h, s1_star, lambda s, j=j: psi_at(cfg, s)[j], tol=QUAD_TOLERANCE)
        for j in range(3)
    ])


def smoothed_psi_by_covariate(cfg: SimConfig, s1_star: float, kernel: KernelSpec, h: float) -> np.ndarray:
    """
    Smoothed parameters as E[q_kh(W)], integrating over s inside and W outside

    Independent of true_psi's order of integration; both must agree.
    """
    require_closed_form(cfg)
    mu_w, _, var_w, _, _ = _moments(cfg)
    kernel_fn = KERNELS[kernel.family]
    half_width = SUPPORT[kernel.family] * h

    def q_kh(w: float) -> np.ndarray:
        mean, var = s_given_w(cfg, w)
        sd = np.sqrt(var)
        values = []
        for j in range(3):
            def integrand(s: float, j: int = j) -> float:
                weight = float(kernel_fn((s - s1_star) / h)) / h * stats.norm.pdf(s, loc=mean, scale=sd)
                if j == 1:
                    weight *= float(outcome_probability(cfg, 1.0, w, s))
                elif j == 2:
                    weight *= 1.0 - float(outcome_probability(cfg, 0.0, w, s))
                return weight
            value, _ = integrate.quad(integrand, s1_star - half_width, s1_star + half_width,
                                      epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE, limit=200)
            values.append(value)
        return np.array(values)

    nodes, weights = _hermite()
    points = mu_w + np.sqrt(2.0 * var_w) * nodes
    return sum(wt * q_kh(x) for wt, x in zip(weights, points)) / np.sqrt(np.pi)


def true_psi_discretized(cfg: SimConfig, threshold: float, s1_star: int) -> np.ndarray:
    """
    Truth when S is thresholded into {0: <= threshold, 1: > threshold}

    Psi_k is the integral of the unsmoothed Psi_k(s) over the category's region.
    """
    require_closed_form(cfg)
    if s1_star not in (0, 1):
        raise ValueError("Discretized stratum must be 0 or 1")
    lower, upper = (threshold, np.inf) if s1_star == 1 else (-np.inf, threshold)
    return np.array([
        integrate.quad(lambda s, j=j: psi_at(cfg, s)[j], lower, upper,
                       epsabs=QUAD_TOLERANCE, epsrel=QUAD_TOLERANCE, limit=200)[0]
        for j in range(3)
    ])


def true_treated_stratum_probability(cfg: SimConfig, threshold: float, w: np.ndarray) -> np.ndarray:
    """P(S_1 > threshold | W = w), the discretized q1 when s1_star = 1"""
    mean, var = s_given_w(cfg, w)
    return stats.norm.sf(threshold, loc=mean, scale=np.sqrt(var))


def true_log_relative_risk(psi: np.ndarray) -> float:
    return float(np.log(psi[1]) - np.log(psi[0] - psi[2]))
