"""
Smoothing kernels for continuous biomarkers

All kernels integrate to one. Each family also provides its exact
self-convolution, which least-squares cross-validation needs.
"""
from typing import Callable, Dict, List, Union

import numpy as np
from scipy import integrate, stats

from principal_tmle.models import KernelFamily, KernelSpec

ArrayLike = Union[float, np.ndarray]


def _uniform(u: ArrayLike) -> ArrayLike:
    return np.where(np.abs(u) <= 0.5, 1.0, 0.0)


def _gaussian(u: ArrayLike) -> ArrayLike:
    return stats.norm.pdf(u)


def _gaussian4(u: ArrayLike) -> ArrayLike:
    u = np.asarray(u, dtype=float)
    return 0.5 * (3.0 - u ** 2) * stats.norm.pdf(u)


def _uniform_convolution(u: ArrayLike) -> ArrayLike:
    return np.clip(1.0 - np.abs(u), 0.0, None)


def _gaussian_convolution(u: ArrayLike) -> ArrayLike:
    return stats.norm.pdf(u, scale=np.sqrt(2.0))


def _gaussian4_convolution(u: ArrayLike) -> ArrayLike:
    u = np.asarray(u, dtype=float)
    return stats.norm.pdf(u, scale=np.sqrt(2.0)) * (27.0 / 16.0 - 7.0 * u ** 2 / 16.0 + u ** 4 / 64.0)


KERNELS: Dict[KernelFamily, Callable[[ArrayLike], ArrayLike]] = {
    KernelFamily.UNIFORM: _uniform,
    KernelFamily.GAUSSIAN: _gaussian,
    KernelFamily.GAUSSIAN4: _gaussian4,
}

CONVOLUTIONS: Dict[KernelFamily, Callable[[ArrayLike], ArrayLike]] = {
    KernelFamily.UNIFORM: _uniform_convolution,
    KernelFamily.GAUSSIAN: _gaussian_convolution,
    KernelFamily.GAUSSIAN4: _gaussian4_convolution,
}

# Integration half-width in units of h
SUPPORT = {
    KernelFamily.UNIFORM: 0.5,
    KernelFamily.GAUSSIAN: 8.0,
    KernelFamily.GAUSSIAN4: 8.0,
}


def _check_bandwidth(h: float) -> float:
    h = float(h)
    if not h > 0:
        raise ValueError(f"Bandwidth must be positive, got {h}")
    return h


def kernel_eval(spec: KernelSpec, h: float, x: ArrayLike) -> ArrayLike:
    """
    Scaled kernel K_h(x) = K(x / h) / h

    Args:
        spec: Kernel family
        h: Bandwidth (> 0)
        x: Point(s) of evaluation

    Returns:
        Kernel value(s), same shape as x
    """
    h = _check_bandwidth(h)
    values = KERNELS[spec.family](np.asarray(x, dtype=float) / h) / h
    return float(values) if np.ndim(values) == 0 else values


def kernel_convolution(spec: KernelSpec, h: float, x: ArrayLike) -> ArrayLike:
    """(K_h * K_h)(x)"""
    h = _check_bandwidth(h)
    return CONVOLUTIONS[spec.family](np.asarray(x, dtype=float) / h) / h


def kernel_moments(spec: KernelSpec, max_power: int = 4) -> List[float]:
    """Moments int u^t K(u) du for t = 0..max_power by adaptive quadrature"""
    kernel = KERNELS[spec.family]
    half_width = SUPPORT[spec.family]
    moments = []
    for t in range(max_power + 1):
        value, _ = integrate.quad(lambda u: u ** t * float(kernel(u)), -half_width, half_width,
                                  epsabs=1e-12, epsrel=1e-12, limit=200)
        moments.append(value)
    return moments


def smooth_against_kernel(spec: KernelSpec, h: float, s1_star: float,
                          func: Callable[[float], float], tol: float = 1e-10) -> float:
    """int func(s) K_h(s - s1_star) ds over the kernel's effective support"""
    h = _check_bandwidth(h)
    half_width = SUPPORT[spec.family] * h
    kernel = KERNELS[spec.family]
    value, _ = integrate.quad(
        lambda s: func(s) * float(kernel((s - s1_star) / h)) / h,
        s1_star - half_width, s1_star + half_width,
        epsabs=tol, epsrel=tol, limit=200,
    )
    return value
