"""
Utility functions shared by the estimators
"""
import logging
import sys
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

PACKAGE_LOGGER = "principal_tmle"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = "INFO") -> logging.Logger:
    """
    Route package logs to stderr

    Args:
        level: Logging level name

    Returns:
        The package logger
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level.upper())
    if not any(getattr(h, "_principal_tmle", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._principal_tmle = True
        logger.addHandler(handler)
    return logger


def bounded_expit(x: np.ndarray, bound: float = 30.0) -> np.ndarray:
    """Inverse logit of a linear predictor clipped at +/- bound"""
    return expit(np.clip(x, -bound, bound))


def empirical_covariance(rows: np.ndarray) -> np.ndarray:
    """
    Centered empirical covariance with divisor n

    Args:
        rows: n x d matrix of influence-function evaluations

    Returns:
        Symmetric d x d covariance matrix
    """
    rows = np.asarray(rows, dtype=float)
    centered = rows - rows.mean(axis=0)
    sigma = centered.T @ centered / rows.shape[0]
    return (sigma + sigma.T) / 2.0


def seed_sequence(seed: int, stream: Optional[Sequence[int]] = None) -> np.random.SeedSequence:
    """Seed sequence for the root seed or one of its independent child streams"""
    if stream is None:
        return np.random.SeedSequence(seed)
    return np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Random generator for (seed, stream...) - identical inputs give identical draws"""
    return np.random.default_rng(seed_sequence(seed, stream if stream else None))


def as_2d(x: np.ndarray) -> np.ndarray:
    """Covariates as an n x p float matrix"""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x
