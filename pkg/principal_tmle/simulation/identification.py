"""
Numerical checks of identification and of the efficient influence function

All checks run by exact enumeration on DiscreteToyDistribution tables, except
identification_plugins which averages true conditional laws over simulated W.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from principal_tmle.models import Dataset, SimConfig
from principal_tmle.simulation.dgp import outcome_probability
from principal_tmle.simulation.toy import (
    SENTINEL_INDEX,
    DiscreteToyDistribution,
    eif_of_toy,
    observable_cells,
    psi4_of_toy,
    psi_of_toy,
    regressions_of_toy,
)
from principal_tmle.simulation.truth import s_given_w

logger = logging.getLogger(__name__)

DEFAULT_EPS_GRID = (1e-1, 1e-2, 1e-3)


class CounterfactualConstruction(BaseModel):
    """Either a compatible counterfactual law with its checks, or an infeasibility certificate"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    feasible: bool = Field(..., description="True when a compatible counterfactual law was built")
    psi4: float = Field(..., description="Exact Psi_4 of the observed law")
    table: Optional[np.ndarray] = Field(default=None, description="P(w, a, s1, y0, y1, s0c)")
    checks: Dict[str, float] = Field(default_factory=dict, description="Largest violation per check")
    witnesses: List[Tuple[int, int]] = Field(default_factory=list, description="(w, s) cells with excess crossover mass")

    def passed(self, tol: float = 1e-10) -> bool:
        return self.feasible and all(value <= tol for value in self.checks.values())


class PathwiseCheck(BaseModel):
    """Second-order defect of the first-order expansion along a submodel"""
    eps_grid: List[float]
    defects: List[float] = Field(..., description="max_k |Psi_k(P_eps) - Psi_k(P) - eps E[D_k h]|")
    ratios: List[float] = Field(..., description="defect / eps^2")

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)


class RemainderCheck(BaseModel):
    """Exact remainder of the first-order expansion of Psi(P_hat) around P"""
    enumerated: List[float] = Field(..., description="Psi(P_hat) - Psi(P) + E_P[D(P_hat)]")
    closed_form: List[float] = Field(..., description="sum_w p(w)(p(a|w)/p_hat(a|w) - 1)(Q - Q_hat)")


def _require_positivity(toy: DiscreteToyDistribution) -> None:
    p_aw = toy.p_aw()
    positive_w = toy.p_w() > 0
    if np.any(p_aw[positive_w] <= 0):
        raise ValueError("Both arms need positive mass at every covariate value with positive mass")


def _safe_divide(numerator: np.ndarray, denominator: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    return np.where(denominator > 0, numerator / np.where(denominator > 0, denominator, 1.0), fallback)


def observe(counterfactual: np.ndarray) -> np.ndarray:
    """
    Observed law implied by a counterfactual table

    A=1 reveals (S_1, Y_1); A=0 reveals Y_0 and, for non-cases, S_0^c. Unobserved
    fields take the sentinel index.
    """
    n_w, _, n_s = counterfactual.shape[:3]
    observed = np.zeros((n_w, 2, n_s, 2, n_s))
    for s1 in range(n_s):
        for y1 in (0, 1):
            observed[:, 1, s1, y1, SENTINEL_INDEX] += counterfactual[:, 1, s1, :, y1, :].sum(axis=(1, 2))
    observed[:, 0, SENTINEL_INDEX, 1, SENTINEL_INDEX] += counterfactual[:, 0, :, 1].sum(axis=(1, 2, 3))
    observed[:, 0, SENTINEL_INDEX, 0, :] += counterfactual[:, 0, :, 0].sum(axis=(1, 2))
    return observed


def _ignorability_violation(counterfactual: np.ndarray) -> float:
    p_aw = counterfactual.sum(axis=(2, 3, 4, 5))
    p_w = p_aw.sum(axis=1)
    p_rest_w = counterfactual.sum(axis=1)
    expected = (p_aw / np.where(p_w > 0, p_w, 1.0)[:, None])[:, :, None, None, None, None] * p_rest_w[:, None]
    return float(np.max(np.abs(counterfactual - expected)))


def _crossover_violation(counterfactual: np.ndarray) -> float:
    """max |P(S_1=s, Y_0=0 | w) - P(S_0^c=s, Y_0=0 | w)|"""
    joint = counterfactual.sum(axis=1)
    p_w = joint.sum(axis=(1, 2, 3, 4))
    s1_y0 = joint[:, :, 0, :, :].sum(axis=(2, 3))
    s0c_y0 = joint[:, :, 0, :, :].sum(axis=(1, 2))
    scale = np.where(p_w > 0, p_w, 1.0)[:, None]
    return float(np.max(np.abs(s1_y0 - s0c_y0) / scale))


def construct_compatible_counterfactual(toy: DiscreteToyDistribution) -> CounterfactualConstruction:
    """
    Build a counterfactual law that reproduces the observed law and satisfies
    consistency, randomization and the crossover condition

    p(y_1 | s_1, w)       = P(Y=y_1 | A=1, S=s_1, w)
    p(s_0^c | w)          = P(S^c=s_0^c | Y=0, A=0, w)
    p(s_1, y_0=0 | w)     = P(S^c=s_1, Y=0 | A=0, w)
    p(s_1, y_0=1 | w)     = P(S=s_1 | A=1, w) - P(S^c=s_1, Y=0 | A=0, w)
    p(a, w)               = P(a, w)

    The third and fourth lines are a law only when no cell has crossover mass
    in excess of the treated biomarker law; otherwise those cells are returned
    as witnesses and no table is built.
    """
    _require_positivity(toy)
    psi4, witnesses = psi4_of_toy(toy)
    if witnesses:
        logger.info("Observed law is incompatible with the crossover condition at %d cell(s)", len(witnesses))
        return CounterfactualConstruction(feasible=False, psi4=psi4, witnesses=witnesses)

    n_s = toy.n_s
    treated_law = toy.treated_biomarker_law()
    crossover = toy.crossover_law()
    no_case = crossover.sum(axis=1)
    uniform = np.full(n_s, 1.0 / n_s)

    treated_joint = toy.conditional(1)[:, :, :, SENTINEL_INDEX]
    p_y1 = _safe_divide(treated_joint, treated_law[:, :, None], np.full_like(treated_joint, 0.5))
    p_s0c = _safe_divide(crossover, no_case[:, None], np.broadcast_to(uniform, crossover.shape))
    p_s1_y0 = np.stack([crossover, np.clip(treated_law - crossover, 0.0, None)], axis=2)

    counterfactual = (toy.p_aw()[:, :, None, None, None, None]
                      * p_s1_y0[:, None, :, :, None, None]
                      * p_y1[:, None, :, None, :, None]
                      * p_s0c[:, None, None, None, None, :])

    conditional_mass = p_s1_y0.sum(axis=(1, 2))
    has_mass = toy.p_w() > 0
    checks = {
        "nonnegativity": float(max(0.0, -np.min(treated_law - crossover))),
        "normalization": float(max(
            abs(counterfactual.sum() - 1.0),
            np.max(np.abs(conditional_mass[has_mass] - 1.0)) if np.any(has_mass) else 0.0,
        )),
        "consistency_margins": float(np.max(np.abs(observe(counterfactual) - toy.table))),
        "ignorability": _ignorability_violation(counterfactual),
        "crossover_equality": _crossover_violation(counterfactual),
    }
    logger.debug("Counterfactual construction checks: %s", checks)
    return CounterfactualConstruction(feasible=True, psi4=psi4, table=counterfactual, checks=checks)


def _check_direction(toy: DiscreteToyDistribution, direction: np.ndarray, eps_grid: Sequence[float]) -> np.ndarray:
    direction = np.asarray(direction, dtype=float)
    if direction.shape != toy.table.shape:
        raise ValueError(f"direction must have shape {toy.table.shape}")
    if not np.all(np.isfinite(direction)):
        raise ValueError("direction must be finite")
    if not eps_grid or any(eps <= 0 for eps in eps_grid):
        raise ValueError("eps_grid must hold positive values")
    if abs(float(np.sum(toy.table * direction))) > 1e-12:
        raise ValueError("direction must have mean zero under the observed law")
    sup = float(np.max(np.abs(direction[toy.table > 0]))) if np.any(toy.table > 0) else 0.0
    if sup * max(eps_grid) >= 1.0:
        raise ValueError("direction too large for eps_grid: the perturbed law would be negative")
    return direction


def pathwise_derivative_check(toy: DiscreteToyDistribution, direction: np.ndarray,
                              eps_grid: Sequence[float] = DEFAULT_EPS_GRID, s_index: int = 1) -> PathwiseCheck:
    """
    Compare Psi along dP_eps = (1 + eps h) dP with its first-order expansion

    Args:
        toy: Observed law
        direction: Bounded mean-zero score h, one value per table cell
        eps_grid: Positive step sizes
        s_index: Stratum index into the biomarker support

    Returns:
        PathwiseCheck with defects and defect / eps^2 per step
    """
    _require_positivity(toy)
    direction = _check_direction(toy, direction, eps_grid)
    psi = psi_of_toy(toy, s_index)
    eif = eif_of_toy(toy, s_index)
    derivative = np.array([np.sum(toy.table * eif[j] * direction) for j in range(3)])

    defects, ratios = [], []
    for eps in eps_grid:
        moved = psi_of_toy(toy.perturbed(direction, eps), s_index)
        defect = float(np.max(np.abs(moved - psi - eps * derivative)))
        defects.append(defect)
        ratios.append(defect / eps ** 2)
    logger.debug("Pathwise defects %s over eps %s", defects, list(eps_grid))
    return PathwiseCheck(eps_grid=[float(e) for e in eps_grid], defects=defects, ratios=ratios)


def random_score(rng: np.random.Generator, toy: DiscreteToyDistribution,
                 known_treatment: bool = False) -> np.ndarray:
    """
    Random bounded mean-zero direction on the observable cells

    With known_treatment=True the A|W component is projected out, so the
    submodel leaves P(A|W) unchanged.
    """
    direction = rng.uniform(-1.0, 1.0, toy.table.shape) * observable_cells(toy.n_w, toy.n_s)
    if known_treatment:
        p_aw = toy.p_aw()
        p_w = toy.p_w()
        given_aw = (toy.table * direction).sum(axis=(2, 3, 4)) / np.where(p_aw > 0, p_aw, 1.0)
        given_w = (toy.table * direction).sum(axis=(1, 2, 3, 4)) / np.where(p_w > 0, p_w, 1.0)
        direction = direction - given_aw[:, :, None, None, None] + given_w[:, None, None, None, None]
        direction *= observable_cells(toy.n_w, toy.n_s)
    direction = (direction - np.sum(toy.table * direction)) * observable_cells(toy.n_w, toy.n_s)
    return direction / max(1.0, float(np.max(np.abs(direction))))


def remainder(toy: DiscreteToyDistribution, toy_hat: DiscreteToyDistribution, s_index: int = 1) -> RemainderCheck:
    """
    Exact remainder Rem(P, P_hat) = Psi(P_hat) - Psi(P) + E_P[D(P_hat)]

    Vanishes when P_hat(A|W) = P(A|W).
    """
    if toy.table.shape != toy_hat.table.shape:
        raise ValueError("Both laws must share their supports")
    _require_positivity(toy_hat)
    psi, psi_hat = psi_of_toy(toy, s_index), psi_of_toy(toy_hat, s_index)
    eif_hat = eif_of_toy(toy_hat, s_index)
    enumerated = psi_hat - psi + np.array([np.sum(toy.table * eif_hat[j]) for j in range(3)])

    q, q_hat = regressions_of_toy(toy, s_index), regressions_of_toy(toy_hat, s_index)
    p_a, p_a_hat = toy.p_a_given_w(), toy_hat.p_a_given_w()
    closed = np.array([
        np.sum(toy.p_w() * (p_a[:, arm] / p_a_hat[:, arm] - 1.0) * (q[j] - q_hat[j]))
        for j, arm in enumerate((1, 1, 0))
    ])
    return RemainderCheck(enumerated=enumerated.tolist(), closed_form=closed.tolist())


def identification_plugins(d: Dataset, cfg: SimConfig, s1_star: float) -> Dict[str, List[float]]:
    """
    Monte Carlo versions of the identifying formulas using the true conditional laws

    Psi_1 = E[p(S=s | A=1, W)]
    Psi_2 = E[p(S=s | A=1, W) P(Y=1 | A=1, S=s, W)]
    Psi_3 = E[p(S^c=s, Y=0 | A=0, W)]

    averaged over the simulated W.

    Returns:
        {"psi": 3 means, "se": 3 Monte Carlo standard errors}
    """
    w = d.w[:, 0]
    mean, var = s_given_w(cfg, w)
    density = stats.norm.pdf(s1_star, loc=mean, scale=np.sqrt(var))
    s = np.full_like(w, s1_star)
    terms = np.column_stack([
        density,
        density * outcome_probability(cfg, np.ones_like(w), w, s),
        density * (1.0 - outcome_probability(cfg, np.zeros_like(w), w, s)),
    ])
    se = terms.std(axis=0, ddof=1) / np.sqrt(d.n)
    return {"psi": terms.mean(axis=0).tolist(), "se": se.tolist()}
