"""
Finite observed-data distributions, enumerated exactly

A table has axes (w, a, s, y, s_c). Fields that are not observed for a cell
(S for untreated subjects, S^c for treated subjects and untreated cases) sit at
the sentinel index 0.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from principal_tmle.models import BiomarkerKind, Dataset
from principal_tmle.nuisance.regressions import biomarker_support

logger = logging.getLogger(__name__)

SENTINEL_INDEX = 0
MASS_TOLERANCE = 1e-10


class DiscreteToyDistribution(BaseModel):
    """Joint probability table of the observed data on finite supports"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w_support: Tuple[float, ...] = Field(..., description="Values of W")
    s_support: Tuple[float, ...] = Field(..., description="Values of S and S^c")
    table: np.ndarray = Field(..., description="P(w, a, s, y, s_c)")

    @field_validator("table", mode="before")
    @classmethod
    def _table(cls, value) -> np.ndarray:
        table = np.array(value, dtype=float, copy=True)
        table.setflags(write=False)
        return table

    @model_validator(mode="after")
    def _law(self) -> "DiscreteToyDistribution":
        n_w, n_s = len(self.w_support), len(self.s_support)
        if self.table.shape != (n_w, 2, n_s, 2, n_s):
            raise ValueError(f"table must have shape {(n_w, 2, n_s, 2, n_s)}, got {self.table.shape}")
        if np.any(self.table < 0):
            raise ValueError("table must be nonnegative")
        if abs(self.table.sum() - 1.0) > MASS_TOLERANCE:
            raise ValueError("table must sum to one")
        allowed = observable_cells(n_w, n_s)
        if np.any(self.table[~allowed] > 0):
            raise ValueError("table puts mass on cells that cannot be observed")
        return self

    @property
    def n_w(self) -> int:
        return len(self.w_support)

    @property
    def n_s(self) -> int:
        return len(self.s_support)

    def p_w(self) -> np.ndarray:
        return self.table.sum(axis=(1, 2, 3, 4))

    def p_aw(self) -> np.ndarray:
        """P(a, w) as an n_w x 2 array"""
        return self.table.sum(axis=(2, 3, 4))

    def p_a_given_w(self) -> np.ndarray:
        p_aw = self.p_aw()
        return p_aw / p_aw.sum(axis=1, keepdims=True)

    def conditional(self, a: int) -> np.ndarray:
        """P(s, y, s_c | a, w) as n_w x n_s x 2 x n_s"""
        joint = self.table[:, a]
        return joint / self.p_aw()[:, a][:, None, None, None]

    def treated_biomarker_law(self) -> np.ndarray:
        """P(S=s | A=1, w), n_w x n_s"""
        return self.conditional(1).sum(axis=(2, 3))

    def crossover_law(self) -> np.ndarray:
        """P(S^c=s, Y=0 | A=0, w), n_w x n_s"""
        return self.conditional(0)[:, SENTINEL_INDEX, 0, :]

    def perturbed(self, direction: np.ndarray, eps: float) -> "DiscreteToyDistribution":
        return self.model_copy(update={"table": _frozen(self.table * (1.0 + eps * direction))})


def _frozen(table: np.ndarray) -> np.ndarray:
    table = np.array(table, dtype=float)
    table.setflags(write=False)
    return table


def observable_cells(n_w: int, n_s: int) -> np.ndarray:
    """Boolean mask of (w, a, s, y, s_c) cells consistent with the observation map"""
    mask = np.zeros((n_w, 2, n_s, 2, n_s), dtype=bool)
    mask[:, 1, :, :, SENTINEL_INDEX] = True
    mask[:, 0, SENTINEL_INDEX, 0, :] = True
    mask[:, 0, SENTINEL_INDEX, 1, SENTINEL_INDEX] = True
    return mask


def pseudo_outcome_cells(n_w: int, n_s: int, s_index: int) -> np.ndarray:
    """f_k at every cell, shape (3, n_w, 2, n_s, 2, n_s)"""
    f = np.zeros((3, n_w, 2, n_s, 2, n_s))
    f[0, :, 1, s_index, :, :] = 1.0
    f[1, :, 1, s_index, 1, :] = 1.0
    f[2, :, 0, :, 0, s_index] = 1.0
    return f


def regressions_of_toy(toy: DiscreteToyDistribution, s_index: int) -> np.ndarray:
    """Q_k(w) = E[f_k | a_k, w], shape (3, n_w)"""
    treated, untreated = toy.conditional(1), toy.conditional(0)
    return np.stack([
        treated[:, s_index].sum(axis=(1, 2)),
        treated[:, s_index, 1].sum(axis=1),
        untreated[:, :, 0, s_index].sum(axis=1),
    ])


def psi_of_toy(toy: DiscreteToyDistribution, s_index: int) -> np.ndarray:
    """(Psi_1, Psi_2, Psi_3) of the toy by enumeration"""
    return regressions_of_toy(toy, s_index) @ toy.p_w()


def eif_of_toy(toy: DiscreteToyDistribution, s_index: int) -> np.ndarray:
    """Efficient influence function D_k at every cell, shape (3, n_w, 2, n_s, 2, n_s)"""
    f = pseudo_outcome_cells(toy.n_w, toy.n_s, s_index)
    q = regressions_of_toy(toy, s_index)
    psi = q @ toy.p_w()
    p_a = toy.p_a_given_w()
    d = np.zeros_like(f)
    for j, a_k in enumerate((1, 1, 0)):
        q_cells = q[j][:, None, None, None, None]
        clever = np.zeros((toy.n_w, 2, 1, 1, 1))
        clever[:, a_k] = (1.0 / p_a[:, a_k])[:, None, None, None]
        d[j] = clever * (f[j] - q_cells) + q_cells - psi[j]
    return d


def psi4_of_toy(toy: DiscreteToyDistribution) -> Tuple[float, List[Tuple[int, int]]]:
    """
    Exact Psi_4 and its witness cells

    A witness is any (w, s) with positive W-mass where the crossover law exceeds
    the treated biomarker law by more than 1e-12.
    """
    treated = toy.treated_biomarker_law()
    crossover = toy.crossover_law()
    excess = crossover - treated
    psi4 = float(toy.p_w() @ np.sum(np.clip(excess, 0.0, None) * treated, axis=1))
    has_mass = toy.p_w() > 0
    witnesses = [(int(w), int(s)) for w, s in zip(*np.nonzero(excess > 1e-12)) if has_mass[w]]
    return psi4, witnesses


def _dirichlet(rng: np.random.Generator, size: int, count: Optional[int] = None) -> np.ndarray:
    return rng.dirichlet(np.ones(size), size=count)


def random_toy(rng: np.random.Generator, n_w: int = 2, n_s: int = 2, feasible: bool = True) -> Tuple[
        DiscreteToyDistribution, Optional[Tuple[int, int]]]:
    """
    Random observed law generated from a counterfactual with S_0^c = S_1

    With feasible=False one (w, s) cell is then altered so that the crossover
    law exceeds the treated law there; that cell is returned as well.

    Returns:
        (toy, engineered witness or None)
    """
    p_w = _dirichlet(rng, n_w)
    p_a = rng.uniform(0.2, 0.8, n_w)
    p_s1 = _dirichlet(rng, n_s, n_w)
    p_y1 = rng.uniform(0.05, 0.95, (n_w, n_s))
    p_y0 = rng.uniform(0.05, 0.95, (n_w, n_s))

    table = np.zeros((n_w, 2, n_s, 2, n_s))
    for w in range(n_w):
        for s in range(n_s):
            treated = p_w[w] * p_a[w] * p_s1[w, s]
            table[w, 1, s, 1, 0] += treated * p_y1[w, s]
            table[w, 1, s, 0, 0] += treated * (1.0 - p_y1[w, s])
            untreated = p_w[w] * (1.0 - p_a[w]) * p_s1[w, s]
            table[w, 0, 0, 1, 0] += untreated * p_y0[w, s]
            table[w, 0, 0, 0, s] += untreated * (1.0 - p_y0[w, s])

    witness = None
    if not feasible:
        w_star, s_star = int(rng.integers(n_w)), int(rng.integers(n_s))
        treated_prob = p_s1[w_star, s_star]
        target = min(1.0, treated_prob + 0.5 * (1.0 - treated_prob) + 1e-3)
        mass = p_w[w_star] * (1.0 - p_a[w_star])
        table[w_star, 0] = 0.0
        table[w_star, 0, 0, 0, s_star] = mass * target
        table[w_star, 0, 0, 1, 0] = mass * (1.0 - target)
        witness = (w_star, s_star)

    table /= table.sum()
    toy = DiscreteToyDistribution(w_support=tuple(float(i) for i in range(n_w)),
                                  s_support=tuple(float(i) for i in range(n_s)), table=table)
    return toy, witness


def empirical_toy(d: Dataset, w_bins: int = 4, weights: Optional[np.ndarray] = None) -> DiscreteToyDistribution:
    """
    Tabulate a discrete dataset

    The first covariate is coarsened into quantile bins; biomarker codes index
    the support. Optional weights (e.g. Delta / pi-bar) replace unit counts.
    """
    if d.biomarker_kind != BiomarkerKind.DISCRETE:
        raise ValueError("empirical_toy needs a discrete biomarker")
    weights = np.ones(d.n) if weights is None else np.asarray(weights, dtype=float)
    edges = np.unique(np.quantile(d.w[:, 0], np.linspace(0, 1, w_bins + 1)[1:-1]))
    w_index = np.searchsorted(edges, d.w[:, 0], side="right")
    n_w = len(edges) + 1
    support = biomarker_support(d)
    n_s = len(support)
    lookup = {value: index for index, value in enumerate(support)}

    table = np.zeros((n_w, 2, n_s, 2, n_s))
    for i in np.flatnonzero(weights > 0):
        a, y = int(d.a[i]), int(d.y[i])
        s = lookup[float(d.s[i])] if a == 1 else SENTINEL_INDEX
        s_c = lookup[float(d.s_c[i])] if (a == 0 and y == 0) else SENTINEL_INDEX
        table[w_index[i], a, s, y, s_c] += weights[i]
    table /= table.sum()
    w_support = tuple(float(np.median(d.w[w_index == b, 0])) if np.any(w_index == b) else float("nan")
                      for b in range(n_w))
    return DiscreteToyDistribution(w_support=w_support, s_support=support, table=table)
