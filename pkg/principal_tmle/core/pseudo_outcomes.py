"""
Pseudo-outcomes f_k whose arm-specific conditional means define the stratum parameters
"""
import logging
from typing import Optional

import numpy as np

from principal_tmle.core.kernels import kernel_eval
from principal_tmle.exceptions import DataValidationError
from principal_tmle.models import BiomarkerKind, Dataset, KernelSpec, Observation, TargetSpec

logger = logging.getLogger(__name__)

COMPONENTS = (1, 2, 3)
_ARMS = {1: 1, 2: 1, 3: 0}


def arm_of(k: int) -> int:
    """Treatment arm a_k whose regression carries component k"""
    try:
        return _ARMS[k]
    except KeyError:
        raise ValueError(f"Component must be 1, 2 or 3, got {k}") from None


def resolve_s1_star(d: Dataset, spec: TargetSpec) -> float:
    """Numeric code of the stratum value (labels are mapped through the dataset)"""
    return d.encode_biomarker(spec.s1_star)


def _smoothing(spec: TargetSpec) -> tuple:
    spec.require_smoothing()
    if not isinstance(spec.bandwidth, float):
        raise ValueError("Bandwidth must be resolved before evaluating smoothed pseudo-outcomes")
    return spec.kernel, spec.bandwidth


def _indicator(values: np.ndarray, s1_star: float, kind: BiomarkerKind,
               kernel: Optional[KernelSpec], h: Optional[float]) -> np.ndarray:
    if kind == BiomarkerKind.DISCRETE:
        return (values == s1_star).astype(float)
    return np.asarray(kernel_eval(kernel, h, values - s1_star), dtype=float)


def pseudo_outcome(o: Observation, k: int, spec: TargetSpec,
                   kind: BiomarkerKind = BiomarkerKind.DISCRETE) -> float:
    """
    Pseudo-outcome f_k (or its kernel version f_{k,h}) for one observation

    The caller must not request it for a subject outside phase two.
    """
    arm_of(k)
    if o.delta == 0:
        raise ValueError("Pseudo-outcome is undefined for a subject outside phase two")
    s1_star = float(spec.s1_star)
    kernel, h = _smoothing(spec) if kind == BiomarkerKind.CONTINUOUS else (None, None)
    if k in (1, 2):
        if o.s is None:
            raise DataValidationError("Biomarker missing for a measured subject",
                                      [{"row": None, "field": "s", "rule": "biomarker_present"}])
        value = float(_indicator(np.array([o.s]), s1_star, kind, kernel, h)[0])
        return value if k == 1 else value * float(o.y == 1)
    if o.y == 1:
        return 0.0
    if o.s_c is None:
        raise DataValidationError("Crossover biomarker missing for a measured subject",
                                  [{"row": None, "field": "s_c", "rule": "crossover_biomarker_present"}])
    return float(_indicator(np.array([o.s_c]), s1_star, kind, kernel, h)[0])


def pseudo_outcomes(d: Dataset, spec: TargetSpec, k: int, s1_star: Optional[float] = None) -> np.ndarray:
    """
    Vector of f_k over the dataset

    Entries outside arm a_k and outside phase two are set to 0; every
    formula that uses f_k multiplies those entries by zero.
    """
    a_k = arm_of(k)
    if s1_star is None:
        s1_star = resolve_s1_star(d, spec)
    kind = d.biomarker_kind
    kernel, h = _smoothing(spec) if kind == BiomarkerKind.CONTINUOUS else (None, None)

    relevant = (d.a == a_k) & (d.delta == 1)
    if k == 3:
        relevant &= d.y == 0
        values = d.s_c
        field = "s_c"
    else:
        values = d.s
        field = "s"
    missing = relevant & np.isnan(values)
    if np.any(missing):
        rows = np.flatnonzero(missing).tolist()
        raise DataValidationError(
            f"Column '{field}' is missing for {len(rows)} measured subjects",
            [{"row": i, "field": field, "rule": "biomarker_present"} for i in rows],
        )

    f = np.zeros(d.n)
    f[relevant] = _indicator(values[relevant], s1_star, kind, kernel, h)
    if k == 2:
        f *= d.y == 1
    return f


def pseudo_outcome_matrix(d: Dataset, spec: TargetSpec, s1_star: Optional[float] = None) -> np.ndarray:
    """n x 3 matrix of (f_1, f_2, f_3)"""
    return np.column_stack([pseudo_outcomes(d, spec, k, s1_star) for k in COMPONENTS])
