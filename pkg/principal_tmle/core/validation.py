"""
Dataset invariant checks
"""
import logging
from typing import Any, Dict, List

import numpy as np

from principal_tmle.exceptions import DataValidationError
from principal_tmle.models import BiomarkerKind, Dataset

logger = logging.getLogger(__name__)


def _violation(row: Any, field: str, rule: str, message: str) -> Dict[str, Any]:
    return {"row": row, "field": field, "rule": rule, "message": message}


def _rows(mask: np.ndarray) -> List[int]:
    return np.flatnonzero(mask).tolist()


def validate_dataset(d: Dataset) -> List[Dict[str, Any]]:
    """
    Check every dataset invariant

    Args:
        d: Dataset to check

    Returns:
        One entry per violation, each naming the row (None for dataset-level
        findings), the offending field and the rule. Empty means valid.
    """
    violations: List[Dict[str, Any]] = []

    for name in ("a", "y", "delta"):
        column = getattr(d, name)
        for i in _rows((column != 0) & (column != 1)):
            violations.append(_violation(i, name, "binary", f"{name}={column[i]} is not 0/1"))

    bad_pi = ~np.isfinite(d.pi) | (d.pi <= 0) | (d.pi > 1)
    for i in _rows(bad_pi):
        violations.append(_violation(i, "pi", "sampling_positivity", f"pi={d.pi[i]} outside (0, 1]"))

    measured = d.delta == 1
    for i in _rows((d.a == 1) & measured & np.isnan(d.s)):
        violations.append(_violation(i, "s", "biomarker_present", "treated subject in phase two without s"))
    for i in _rows((d.a == 0) & (d.y == 0) & measured & np.isnan(d.s_c)):
        violations.append(_violation(i, "s_c", "crossover_biomarker_present",
                                     "untreated non-case in phase two without s_c"))

    untreated_case = (d.a == 0) & (d.y == 1)
    for i in _rows(untreated_case & (d.delta != 1)):
        violations.append(_violation(i, "delta", "untreated_case_measured",
                                     "untreated cases are always in phase two"))
    for i in _rows(untreated_case & (d.delta == 1) & (d.pi != 1)):
        violations.append(_violation(i, "pi", "structural_pi",
                                     "pi must be 1 where delta is structurally 1"))

    if not np.all(np.isfinite(d.w)):
        for i in _rows(~np.all(np.isfinite(d.w), axis=1)):
            violations.append(_violation(i, "w", "finite_covariates", "non-finite covariate"))

    if d.biomarker_kind == BiomarkerKind.DISCRETE:
        for name in ("s", "s_c"):
            column = getattr(d, name)
            present = ~np.isnan(column)
            fractional = present & (column != np.round(column))
            for i in _rows(fractional):
                violations.append(_violation(i, name, "discrete_biomarker",
                                             f"{name}={column[i]} is not a category code"))

    for arm in (0, 1):
        if not np.any(d.a == arm):
            violations.append(_violation(None, "a", "both_arms", f"no subject in arm {arm}"))

    if violations:
        logger.debug("Dataset has %d violations", len(violations))
    return violations


def require_valid(d: Dataset) -> Dataset:
    """Raise DataValidationError listing all violations, otherwise return d"""
    violations = validate_dataset(d)
    if violations:
        raise DataValidationError(f"Dataset has {len(violations)} invariant violations", violations)
    return d
