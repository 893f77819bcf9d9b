"""
Shared data model operations: validation, kernels and pseudo-outcomes
"""
from .validation import validate_dataset, require_valid
from .kernels import kernel_convolution, kernel_eval, kernel_moments
from .pseudo_outcomes import (
    COMPONENTS, arm_of, pseudo_outcome, pseudo_outcome_matrix, pseudo_outcomes, resolve_s1_star,
)

__all__ = [
    "validate_dataset",
    "require_valid",
    "kernel_convolution",
    "kernel_eval",
    "kernel_moments",
    "COMPONENTS",
    "arm_of",
    "pseudo_outcome",
    "pseudo_outcome_matrix",
    "pseudo_outcomes",
    "resolve_s1_star",
]
