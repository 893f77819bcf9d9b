"""
Cross-fitting fold assignment
"""
import warnings
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from principal_tmle.models import FoldPlan
from principal_tmle.utils.helpers import make_rng


def make_folds(a: np.ndarray, y: np.ndarray, V: int = 10, seed: int = 0,
               stream: Optional[Sequence[int]] = None) -> FoldPlan:
    """
    Seeded fold plan stratified by (A, Y)

    StratifiedKFold on the joint (A, Y) label keeps fold sizes within one of
    each other and spreads every stratum evenly. When no stratum has V members
    the plan falls back to a shuffled KFold.

    Args:
        a: Treatment arms
        y: Outcomes
        V: Number of folds
        seed: Root seed
        stream: Child stream of the seed (e.g. replication index)

    Returns:
        FoldPlan
    """
    a = np.asarray(a)
    y = np.asarray(y)
    n = len(a)
    if V < 1 or V > n:
        raise ValueError(f"Fold count must lie in 1..{n}, got {V}")
    if V == 1:
        return FoldPlan.single(n)

    _, a_code = np.unique(a, return_inverse=True)
    _, y_code = np.unique(y, return_inverse=True)
    label = a_code.reshape(-1) * (int(y_code.max()) + 1) + y_code.reshape(-1)
    random_state = int(make_rng(seed, *(stream or ())).integers(2 ** 31 - 1))
    if np.bincount(label).max() >= V:
        splitter = StratifiedKFold(n_splits=V, shuffle=True, random_state=random_state)
    else:
        splitter = KFold(n_splits=V, shuffle=True, random_state=random_state)

    assignment = np.empty(n, dtype=int)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The least populated class", category=UserWarning)
        for v, (_, validation) in enumerate(splitter.split(np.zeros((n, 1)), label)):
            assignment[validation] = v
    return FoldPlan(V=V, assignment=assignment)
