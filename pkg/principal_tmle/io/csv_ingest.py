"""
CSV ingestion into validated datasets
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from principal_tmle.core.validation import require_valid
from principal_tmle.exceptions import DataIngestionError
from principal_tmle.models import BiomarkerKind, Dataset

logger = logging.getLogger(__name__)

DEFAULT_COLUMNS = {"a": "a", "y": "y", "s": "s", "s_c": "s_c", "delta": "delta", "pi": "pi"}
MANDATORY = ("a", "y")
OPTIONAL_DEFAULTS = {"delta": 1, "pi": 1.0}


def _parse_float(value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return np.nan


def _to_numeric(values: pd.Series) -> pd.Series:
    """Exact decimal-to-double conversion; unparsable cells become NaN"""
    return values.map(_parse_float).astype(float)


def _problem(row: Optional[int], column: str, message: str) -> Dict[str, Any]:
    # row is the 0-based data row; line is the file line (header is line 1)
    return {"row": row, "line": None if row is None else row + 2, "column": column, "message": message}


def _binary_column(frame: pd.DataFrame, column: str, problems: List[Dict[str, Any]]) -> np.ndarray:
    values = _to_numeric(frame[column])
    bad = ~values.isin([0, 1])
    for row in np.flatnonzero(bad.to_numpy()):
        problems.append(_problem(int(row), column, f"expected 0 or 1, got {frame[column].iloc[row]!r}"))
    return values.fillna(-1).to_numpy().astype(int)


def _numeric_column(frame: pd.DataFrame, column: str, problems: List[Dict[str, Any]],
                    allow_missing: bool) -> np.ndarray:
    raw = frame[column]
    values = _to_numeric(raw)
    unparsable = values.isna() & raw.notna()
    if not allow_missing:
        unparsable |= raw.isna()
    for row in np.flatnonzero(unparsable.to_numpy()):
        problems.append(_problem(int(row), column, f"expected a number, got {raw.iloc[row]!r}"))
    return values.to_numpy(dtype=float)


def _biomarker_columns(frame: pd.DataFrame, s_col: Optional[str], s_c_col: Optional[str],
                       kind: BiomarkerKind, problems: List[Dict[str, Any]]) -> Tuple[np.ndarray, np.ndarray, Optional[Tuple[str, ...]]]:
    """Numeric biomarkers pass through; labelled categories are coded 0..K-1 in sorted order"""
    columns = [frame[c] if c is not None else pd.Series([np.nan] * len(frame)) for c in (s_col, s_c_col)]
    numeric = [_to_numeric(col) for col in columns]
    labelled = any((num.isna() & col.notna()).any() for num, col in zip(numeric, columns))
    if not labelled:
        return numeric[0].to_numpy(dtype=float), numeric[1].to_numpy(dtype=float), None
    if kind != BiomarkerKind.DISCRETE:
        for name, num, col in zip((s_col, s_c_col), numeric, columns):
            for row in np.flatnonzero((num.isna() & col.notna()).to_numpy()):
                problems.append(_problem(int(row), name, f"continuous biomarker must be numeric, got {col.iloc[row]!r}"))
        return numeric[0].to_numpy(dtype=float), numeric[1].to_numpy(dtype=float), None
    labels = tuple(sorted({str(v) for col in columns for v in col.dropna()}))
    codes = {label: float(i) for i, label in enumerate(labels)}
    coded = [col.map(lambda v: codes[str(v)] if pd.notna(v) else np.nan).to_numpy(dtype=float) for col in columns]
    return coded[0], coded[1], labels


def ingest_csv(path: str, column_map: Optional[Dict[str, str]] = None,
               covariates: Optional[Sequence[str]] = None,
               biomarker: BiomarkerKind = BiomarkerKind.DISCRETE) -> Dataset:
    """
    Read a trial CSV into a validated Dataset

    Args:
        path: CSV file with a header row
        column_map: Role -> column name for a, y, s, s_c, delta, pi
        covariates: Covariate columns (default: every column not mapped to a role)
        biomarker: How biomarker values are interpreted

    Returns:
        Dataset; delta and pi default to 1 when their columns are absent

    Raises:
        DataIngestionError: missing columns or malformed cells, with row and column
        DataValidationError: dataset-level invariants fail
    """
    if not Path(path).is_file():
        raise DataIngestionError(f"Input file not found: {path}", [_problem(None, "", "file not found")])
    columns = {**DEFAULT_COLUMNS, **(column_map or {})}
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataIngestionError(f"Failed to parse CSV file {path}: {exc}") from exc

    problems: List[Dict[str, Any]] = []
    for role in MANDATORY:
        if columns[role] not in frame.columns:
            problems.append(_problem(None, columns[role], f"mandatory column for '{role}' is missing"))
    role_columns = {columns[role] for role in columns}
    if covariates is None:
        covariates = [c for c in frame.columns if c not in role_columns]
    for name in covariates:
        if name not in frame.columns:
            problems.append(_problem(None, name, "covariate column is missing"))
    if not covariates:
        problems.append(_problem(None, "", "no covariate columns"))
    if problems:
        raise DataIngestionError(f"Missing columns in {path}", problems)

    a = _binary_column(frame, columns["a"], problems)
    y = _binary_column(frame, columns["y"], problems)
    w = np.column_stack([_numeric_column(frame, name, problems, allow_missing=False) for name in covariates])
    s_col = columns["s"] if columns["s"] in frame.columns else None
    s_c_col = columns["s_c"] if columns["s_c"] in frame.columns else None
    s, s_c, labels = _biomarker_columns(frame, s_col, s_c_col, biomarker, problems)

    n = len(frame)
    delta = np.full(n, OPTIONAL_DEFAULTS["delta"], dtype=int)
    pi = np.full(n, OPTIONAL_DEFAULTS["pi"])
    if columns["delta"] in frame.columns:
        delta = _binary_column(frame, columns["delta"], problems)
    pi_known = columns["pi"] in frame.columns
    if pi_known:
        pi = _numeric_column(frame, columns["pi"], problems, allow_missing=False)
        for row in np.flatnonzero(~np.isnan(pi) & ((pi <= 0) | (pi > 1))):
            problems.append(_problem(int(row), columns["pi"], f"sampling probability must lie in (0, 1], got {pi[row]}"))

    if problems:
        raise DataIngestionError(f"{len(problems)} malformed cell(s) in {path}", problems)

    d = Dataset(w=w, a=a, s=s, y=y, s_c=s_c, delta=delta, pi=pi, biomarker_kind=biomarker,
                pi_known=pi_known, covariate_names=tuple(covariates), biomarker_labels=labels)
    require_valid(d)
    logger.info("Ingested %s: n=%d, covariates=%d, two-phase=%s", Path(path).name, d.n, d.covariate_dim,
                d.is_two_phase)
    return d
