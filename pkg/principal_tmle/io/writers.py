"""
Result artifacts: JSON reports, CSV tables, influence rows and run manifests
"""
import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import joblib
import numpy as np
import pandas as pd
import pydantic
import scipy
import sklearn

from principal_tmle.models import ContrastReport, Dataset, PsiEstimate, RunConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _prepare(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Write a JSON document; floats keep their shortest round-trip representation"""
    path = _prepare(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")
    logger.debug("Wrote %s", path)
    return path


def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with 17 significant digits"""
    path = _prepare(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug("Wrote %s (%d rows)", path, len(frame))
    return path


def _labelled(codes: np.ndarray, labels: Tuple[str, ...]) -> pd.Series:
    """Category label of each biomarker code; missing codes stay missing"""
    return pd.Series(codes).map(lambda code: labels[int(code)] if pd.notna(code) else np.nan)


def dataset_frame(d: Dataset) -> pd.DataFrame:
    """
    Dataset as a table whose columns ingest_csv reads back

    Labelled biomarkers are written as their labels, so reading the table
    back recovers the same labels and codes.
    """
    names = d.covariate_names or tuple(f"w{j + 1}" for j in range(d.covariate_dim))
    frame = pd.DataFrame(np.asarray(d.w), columns=list(names))
    frame["a"] = d.a
    labels = d.biomarker_labels
    frame["s"] = _labelled(d.s, labels) if labels else d.s
    frame["y"] = d.y
    frame["s_c"] = _labelled(d.s_c, labels) if labels else d.s_c
    frame["delta"] = d.delta
    frame["pi"] = d.pi
    return frame


def write_dataset(d: Dataset, path: Union[str, Path]) -> Path:
    return write_table(dataset_frame(d), path)


def write_influence(est: PsiEstimate, path: Union[str, Path]) -> Path:
    """Per-subject influence rows (d1, d2, d3)"""
    frame = pd.DataFrame(np.asarray(est.influence_rows), columns=["d1", "d2", "d3"])
    frame.insert(0, "row", np.arange(est.n))
    return write_table(frame, path)


def report_payload(report: ContrastReport, est: PsiEstimate, seed: int) -> Dict[str, Any]:
    """JSON form of a contrast together with the estimate it summarizes"""
    return {
        "estimate": report.estimate,
        "se": report.std_error,
        "ci": [report.ci_lower, report.ci_upper],
        "kind": report.kind.value,
        "psi": est.psi,
        "sigma": est.sigma,
        "epsilons": est.epsilons,
        "gradient": report.gradient,
        "diagnostics": report.diagnostics.model_dump(),
        "identifiability_failure": report.identifiability_failure,
        "message": report.message,
        "bandwidth": report.bandwidth,
        "mode": est.mode.value,
        "n": est.n,
        "compatibility_violation_rate": est.compatibility_violation_rate,
        "notes": est.notes,
        "warnings": est.warnings,
        "seed": seed,
    }


def versions() -> Dict[str, str]:
    from principal_tmle import __version__

    return {
        "principal_tmle": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "joblib": joblib.__version__,
        "scikit-learn": sklearn.__version__,
    }


def write_manifest(cfg: RunConfig, command: str, path: Union[str, Path],
                   extra: Optional[Dict[str, Any]] = None) -> Path:
    """Configuration, seeds and library versions of a run"""
    payload = {
        "command": command,
        "config": cfg.model_dump(mode="json"),
        "seed": cfg.run.seed,
        "versions": versions(),
        **(extra or {}),
    }
    return write_json(payload, path)
