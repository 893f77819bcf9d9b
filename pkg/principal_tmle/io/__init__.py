"""
Ingestion, configuration and artifact writing
"""
from .config_loader import fold_flat_config, load_run_config
from .csv_ingest import ingest_csv
from .writers import (
    dataset_frame,
    report_payload,
    write_dataset,
    write_influence,
    write_json,
    write_manifest,
    write_table,
)

__all__ = [
    "fold_flat_config",
    "load_run_config",
    "ingest_csv",
    "dataset_frame",
    "report_payload",
    "write_dataset",
    "write_influence",
    "write_json",
    "write_manifest",
    "write_table",
]
