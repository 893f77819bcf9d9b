"""
Run configuration from flat SECTION__KEY files
"""
import logging
import os
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from principal_tmle.exceptions import ConfigError
from principal_tmle.models import RunConfig

logger = logging.getLogger(__name__)

SECTIONS = ("RUN", "DATA", "TARGET", "NUISANCE", "TWO_PHASE", "CONTINUOUS", "SIMULATION", "DIAGNOSE")
SEPARATOR = "__"
ENV_PREFIX = "PRINCIPAL_TMLE_"
# Environment defaults are honoured for these RUN keys only
ENV_KEYS = ("log_level", "workers")


def fold_flat_config(flat: Mapping[str, Optional[str]]) -> Dict[str, Dict[str, Any]]:
    """
    Fold SECTION__KEY entries into {section: {key: value}}

    Raises:
        ConfigError: malformed key or unknown section
    """
    nested: Dict[str, Dict[str, Any]] = {}
    for raw_key, value in flat.items():
        key = raw_key.strip().upper()
        section, separator, field = key.partition(SEPARATOR)
        if not separator or not field:
            raise ConfigError(f"Config key '{raw_key}' is not of the form SECTION__KEY", {"key": raw_key})
        if section not in SECTIONS:
            raise ConfigError(f"Unknown config section '{section}'", {"key": raw_key, "sections": list(SECTIONS)})
        if value is None or value == "":
            continue
        nested.setdefault(section.lower(), {})[field.lower()] = value
    return nested


def environment_defaults(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """RUN defaults from PRINCIPAL_TMLE_LOG_LEVEL and PRINCIPAL_TMLE_WORKERS"""
    environ = os.environ if environ is None else environ
    defaults = {}
    for key in ENV_KEYS:
        value = environ.get(f"{ENV_PREFIX}{key.upper()}")
        if value:
            defaults[key] = value
    return defaults


def load_run_config(path: Optional[str] = None,
                    overrides: Optional[Mapping[Tuple[str, str], Any]] = None,
                    use_env: bool = True) -> RunConfig:
    """
    Build a RunConfig from a config file, environment defaults and overrides

    Precedence (lowest first): model defaults, PRINCIPAL_TMLE_* environment,
    config file, overrides.

    Args:
        path: dotenv-syntax file of SECTION__KEY=value lines
        overrides: {(section, key): value}, typically from CLI flags
        use_env: Read .env and PRINCIPAL_TMLE_* variables

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: unknown section or key, or invalid value
    """
    nested: Dict[str, Dict[str, Any]] = {}
    if use_env:
        load_dotenv()
        env = environment_defaults()
        if env:
            nested["run"] = dict(env)
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"Config file not found: {path}", {"path": path})
        for section, values in fold_flat_config(dotenv_values(path)).items():
            nested.setdefault(section, {}).update(values)
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            nested.setdefault(section.lower(), {})[key.lower()] = value

    try:
        cfg = RunConfig.model_validate(nested)
    except ValidationError as exc:
        errors = [{"location": SEPARATOR.join(str(part).upper() for part in error["loc"]), "message": error["msg"]}
                  for error in exc.errors()]
        raise ConfigError("Invalid run configuration", {"errors": errors}) from exc
    logger.debug("Run configuration: %s", cfg.model_dump(mode="json"))
    return cfg
