"""
Structured error hierarchy for the estimation package

Every error carries a machine-readable payload so the CLI can emit it as JSON.
"""
from typing import Any, Dict, List, Optional


class PrincipalTMLEError(Exception):
    """Base class for all package errors"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def payload(self) -> Dict[str, Any]:
        """Machine-readable representation of the error"""
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }


class DataValidationError(PrincipalTMLEError):
    """Dataset violates one or more invariants"""

    def __init__(self, message: str, violations: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message, {"violations": violations or []})
        self.violations = violations or []


class DataIngestionError(PrincipalTMLEError):
    """Input file could not be parsed into a dataset"""

    def __init__(self, message: str, problems: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message, {"problems": problems or []})
        self.problems = problems or []


class PositivityError(PrincipalTMLEError):
    """Treatment or sampling probabilities leave the admissible range"""


class StratumEmptyError(PrincipalTMLEError):
    """A regression has no subjects to be fit on"""

    def __init__(self, stratum: str, message: Optional[str] = None):
        super().__init__(message or f"No subjects in fitting stratum '{stratum}'", {"stratum": stratum})
        self.stratum = stratum


class FluctuationError(PrincipalTMLEError):
    """Targeting step failed to solve its score equation"""

    def __init__(self, message: str, score: float, component: Optional[int] = None):
        super().__init__(message, {"score": score, "component": component})
        self.score = score
        self.component = component


class LearnerError(PrincipalTMLEError):
    """A nuisance learner could not be fit"""


class StabilizationError(PrincipalTMLEError):
    """Two-phase weights cannot be stabilized"""


class UnsupportedModeError(PrincipalTMLEError):
    """Operation requested for a biomarker kind or configuration it does not support"""


class ConfigError(PrincipalTMLEError):
    """Run configuration is malformed"""


class SeparationWarning(UserWarning):
    """Logistic fit diverged and predictions were clipped"""


class IdentifiabilityWarning(UserWarning):
    """Estimates are incompatible with the identifying assumptions"""
