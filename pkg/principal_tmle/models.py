"""
Pydantic models for the estimation data contracts
"""
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from principal_tmle.exceptions import UnsupportedModeError


def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class BiomarkerKind(str, Enum):
    """How biomarker values are interpreted"""
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class ContrastKind(str, Enum):
    """Scalar summaries of the three stratum parameters"""
    LOG_RELATIVE_RISK = "log_relative_risk"
    VACCINE_EFFICACY = "vaccine_efficacy"
    RISK_DIFFERENCE = "risk_difference"
    IDENTIFIED_RISK_DIFFERENCE = "identified_risk_difference"
    RISK_TREATED = "risk_treated"
    RISK_UNTREATED = "risk_untreated"
    RAW_PSI = "raw_psi"


class EstimatorMode(str, Enum):
    """Estimator that produced a PsiEstimate"""
    TMLE = "tmle"
    CV_TMLE = "cv_tmle"
    IPW_TMLE = "ipw_tmle"
    ONE_STEP = "one_step"
    CONTINUOUS_CV_TMLE = "continuous_cv_tmle"


class KernelFamily(str, Enum):
    """Smoothing kernels for continuous biomarkers"""
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    GAUSSIAN4 = "gaussian4"


KERNEL_ORDERS = {
    KernelFamily.UNIFORM: 2,
    KernelFamily.GAUSSIAN: 2,
    KernelFamily.GAUSSIAN4: 4,
}

LSCV_DENSITY = "lscv_density"


class Observation(BaseModel):
    """One subject's record"""
    model_config = ConfigDict(frozen=True)

    w: Tuple[float, ...] = Field(..., description="Baseline covariates")
    a: int = Field(..., ge=0, le=1, description="Treatment arm")
    s: Optional[float] = Field(None, description="Post-treatment biomarker (treated subjects)")
    y: int = Field(..., ge=0, le=1, description="Absorbent binary endpoint")
    s_c: Optional[float] = Field(None, description="Post-crossover biomarker (untreated controls)")
    delta: int = Field(default=1, ge=0, le=1, description="Phase-two measurement indicator")
    pi: float = Field(default=1.0, description="Phase-two sampling probability")


class Dataset(BaseModel):
    """
    Column-oriented collection of observations

    Missing biomarkers are stored as NaN. Arrays are read-only after construction.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray = Field(..., description="n x p covariate matrix")
    a: np.ndarray = Field(..., description="Treatment arm per subject")
    s: np.ndarray = Field(..., description="Biomarker (NaN when unobserved)")
    y: np.ndarray = Field(..., description="Endpoint per subject")
    s_c: np.ndarray = Field(..., description="Crossover biomarker (NaN when unobserved)")
    delta: np.ndarray = Field(..., description="Phase-two indicator")
    pi: np.ndarray = Field(..., description="Phase-two sampling probability")
    biomarker_kind: BiomarkerKind = Field(default=BiomarkerKind.DISCRETE)
    pi_known: bool = Field(default=True, description="Whether pi was supplied rather than defaulted")
    covariate_names: Tuple[str, ...] = Field(default=(), description="Covariate column names")
    biomarker_labels: Optional[Tuple[str, ...]] = Field(
        None, description="Category label of each integer biomarker code"
    )

    @field_validator("w", mode="before")
    @classmethod
    def _covariates(cls, value: Any) -> np.ndarray:
        w = np.array(value, dtype=float, copy=True)
        if w.ndim == 1:
            w = w.reshape(-1, 1)
        if w.ndim != 2:
            raise ValueError("covariates must be a matrix")
        w.setflags(write=False)
        return w

    @field_validator("a", "y", "delta", mode="before")
    @classmethod
    def _binary(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, int)

    @field_validator("s", "s_c", "pi", mode="before")
    @classmethod
    def _real(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, float)

    @model_validator(mode="after")
    def _shapes(self) -> "Dataset":
        n = self.w.shape[0]
        for name in ("a", "s", "y", "s_c", "delta", "pi"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"column '{name}' must have length {n}")
        if self.w.shape[1] < 1:
            raise ValueError("at least one covariate is required")
        return self

    @property
    def n(self) -> int:
        return int(self.w.shape[0])

    @property
    def covariate_dim(self) -> int:
        return int(self.w.shape[1])

    @property
    def is_two_phase(self) -> bool:
        return bool(np.any(self.delta == 0))

    @classmethod
    def from_observations(cls, observations: Sequence[Observation],
                          biomarker_kind: BiomarkerKind = BiomarkerKind.DISCRETE,
                          **kwargs: Any) -> "Dataset":
        """Build a dataset from row records"""
        if not observations:
            raise ValueError("at least one observation is required")
        dims = {len(o.w) for o in observations}
        if len(dims) != 1:
            raise ValueError("all observations must share the covariate dimension")
        nan = float("nan")
        return cls(
            w=[list(o.w) for o in observations],
            a=[o.a for o in observations],
            s=[nan if o.s is None else o.s for o in observations],
            y=[o.y for o in observations],
            s_c=[nan if o.s_c is None else o.s_c for o in observations],
            delta=[o.delta for o in observations],
            pi=[o.pi for o in observations],
            biomarker_kind=biomarker_kind,
            **kwargs,
        )

    def observation(self, i: int) -> Observation:
        """Row record for subject i"""
        return Observation(
            w=tuple(float(v) for v in self.w[i]),
            a=int(self.a[i]),
            s=None if np.isnan(self.s[i]) else float(self.s[i]),
            y=int(self.y[i]),
            s_c=None if np.isnan(self.s_c[i]) else float(self.s_c[i]),
            delta=int(self.delta[i]),
            pi=float(self.pi[i]),
        )

    def replace(self, **changes: Any) -> "Dataset":
        """Copy with some columns replaced (re-validated)"""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes)
        return type(self)(**fields)

    def subset(self, index: np.ndarray) -> "Dataset":
        """Dataset restricted to the given subject indices or boolean mask"""
        index = np.asarray(index)
        return self.replace(
            w=self.w[index], a=self.a[index], s=self.s[index], y=self.y[index],
            s_c=self.s_c[index], delta=self.delta[index], pi=self.pi[index],
        )

    def encode_biomarker(self, value: Union[float, str]) -> float:
        """Map a biomarker label (or numeric value) to its stored code"""
        if self.biomarker_labels is not None and isinstance(value, str):
            if value not in self.biomarker_labels:
                raise ValueError(f"Unknown biomarker category: {value}")
            return float(self.biomarker_labels.index(value))
        return float(value)


class KernelSpec(BaseModel):
    """Kernel family for smoothing the stratum indicator"""
    model_config = ConfigDict(frozen=True)

    family: KernelFamily = Field(default=KernelFamily.GAUSSIAN)

    @property
    def order(self) -> int:
        return KERNEL_ORDERS[self.family]


class TargetSpec(BaseModel):
    """The estimand: biomarker stratum, contrast and smoothing"""
    model_config = ConfigDict(frozen=True)

    s1_star: Union[float, str] = Field(..., description="Biomarker value defining the stratum")
    contrast: ContrastKind = Field(default=ContrastKind.LOG_RELATIVE_RISK)
    kernel: Optional[KernelSpec] = Field(None, description="Kernel (continuous biomarkers only)")
    bandwidth: Optional[Union[float, str]] = Field(
        None, description="Positive bandwidth or the selector directive 'lscv_density'"
    )

    @field_validator("bandwidth")
    @classmethod
    def _bandwidth(cls, value: Optional[Union[float, str]]) -> Optional[Union[float, str]]:
        if value is None:
            return value
        if isinstance(value, str):
            if value == LSCV_DENSITY:
                return value
            value = float(value)
        if value <= 0:
            raise ValueError("bandwidth must be positive")
        return float(value)

    def require_smoothing(self) -> None:
        """Continuous mode needs both a kernel and a bandwidth (or selector)"""
        if self.kernel is None or self.bandwidth is None:
            raise UnsupportedModeError(
                "Continuous biomarkers require a kernel and a bandwidth",
                {"kernel": self.kernel is not None, "bandwidth": self.bandwidth is not None},
            )

    def with_bandwidth(self, h: float) -> "TargetSpec":
        return self.model_copy(update={"bandwidth": float(h)})


class PsiEstimate(BaseModel):
    """Estimate of the three stratum parameters with its influence function"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    psi: np.ndarray = Field(..., description="(psi_1, psi_2, psi_3)")
    influence_rows: np.ndarray = Field(..., description="n x 3 (weighted) influence-function evaluations")
    sigma: np.ndarray = Field(..., description="3 x 3 covariance estimate")
    epsilons: np.ndarray = Field(..., description="Fluctuation coefficients")
    mode: EstimatorMode
    bandwidth_used: Optional[float] = None
    compatibility_violation_rate: Optional[float] = Field(
        None, description="Share of subjects where the targeted psi_2 fit exceeds the psi_1 fit"
    )
    notes: List[str] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @field_validator("psi", "epsilons", "influence_rows", "sigma", mode="before")
    @classmethod
    def _arrays(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, float)

    @model_validator(mode="after")
    def _consistent(self) -> "PsiEstimate":
        if self.psi.shape != (3,) or self.epsilons.shape != (3,):
            raise ValueError("psi and epsilons must be 3-vectors")
        if self.influence_rows.ndim != 2 or self.influence_rows.shape[1] != 3:
            raise ValueError("influence_rows must be n x 3")
        if self.sigma.shape != (3, 3):
            raise ValueError("sigma must be 3 x 3")
        scale = max(1.0, float(np.max(np.abs(self.sigma))))
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12 * scale):
            raise ValueError("sigma must be symmetric")
        if np.min(np.linalg.eigvalsh(self.sigma)) < -1e-9 * scale:
            raise ValueError("sigma must be positive semidefinite")
        if self.mode in (EstimatorMode.TMLE, EstimatorMode.CV_TMLE, EstimatorMode.IPW_TMLE):
            if np.any(self.psi < 0) or np.any(self.psi > 1):
                raise ValueError("discrete plug-in estimates must lie in [0, 1]")
        if self.mode == EstimatorMode.CONTINUOUS_CV_TMLE and np.any(self.psi < 0):
            raise ValueError("smoothed density estimates must be nonnegative")
        return self

    @property
    def n(self) -> int:
        return int(self.influence_rows.shape[0])


class SmoothedPsi(BaseModel):
    """View of a continuous-mode estimate as the smoothed parameter"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    psi_h: np.ndarray
    h: float = Field(..., gt=0)
    epsilons: np.ndarray
    influence_rows: np.ndarray


class ContrastDiagnostics(BaseModel):
    """Diagnostics reported with every contrast"""
    eif_mean_max_abs: float
    psi4_hat: Optional[float] = None
    min_eigenvalue_sigma: float
    denominator: float


class ContrastReport(BaseModel):
    """Delta-method summary of a scalar contrast"""
    kind: ContrastKind
    mode: EstimatorMode
    n: int
    estimate: Optional[float] = None
    std_error: Optional[float] = None
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    gradient: Optional[List[float]] = None
    diagnostics: ContrastDiagnostics
    identifiability_failure: bool = False
    bandwidth: Optional[float] = None
    message: Optional[str] = None

    @model_validator(mode="after")
    def _ordered(self) -> "ContrastReport":
        if self.identifiability_failure:
            return self
        if self.estimate is None or self.std_error is None:
            raise ValueError("a numeric contrast needs an estimate and a standard error")
        if self.std_error < 0:
            raise ValueError("standard error must be nonnegative")
        if not (self.ci_lower <= self.estimate <= self.ci_upper):
            raise ValueError("confidence interval must contain the estimate")
        return self


class StabilizedWeights(BaseModel):
    """Arm-stabilized inverse sampling weights"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    c: Dict[int, float] = Field(..., description="Stabilization constant per arm")
    pi_bar: np.ndarray = Field(..., description="c(A_i) * pi_i")
    w_eff: np.ndarray = Field(..., description="Delta_i / pi_bar_i")


class FoldPlan(BaseModel):
    """Partition of subjects into V cross-fitting folds (ids 0..V-1)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    V: int = Field(default=10, gt=0, description="Number of folds")
    assignment: np.ndarray = Field(..., description="Fold id of each subject")

    @field_validator("assignment", mode="before")
    @classmethod
    def _ids(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, int)

    @model_validator(mode="after")
    def _partition(self) -> "FoldPlan":
        if self.assignment.ndim != 1:
            raise ValueError("assignment must be a vector")
        if np.any(self.assignment < 0) or np.any(self.assignment >= self.V):
            raise ValueError(f"fold ids must lie in 0..{self.V - 1}")
        return self

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    def validation_mask(self, v: int) -> np.ndarray:
        return self.assignment == v

    def training_mask(self, v: int) -> np.ndarray:
        """Training set of fold v; with a single fold it is the whole sample"""
        if self.V == 1:
            return np.ones(self.n, dtype=bool)
        return self.assignment != v

    def sizes(self) -> List[int]:
        return np.bincount(self.assignment, minlength=self.V).tolist()

    @classmethod
    def single(cls, n: int) -> "FoldPlan":
        return cls(V=1, assignment=np.zeros(n, dtype=int))


class TruncationBounds(BaseModel):
    """Bounds applied to nuisance predictions"""
    model_config = ConfigDict(frozen=True)

    probability: Tuple[float, float] = Field(default=(0.005, 0.995))
    treatment: Tuple[float, float] = Field(default=(0.01, 0.99))
    density_floor: float = Field(default=1e-4, gt=0)

    @field_validator("probability", "treatment")
    @classmethod
    def _inside_unit(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lower, upper = value
        if not 0.0 < lower < upper < 1.0:
            raise ValueError("bounds must satisfy 0 < lower < upper < 1")
        return value


def _split_names(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


class NuisanceSettings(BaseModel):
    """How nuisance components are estimated"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    library: Tuple[str, ...] = Field(default=("glm", "glm_interaction", "mean"),
                                     description="Learner library for outcome and biomarker regressions")
    treatment: str = Field(default="logistic", pattern="^(known|logistic|ensemble)$")
    treatment_probability: Optional[float] = Field(None, description="Design P(A=1) for treatment=known")
    treatment_library: Tuple[str, ...] = Field(default=("mean", "glm"))
    folds: int = Field(default=10, gt=0, description="Cross-fitting folds (V)")
    inner_folds: int = Field(default=5, ge=2, description="Folds of the learner selector")
    cv_marginal: str = Field(default="training", pattern="^(training|validation)$")
    probability_bounds: Tuple[float, float] = (0.005, 0.995)
    treatment_bounds: Tuple[float, float] = (0.01, 0.99)
    density_floor: float = Field(default=1e-4, gt=0)
    seed: int = 0

    @field_validator("library", "treatment_library", "probability_bounds", "treatment_bounds", mode="before")
    @classmethod
    def _names(cls, value: Any) -> Any:
        return _split_names(value)

    @model_validator(mode="after")
    def _known(self) -> "NuisanceSettings":
        if self.treatment == "known" and self.treatment_probability is None:
            raise ValueError("treatment=known needs treatment_probability")
        if not self.library:
            raise ValueError("library must name at least one learner")
        return self

    @property
    def bounds(self) -> TruncationBounds:
        return TruncationBounds(probability=self.probability_bounds, treatment=self.treatment_bounds,
                                density_floor=self.density_floor)


class SimConfig(BaseModel):
    """Gaussian-logistic crossover trial"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(default=5000, gt=0)
    betas: Tuple[float, float, float, float, float] = (1.2, -0.6, -0.5, -0.1, -0.9)
    mu: Tuple[float, float] = (0.41, 0.41)
    cov: Tuple[Tuple[float, float], Tuple[float, float]] = (
        (0.55 ** 2, 0.55 ** 2 * 0.5),
        (0.55 ** 2 * 0.5, 0.55 ** 2),
    )
    arm_prob: float = Field(default=0.5, gt=0, lt=1)
    fixed_margins: bool = Field(default=False, description="Assign exactly round(n * arm_prob) to treatment")
    crossover_rule: str = Field(default="exact", pattern="^(exact|noisy)$")
    noise_sd: float = Field(default=0.0, ge=0)
    seed: int = 0
    reps: int = Field(default=1000, gt=0)

    @model_validator(mode="after")
    def _positive_definite(self) -> "SimConfig":
        cov = np.asarray(self.cov, dtype=float)
        if not np.allclose(cov, cov.T):
            raise ValueError("cov must be symmetric")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise ValueError("cov must be positive definite")
        if self.crossover_rule == "noisy" and self.noise_sd <= 0:
            raise ValueError("noisy crossover needs noise_sd > 0")
        return self


class ErrorResponse(BaseModel):
    """Error response model"""
    error: str = Field(..., description="Error type")
    message: str = Field(..., description="Error message")
    details: Dict[str, Any] = Field(default_factory=dict, description="Structured error information")
    timestamp: datetime = Field(default_factory=datetime.now)


def _numeric_or_label(value: Any) -> Any:
    """Numeric strings from config files become floats; other strings stay labels"""
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value.strip()
    return value


class RunSection(BaseModel):
    """RUN: estimator choice, seed and output"""
    model_config = ConfigDict(extra="forbid")

    mode: EstimatorMode = Field(
        default=EstimatorMode.TMLE,
        description="Estimator used by estimate and diagnose; coverage accepts only continuous_cv_tmle",
    )
    seed: int = Field(default=0, description="Root seed of every random stream")
    workers: int = Field(default=1, ge=1, description="Worker processes for replications")
    output: str = Field(default="results", description="Directory receiving artifacts")
    log_level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR)$")


class DataSection(BaseModel):
    """DATA: input file and its column map"""
    model_config = ConfigDict(extra="forbid")

    input: Optional[str] = Field(None, description="CSV input path")
    covariates: Tuple[str, ...] = Field(default=(), description="Covariate columns, comma separated")
    a: str = "a"
    y: str = "y"
    s: str = "s"
    s_c: str = "s_c"
    delta: str = "delta"
    pi: str = "pi"
    biomarker: BiomarkerKind = BiomarkerKind.DISCRETE

    @field_validator("covariates", mode="before")
    @classmethod
    def _names(cls, value: Any) -> Any:
        return _split_names(value)

    def column_map(self) -> Dict[str, str]:
        return {"a": self.a, "y": self.y, "s": self.s, "s_c": self.s_c, "delta": self.delta, "pi": self.pi}


class TargetSection(BaseModel):
    """TARGET: stratum and contrast"""
    model_config = ConfigDict(extra="forbid")

    s1_star: Optional[Union[float, str]] = Field(None, description="Stratum value or category label")
    contrast: ContrastKind = ContrastKind.LOG_RELATIVE_RISK
    component: int = Field(default=1, ge=1, le=3, description="Component reported by raw_psi")

    @field_validator("s1_star", mode="before")
    @classmethod
    def _stratum(cls, value: Any) -> Any:
        return _numeric_or_label(value)


class TwoPhaseSection(BaseModel):
    """TWO_PHASE: subsampling design and sampling probabilities"""
    model_config = ConfigDict(extra="forbid")

    design: str = Field(default="case_cohort", pattern="^(case_cohort|stratified)$")
    probability: float = Field(default=0.25, gt=0, le=1, description="Non-case sampling probability")
    treated_case_probability: float = Field(default=1.0, gt=0, le=1, description="Stratified design, a=1 y=1")
    treated_control_probability: float = Field(default=0.25, gt=0, le=1, description="Stratified design, a=1 y=0")
    untreated_control_probability: float = Field(default=0.25, gt=0, le=1, description="Stratified design, a=0 y=0")
    coarsening: Optional[str] = Field(None, description="Column used to re-estimate pi within (V, A, Y) cells")

    def design_probability(self) -> Union[float, Dict[Tuple[int, int], float]]:
        if self.design == "case_cohort":
            return self.probability
        return {(1, 1): self.treated_case_probability, (1, 0): self.treated_control_probability,
                (0, 0): self.untreated_control_probability}


class ContinuousSection(BaseModel):
    """CONTINUOUS: kernel smoothing of the stratum indicator"""
    model_config = ConfigDict(extra="forbid")

    kernel: KernelFamily = KernelFamily.GAUSSIAN
    bandwidth: Union[float, str] = Field(default=LSCV_DENSITY, description="Positive bandwidth or 'lscv_density'")
    h_grid: Tuple[float, ...] = Field(default=(0.4, 0.2, 0.1, 0.05), description="Bandwidths of the bias probe")

    @field_validator("bandwidth", mode="before")
    @classmethod
    def _bandwidth(cls, value: Any) -> Any:
        return _numeric_or_label(value)

    @field_validator("h_grid", mode="before")
    @classmethod
    def _grid(cls, value: Any) -> Any:
        return _split_names(value)


class SimulationSection(BaseModel):
    """SIMULATION: trial generator and coverage study"""
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=5000, gt=0)
    betas: Tuple[float, float, float, float, float] = (1.2, -0.6, -0.5, -0.1, -0.9)
    mu: Tuple[float, float] = (0.41, 0.41)
    sd: float = Field(default=0.55, gt=0, description="Standard deviation of W and S_1")
    rho: float = Field(default=0.5, gt=-1, lt=1, description="Correlation of W and S_1")
    arm_prob: float = Field(default=0.5, gt=0, lt=1)
    fixed_margins: bool = False
    crossover_rule: str = Field(default="exact", pattern="^(exact|noisy)$")
    noise_sd: float = Field(default=0.0, ge=0)
    reps: int = Field(default=1000, gt=0)
    s1_grid: Tuple[float, ...] = Field(default=(0.0, 0.3, 0.6), description="Stratum values of the coverage study")
    h_grid: Tuple[float, ...] = Field(default=(), description="Bandwidth sweep; empty runs a single bandwidth")
    threshold: Optional[float] = Field(None, description="Discretize S at this threshold")
    subsample: bool = Field(default=False, description="Apply the TWO_PHASE design to simulated data")

    @field_validator("betas", "mu", "s1_grid", "h_grid", mode="before")
    @classmethod
    def _values(cls, value: Any) -> Any:
        return _split_names(value)

    def sim_config(self, seed: int) -> SimConfig:
        variance, covariance = self.sd ** 2, self.rho * self.sd ** 2
        return SimConfig(
            n=self.n, betas=self.betas, mu=self.mu, cov=((variance, covariance), (covariance, variance)),
            arm_prob=self.arm_prob, fixed_margins=self.fixed_margins, crossover_rule=self.crossover_rule,
            noise_sd=self.noise_sd, seed=seed, reps=self.reps,
        )


class DiagnoseSection(BaseModel):
    """DIAGNOSE: bootstrap toys for the identification checks"""
    model_config = ConfigDict(extra="forbid")

    bootstrap: int = Field(default=20, ge=0, description="Bootstrap resamples tabulated into discrete laws")
    w_bins: int = Field(default=4, ge=1, description="Quantile bins of the first covariate")
    eps_grid: Tuple[float, ...] = Field(default=(1e-1, 1e-2, 1e-3))

    @field_validator("eps_grid", mode="before")
    @classmethod
    def _grid(cls, value: Any) -> Any:
        return _split_names(value)


class RunConfig(BaseModel):
    """Complete run configuration, one sub-model per section"""
    model_config = ConfigDict(extra="forbid")

    run: RunSection = Field(default_factory=RunSection)
    data: DataSection = Field(default_factory=DataSection)
    target: TargetSection = Field(default_factory=TargetSection)
    nuisance: NuisanceSettings = Field(default_factory=NuisanceSettings)
    two_phase: TwoPhaseSection = Field(default_factory=TwoPhaseSection)
    continuous: ContinuousSection = Field(default_factory=ContinuousSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    diagnose: DiagnoseSection = Field(default_factory=DiagnoseSection)

    def target_spec(self, s1_star: Optional[Union[float, str]] = None) -> TargetSpec:
        """TargetSpec for the configured biomarker kind"""
        s1_star = self.target.s1_star if s1_star is None else s1_star
        if s1_star is None:
            raise ValueError("TARGET__S1_STAR is required")
        if self.data.biomarker == BiomarkerKind.CONTINUOUS or self.run.mode == EstimatorMode.CONTINUOUS_CV_TMLE:
            return TargetSpec(s1_star=s1_star, contrast=self.target.contrast,
                              kernel=KernelSpec(family=self.continuous.kernel),
                              bandwidth=self.continuous.bandwidth)
        return TargetSpec(s1_star=s1_star, contrast=self.target.contrast)

    def settings(self) -> NuisanceSettings:
        """Nuisance settings seeded from the run seed"""
        return self.nuisance.model_copy(update={"seed": self.run.seed})
