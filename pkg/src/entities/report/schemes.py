from datetime import datetime

from sqlmodel import Field, SQLModel


# ================================================
# Estimadores
# ================================================
class ContractionFit(SQLModel):
    C: float
    gamma: float
    gamma_se: float
    residual: float
    points: int


class DistancePoint(SQLModel):
    t: float
    distance: float
    n_a: int
    n_b: int
    subsample_seed: int | None = None


class LyapunovFit(SQLModel):
    a: float
    b: float
    state_values: list[float]
    state_means: list[float]
    state_se: list[float]
    K0: float


class AxkRow(SQLModel):
    k: float
    empirical: float
    bound: float


class DensityRow(SQLModel):
    n: int
    mean_density: float
    density_se: float
    good_fraction: float
    mean_inverse_square_good: float
    mean_one_step_deviation: float
    excluded_overflow: int


class GrowthFit(SQLModel):
    C: float
    alpha: float
    beta: float
    pairs: int


class AcceptanceCheck(SQLModel):
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""


class EstimatorReport(SQLModel):
    """Everything one run measured; serialized with sorted keys."""

    experiment: str
    model_id: str
    fingerprint: str
    seeds: list[int]
    contraction: ContractionFit | None = None
    zeta_max_relative_error: float | None = None
    distance_series: list[DistancePoint] = Field(default_factory=list)
    distance_fit: ContractionFit | None = None
    noise_floor: float | None = None
    lyapunov: LyapunovFit | None = None
    axk: list[AxkRow] = Field(default_factory=list)
    density: list[DensityRow] = Field(default_factory=list)
    gamma2_hat: float | None = None
    growth: GrowthFit | None = None
    acceptance: list[AcceptanceCheck] = Field(default_factory=list)
    blow_up: dict | None = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.acceptance)


# ================================================
# Ledger
# ================================================
class ExperimentRunPublic(SQLModel):
    id: str
    experiment: str
    model_id: str
    fingerprint: str
    status: str
    exit_code: int
    created_at: datetime


class ExperimentRunDetail(ExperimentRunPublic):
    report_json: str


class ExperimentRunCreate(SQLModel):
    experiment: str
    model_id: str
    fingerprint: str
    status: str
    exit_code: int
    report_json: str
