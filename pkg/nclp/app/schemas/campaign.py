"""
Pydantic schemas for campaign configuration and gap reports
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings

INSTANCE_KINDS = ("generic", "singular", "commuting")

CHECK_NAMES = (
    "classical",
    "theorem",
    "case1a",
    "case1b",
    "case2_identity",
    "case2_chain",
    "alt_proof",
    "concavity_reversal",
    "duality",
    "corollary1",
    "corollary2",
    "counterexample",
    "frechet",
)


class CampaignConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default_factory=lambda: settings.SEED)
    trials: int = Field(default_factory=lambda: settings.DEFAULT_TRIALS, ge=0)
    heavy_trials: int = Field(default_factory=lambda: settings.HEAVY_TRIALS, ge=0)
    dims: List[int] = Field(default_factory=lambda: list(settings.DEFAULT_DIMS))
    heavy_max_dim: int = Field(default_factory=lambda: settings.HEAVY_MAX_DIM, ge=1)
    p_grid: List[float] = Field(default_factory=lambda: list(settings.DEFAULT_P_GRID))
    sub2_grid: List[float] = Field(default_factory=lambda: list(settings.DEFAULT_SUB2_GRID))
    kinds: List[str] = Field(default_factory=lambda: list(INSTANCE_KINDS))
    checks: List[str] = Field(default_factory=lambda: list(CHECK_NAMES))
    epsilon: float = Field(default_factory=lambda: settings.EPSILON_SHIFT, ge=0.0)
    rel_slack: float = Field(default_factory=lambda: settings.REL_SLACK, gt=0.0)
    derivative_tol: float = Field(default_factory=lambda: settings.DERIVATIVE_TOL, gt=0.0)
    counterexample_budget: int = Field(default_factory=lambda: settings.COUNTEREXAMPLE_BUDGET, ge=0)
    inject_fault: bool = False

    @field_validator("dims")
    @classmethod
    def check_dims(cls, dims: List[int]) -> List[int]:
        if not dims or any(dim < 1 or dim > 256 for dim in dims):
            raise ValueError("dims must be integers in [1, 256]")
        return dims

    @field_validator("p_grid")
    @classmethod
    def check_p_grid(cls, p_grid: List[float]) -> List[float]:
        if not p_grid:
            raise ValueError("p grid must not be empty")
        bad = [p for p in p_grid if p < 2.0]
        if bad:
            raise ValueError(f"theorem cells need p >= 2, got {bad}")
        return p_grid

    @field_validator("sub2_grid")
    @classmethod
    def check_sub2_grid(cls, grid: List[float]) -> List[float]:
        bad = [p for p in grid if not 1.0 <= p < 2.0]
        if bad:
            raise ValueError(f"counterexample cells need p in [1, 2), got {bad}")
        return grid

    @field_validator("kinds")
    @classmethod
    def check_kinds(cls, kinds: List[str]) -> List[str]:
        unknown = sorted(set(kinds) - set(INSTANCE_KINDS))
        if unknown:
            raise ValueError(f"unknown instance kinds: {unknown}")
        return kinds

    @field_validator("checks")
    @classmethod
    def check_checks(cls, checks: List[str]) -> List[str]:
        unknown = sorted(set(checks) - set(CHECK_NAMES))
        if unknown:
            raise ValueError(f"unknown checks: {unknown}")
        return checks


class FailureRecord(BaseModel):
    check: str
    seed: int
    stream: int
    dim: int
    p: float
    kind: str
    trial: int
    value: Optional[float] = None
    threshold: Optional[float] = None
    message: str


class CellResult(BaseModel):
    check: str
    dim: int
    p: float
    kind: str
    trials: int
    min_gap: Optional[float] = None
    median_gap: Optional[float] = None
    normalized_min_gap: Optional[float] = None
    failures: List[FailureRecord] = []
    extra: Dict[str, float] = {}


class GapReport(BaseModel):
    project: str = settings.PROJECT_NAME
    version: str = settings.VERSION
    config: CampaignConfig
    cells: List[CellResult] = []

    @property
    def failures(self) -> List[FailureRecord]:
        return [failure for cell in self.cells for failure in cell.failures]

    @property
    def failure_count(self) -> int:
        return sum(len(cell.failures) for cell in self.cells)

    @property
    def ok(self) -> bool:
        return self.failure_count == 0

    def worst_cells(self, count: int = 5) -> List[CellResult]:
        """Cells with the smallest normalized gap, most negative first"""
        scored = [cell for cell in self.cells if cell.normalized_min_gap is not None]
        return sorted(scored, key=lambda cell: cell.normalized_min_gap)[:count]
