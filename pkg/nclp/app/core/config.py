"""
Configuration settings for the lab
"""

from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Project Info
    PROJECT_NAME: str = "Noncommutative Lp Inequality Lab"
    VERSION: str = "1.0.0"

    # Seed of last resort (NCLP_SEED)
    SEED: int = 0

    # Paths
    REPORTS_PATH: str = "reports"
    REPORT_FILE: str = "verify_report.json"

    # Logging
    LOG_LEVEL: str = "WARNING"

    # Matrix core
    HERMITIAN_TOL: float = 1e-12  # relative to max |entry|
    PSD_TOL: float = 1e-10  # relative to operator norm
    EIGEN_RESIDUAL_TOL: float = 1e-10

    # Functional calculus
    QUAD_NODES_PER_PANEL: int = 32
    QUAD_PANEL_WIDTH: float = 4.0  # in y = log t
    QUAD_TAIL_RATIO: float = 1e-6  # truncation at lambda_min * r and lambda_max / r
    QUAD_MAX_CONDITION: float = 1e14
    QUAD_SELF_TEST_TOL: float = 1e-8
    CONTOUR_NODES: int = 128
    CONTOUR_MAX_NODES: int = 4096
    CONTOUR_TOL: float = 1e-13  # target trapezoid error, relative
    CONTOUR_MIN_RELATIVE_MARGIN: float = 1e-3
    DEGENERACY_TOL: float = 1e-8
    SUPEROP_PANELS: int = 8
    SUPEROP_NODES: int = 32
    ALT_PANELS: int = 3  # per axis of the (t, u) double integral
    ALT_NODES: int = 10
    CASE1A_GRID_POINTS: int = 25

    # Conditional expectations
    CLUSTER_TOL: float = 1e-8

    # Semigroups
    LAPLACE_PANELS: int = 16
    LAPLACE_NODES: int = 16
    LAPLACE_CUTOFF: float = 1e-12
    RESOLVENT_MAX_CONDITION: float = 1e14

    # Lab campaigns
    DEFAULT_DIMS: List[int] = [2, 3, 4, 6]
    DEFAULT_P_GRID: List[float] = [2.0, 2.3, 2.5, 2.7, 3.0, 3.2, 3.5, 4.0, 5.0, 6.8]
    DEFAULT_SUB2_GRID: List[float] = [1.0, 1.5]
    DEFAULT_TRIALS: int = 100
    HEAVY_TRIALS: int = 3  # alternative proof, derivative and semigroup cells
    HEAVY_MAX_DIM: int = 4
    REL_SLACK: float = 1e-9
    DERIVATIVE_TOL: float = 1e-5
    EPSILON_SHIFT: float = 1e-8  # relative to operator norm
    COUNTEREXAMPLE_BUDGET: int = 4000
    THREADS: int = 0  # 0 = all cores

    model_config = SettingsConfigDict(
        env_prefix="NCLP_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
