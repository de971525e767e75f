"""
Pydantic schemas for the inline JSON operands of the `check` subcommand
"""

from pydantic import BaseModel, ConfigDict

from app.schemas.expectation import ExpectationSpec
from app.schemas.matrix import MatrixLiteral


class PairOperands(BaseModel):
    """theorem_gap, duality_monotonicity_check, case2_identity_check, case1b_decomposition_check"""

    model_config = ConfigDict(extra="forbid")

    a: MatrixLiteral
    b: MatrixLiteral
    p: float


class ScalarPairOperands(BaseModel):
    """classical_pointwise_check"""

    model_config = ConfigDict(extra="forbid")

    a: float
    b: float
    p: float


class ContractionOperands(BaseModel):
    """corollary1_ratio"""

    model_config = ConfigDict(extra="forbid")

    x: MatrixLiteral
    expectation: ExpectationSpec
    p: float


class NormOperands(BaseModel):
    """schatten_norm"""

    model_config = ConfigDict(extra="forbid")

    x: MatrixLiteral
    p: float
