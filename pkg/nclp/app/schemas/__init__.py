"""
Schemas package initialization
"""

from app.schemas.matrix import MatrixLiteral, AtomsLiteral
from app.schemas.expectation import (
    BlocksExpectationSpec, SpectralExpectationSpec, ExpectationSpec
)
from app.schemas.generator import UnitaryMixingSpec, PinchingSpec, GeneratorSpec
from app.schemas.campaign import (
    CampaignConfig, FailureRecord, CellResult, GapReport, CHECK_NAMES, INSTANCE_KINDS
)
from app.schemas.operands import PairOperands, ScalarPairOperands, ContractionOperands, NormOperands

__all__ = [
    "MatrixLiteral", "AtomsLiteral",
    "BlocksExpectationSpec", "SpectralExpectationSpec", "ExpectationSpec",
    "UnitaryMixingSpec", "PinchingSpec", "GeneratorSpec",
    "CampaignConfig", "FailureRecord", "CellResult", "GapReport", "CHECK_NAMES", "INSTANCE_KINDS",
    "PairOperands", "ScalarPairOperands", "ContractionOperands", "NormOperands",
]
