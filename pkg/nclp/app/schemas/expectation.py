"""
Pydantic schemas for conditional expectations
"""

from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

from app.schemas.matrix import MatrixLiteral


class BlocksExpectationSpec(BaseModel):
    kind: Literal["blocks"] = "blocks"
    sizes: List[int]

    @field_validator("sizes")
    @classmethod
    def positive_sizes(cls, sizes: List[int]) -> List[int]:
        if not sizes or any(size < 1 for size in sizes):
            raise ValueError("block sizes must be positive integers")
        return sizes


class SpectralExpectationSpec(BaseModel):
    kind: Literal["spectral"] = "spectral"
    delta: MatrixLiteral
    cluster_tol: Optional[float] = None


ExpectationSpec = Annotated[
    Union[BlocksExpectationSpec, SpectralExpectationSpec],
    Field(discriminator="kind"),
]
