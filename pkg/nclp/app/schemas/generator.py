"""
Pydantic schemas for semigroup generators
"""

from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, Field, model_validator

from app.schemas.expectation import ExpectationSpec


class UnitaryMixingSpec(BaseModel):
    kind: Literal["unitary_mixing"] = "unitary_mixing"
    dim: int = 3
    count: int
    rates: List[float]
    seed: int = 0

    @model_validator(mode="after")
    def check_rates(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if len(self.rates) != self.count:
            raise ValueError("one rate per unitary is required")
        if any(rate <= 0 for rate in self.rates):
            raise ValueError("rates must be positive")
        return self


class PinchingSpec(BaseModel):
    kind: Literal["pinching"] = "pinching"
    expectation: ExpectationSpec


GeneratorSpec = Annotated[
    Union[UnitaryMixingSpec, PinchingSpec],
    Field(discriminator="kind"),
]
