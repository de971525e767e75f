"""
Pydantic schemas for matrix literals and weighted atoms
"""

from typing import List

import numpy as np
from pydantic import BaseModel, model_validator


class MatrixLiteral(BaseModel):
    dim: int
    re: List[List[float]]
    im: List[List[float]]

    @model_validator(mode="after")
    def check_shape(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for name, rows in (("re", self.re), ("im", self.im)):
            if len(rows) != self.dim or any(len(row) != self.dim for row in rows):
                raise ValueError(f"'{name}' must be a {self.dim}x{self.dim} array")
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.re, dtype=float) + 1j * np.asarray(self.im, dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MatrixLiteral":
        array = np.asarray(array, dtype=complex)
        return cls(dim=array.shape[0], re=array.real.tolist(), im=array.imag.tolist())


class AtomsLiteral(BaseModel):
    weights: List[float]
    values: List[float]

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.weights) != len(self.values):
            raise ValueError("weights and values must have the same length")
        if not self.weights:
            raise ValueError("at least one atom is required")
        return self
