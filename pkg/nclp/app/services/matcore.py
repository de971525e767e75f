"""
Matrix core: Hermitian and positive matrices with the trace, Schatten norms,
spectral calculus, seeded instance generation and the weighted-atom model of
finite commutative measure spaces.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    DomainError,
    EigenSolverError,
    NotHermitianError,
    NotPositiveError,
)
from app.schemas.matrix import AtomsLiteral, MatrixLiteral

logger = logging.getLogger(__name__)

_UINT64_MASK = (1 << 64) - 1

PSD_KINDS = ("generic", "singular", "commuting-pair", "spectral-gap")


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and unitary eigenvectors as columns"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        """U diag(values) U*; the eigenvalues themselves by default"""
        if values is None:
            values = self.eigenvalues
        u = self.eigenvectors
        return (u * values) @ u.conj().T


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Dense complex Hermitian matrix stored as its Hermitian average"""

    entries: np.ndarray

    # numpy scalars defer to the operators below
    __array_ufunc__ = None

    @classmethod
    def from_array(cls, array, tol: Optional[float] = None) -> "HermitianMatrix":
        array = np.array(array, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DomainError(f"Expected a square matrix, got shape {array.shape}")
        tol = settings.HERMITIAN_TOL if tol is None else tol
        scale = float(np.max(np.abs(array))) if array.size else 0.0
        asymmetry = float(np.max(np.abs(array - array.conj().T))) if array.size else 0.0
        if asymmetry > tol * scale:
            raise NotHermitianError(asymmetry, tol * scale)
        return cls._wrap(array)

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "HermitianMatrix":
        # computed results: symmetrize without validation
        entries = 0.5 * (array + array.conj().T)
        entries.setflags(write=False)
        return cls(entries)

    @classmethod
    def from_literal(cls, literal: MatrixLiteral) -> "HermitianMatrix":
        return cls.from_array(literal.to_array())

    def to_literal(self) -> MatrixLiteral:
        return MatrixLiteral.from_array(self.entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def base(self) -> "HermitianMatrix":
        return HermitianMatrix(self.entries)

    def norm_inf(self) -> float:
        """Operator norm"""
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(linalg.eigvalsh(self.entries))))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def __add__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        _check_dims(self, other)
        return HermitianMatrix._wrap(self.entries + other.entries)

    def __sub__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        _check_dims(self, other)
        return HermitianMatrix._wrap(self.entries - other.entries)

    def __neg__(self) -> "HermitianMatrix":
        return HermitianMatrix._wrap(-self.entries)

    def __mul__(self, scalar: float) -> "HermitianMatrix":
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise DomainError("Hermitian matrices only scale by real numbers")
        return HermitianMatrix._wrap(float(np.real(scalar)) * self.entries)

    __rmul__ = __mul__

    def shifted(self, eps: float) -> "HermitianMatrix":
        """self + eps * 1"""
        return HermitianMatrix._wrap(self.entries + eps * np.eye(self.dim))

    def __repr__(self):
        return f"<HermitianMatrix dim={self.dim}>"


@dataclass(frozen=True, eq=False)
class PositiveMatrix(HermitianMatrix):
    """Positive semidefinite matrix with a cached, clamped spectrum"""

    eig_floor: float = 0.0
    spectrum: Optional[Spectrum] = field(default=None, repr=False)

    @classmethod
    def from_hermitian(cls, matrix: Union[HermitianMatrix, np.ndarray], tol: Optional[float] = None) -> "PositiveMatrix":
        if not isinstance(matrix, HermitianMatrix):
            matrix = HermitianMatrix.from_array(matrix)
        if isinstance(matrix, PositiveMatrix):
            return matrix
        spectrum = eigh(matrix)
        values = spectrum.eigenvalues
        tol = settings.PSD_TOL if tol is None else tol
        bound = tol * float(np.max(np.abs(values))) if values.size else 0.0
        if values.size and values[0] < -bound:
            raise NotPositiveError(float(values[0]), bound)
        if values.size and values[0] < 0:
            logger.debug("Clamping %d eigenvalues in [-%.3e, 0)", int(np.sum(values < 0)), bound)
            return cls._from_spectrum(np.maximum(values, 0.0), spectrum.eigenvectors)
        floor = float(values[0]) if values.size else 0.0
        return cls(entries=matrix.entries, eig_floor=floor, spectrum=spectrum)

    @classmethod
    def from_array(cls, array, tol: Optional[float] = None) -> "PositiveMatrix":
        return cls.from_hermitian(HermitianMatrix.from_array(array, tol=tol))

    @classmethod
    def from_literal(cls, literal: MatrixLiteral) -> "PositiveMatrix":
        return cls.from_hermitian(HermitianMatrix.from_literal(literal))

    @classmethod
    def _from_spectrum(cls, values: np.ndarray, vectors: np.ndarray) -> "PositiveMatrix":
        values = np.asarray(values, dtype=float)
        order = np.argsort(values, kind="stable")
        spectrum = Spectrum(values[order], np.asarray(vectors, dtype=complex)[:, order])
        entries = spectrum.reconstruct()
        entries = 0.5 * (entries + entries.conj().T)
        entries.setflags(write=False)
        floor = float(spectrum.eigenvalues[0]) if values.size else 0.0
        return cls(entries=entries, eig_floor=floor, spectrum=spectrum)

    @property
    def is_strictly_positive(self) -> bool:
        return self.eig_floor > 0

    def eigen(self) -> Spectrum:
        return self.spectrum if self.spectrum is not None else eigh(self)

    def norm_inf(self) -> float:
        values = self.eigen().eigenvalues
        return float(values[-1]) if values.size else 0.0

    def __repr__(self):
        return f"<PositiveMatrix dim={self.dim} eig_floor={self.eig_floor:.3e}>"


Matrix = Union[HermitianMatrix, PositiveMatrix]


def _check_dims(left: HermitianMatrix, right: HermitianMatrix):
    if left.dim != right.dim:
        raise DimensionMismatchError(left.dim, right.dim)


def identity(dim: int) -> PositiveMatrix:
    return PositiveMatrix._from_spectrum(np.ones(dim), np.eye(dim))


def zeros(dim: int) -> PositiveMatrix:
    return PositiveMatrix._from_spectrum(np.zeros(dim), np.eye(dim))


def diagonal(values: Sequence[float]) -> HermitianMatrix:
    """Real diagonal matrix; positive when all values are nonnegative"""
    values = np.asarray(values, dtype=float)
    if np.all(values >= 0):
        return PositiveMatrix._from_spectrum(values, np.eye(values.size))
    return HermitianMatrix._wrap(np.diag(values).astype(complex))


def eigh(matrix: HermitianMatrix) -> Spectrum:
    """Eigen-decomposition with a reconstruction check"""
    if isinstance(matrix, PositiveMatrix) and matrix.spectrum is not None:
        return matrix.spectrum
    entries = matrix.entries
    try:
        values, vectors = linalg.eigh(entries)
    except linalg.LinAlgError as e:
        residual = float(np.linalg.norm(entries - entries.conj().T))
        raise EigenSolverError(f"Eigen-solver did not converge: {e}", residual) from e
    spectrum = Spectrum(np.asarray(values, dtype=float), vectors)
    scale = float(np.linalg.norm(entries))
    residual = float(np.linalg.norm(spectrum.reconstruct() - entries))
    if residual > settings.EIGEN_RESIDUAL_TOL * max(scale, np.finfo(float).tiny):
        raise EigenSolverError("Eigen-decomposition failed the reconstruction check", residual)
    return spectrum


def power(matrix: PositiveMatrix, p: float) -> PositiveMatrix:
    """Spectral power with the convention 0^p = 0 on the kernel"""
    if not isinstance(matrix, PositiveMatrix):
        matrix = PositiveMatrix.from_hermitian(matrix)
    if p < 0 and not matrix.is_strictly_positive:
        raise DomainError(f"Negative power {p} of a singular matrix")
    spectrum = matrix.eigen()
    values = spectrum.eigenvalues
    powered = np.zeros_like(values)
    positive = values > 0
    powered[positive] = values[positive] ** p
    return PositiveMatrix._from_spectrum(powered, spectrum.eigenvectors)


def pos_neg_parts(matrix: HermitianMatrix) -> Tuple[PositiveMatrix, PositiveMatrix]:
    """D = D_+ - D_- with D_+ D_- = 0"""
    spectrum = eigh(matrix)
    values = spectrum.eigenvalues
    positive = PositiveMatrix._from_spectrum(np.maximum(values, 0.0), spectrum.eigenvectors)
    negative = PositiveMatrix._from_spectrum(np.maximum(-values, 0.0), spectrum.eigenvectors)
    return positive, negative


def abs_part(matrix: HermitianMatrix) -> PositiveMatrix:
    """|D| = (D^2)^{1/2}"""
    spectrum = eigh(matrix)
    return PositiveMatrix._from_spectrum(np.abs(spectrum.eigenvalues), spectrum.eigenvectors)


def trace(matrix: HermitianMatrix) -> float:
    """Unnormalized trace Tr"""
    return float(np.real(np.trace(matrix.entries)))


def trace_pair(left: HermitianMatrix, right: HermitianMatrix) -> float:
    """Re Tr(AB), asserting the imaginary part is rounding noise"""
    _check_dims(left, right)
    value = complex(np.einsum("ij,ji->", left.entries, right.entries))
    scale = float(np.linalg.norm(left.entries) * np.linalg.norm(right.entries))
    if abs(value.imag) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise DomainError(f"Tr(AB) has imaginary part {value.imag:.3e}; inputs are not Hermitian")
    return value.real


def trace_product(*factors) -> float:
    """Re Tr(X_1 X_2 ... X_k) for Hermitian matrices or arrays"""
    arrays = [factor.entries if isinstance(factor, HermitianMatrix) else np.asarray(factor) for factor in factors]
    product = arrays[0]
    for array in arrays[1:]:
        product = product @ array
    return float(np.real(np.trace(product)))


def schatten_power(matrix: HermitianMatrix, p: float) -> float:
    """tau(|A|^p) = sum |lambda_i|^p"""
    values = np.abs(eigh(matrix).eigenvalues)
    return float(np.sum(values ** p))


def schatten_norm(matrix: HermitianMatrix, p: float) -> float:
    """(sum |lambda_i|^p)^{1/p}; p = inf is the operator norm"""
    if p < 1:
        raise DomainError(f"Schatten norms need p >= 1, got {p}")
    values = np.abs(eigh(matrix).eigenvalues)
    if values.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(values))
    top = float(np.max(values))
    if top == 0.0:
        return 0.0
    # scaled to avoid overflow for large p
    return top * float(np.sum((values / top) ** p)) ** (1.0 / p)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)"""
    key = (int(seed) & _UINT64_MASK) | ((int(stream) & _UINT64_MASK) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _complex_gaussian(rng: np.random.Generator, dim: int) -> np.ndarray:
    return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR decomposition with phase correction"""
    q, r = np.linalg.qr(_complex_gaussian(rng, dim))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_hermitian(dim: int, seed: int, stream: int = 0, scale: float = 1.0) -> HermitianMatrix:
    rng = make_rng(seed, stream)
    g = _complex_gaussian(rng, dim)
    return HermitianMatrix._wrap(scale * (g + g.conj().T) / 2.0)


def random_psd(dim: int, seed: int, kind: str = "generic", stream: int = 0):
    """
    Seeded positive semidefinite instances

    Args:
        dim: matrix dimension N >= 1
        seed: 64-bit seed
        kind: generic | singular | commuting-pair | spectral-gap
        stream: per-trial stream index

    Returns:
        PositiveMatrix, or a pair of commuting PositiveMatrix for commuting-pair
    """
    if dim < 1:
        raise DomainError(f"dim must be positive, got {dim}")
    rng = make_rng(seed, stream)
    if kind == "generic":
        g = _complex_gaussian(rng, dim)
        return PositiveMatrix.from_hermitian(HermitianMatrix._wrap(g.conj().T @ g))
    if kind == "singular":
        g = _complex_gaussian(rng, dim)
        values = np.sort(linalg.eigvalsh(g.conj().T @ g))
        values[: math.ceil(dim / 3)] = 0.0
        return PositiveMatrix._from_spectrum(values, random_unitary(dim, rng))
    if kind == "commuting-pair":
        u = random_unitary(dim, rng)
        first = rng.chisquare(2.0, size=dim)
        second = rng.chisquare(2.0, size=dim)
        return PositiveMatrix._from_spectrum(first, u), PositiveMatrix._from_spectrum(second, u)
    if kind == "spectral-gap":
        u = random_unitary(dim, rng)
        return PositiveMatrix._from_spectrum(rng.uniform(0.5, 2.0, size=dim), u)
    raise DomainError(f"Unknown instance kind '{kind}', expected one of {PSD_KINDS}")


@dataclass(frozen=True, eq=False)
class WeightedAtoms:
    """Function on k atoms with positive masses: a finite commutative L_p space"""

    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if weights.shape != values.shape or weights.ndim != 1:
            raise DimensionMismatchError(weights.size, values.size)
        if np.any(weights <= 0):
            raise DomainError("Atom weights must be positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_literal(cls, literal: AtomsLiteral) -> "WeightedAtoms":
        return cls(np.asarray(literal.weights), np.asarray(literal.values))

    def to_literal(self) -> AtomsLiteral:
        return AtomsLiteral(weights=self.weights.tolist(), values=self.values.tolist())

    def with_values(self, values) -> "WeightedAtoms":
        return WeightedAtoms(self.weights, np.asarray(values, dtype=float))

    def trace(self) -> float:
        return float(np.sum(self.weights * self.values))

    def norm(self, p: float) -> float:
        if p < 1:
            raise DomainError(f"L_p norms need p >= 1, got {p}")
        if math.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float(np.sum(self.weights * np.abs(self.values) ** p) ** (1.0 / p))

    def expectation(self) -> "WeightedAtoms":
        """Conditional expectation onto the constants: the normalized mean"""
        mean = self.trace() / float(np.sum(self.weights))
        return self.with_values(np.full_like(self.values, mean))

    def embed(self, multiplier: float = 1.0) -> HermitianMatrix:
        """
        Diagonal matrix repeating each value weight*multiplier times; exact when
        the scaled weights are integers, so Tr(embed) = multiplier * trace().
        """
        counts = self.weights * multiplier
        rounded = np.rint(counts)
        if np.any(np.abs(counts - rounded) > 1e-9) or np.any(rounded < 1):
            raise DomainError("Scaled weights must be positive integers for an exact embedding")
        return diagonal(np.repeat(self.values, rounded.astype(int)))

    @staticmethod
    def integer_multiplier(weights: Sequence[float], max_denominator: int = 10**6) -> int:
        """Least common denominator of rational weights"""
        denominators = [Fraction(w).limit_denominator(max_denominator).denominator for w in weights]
        return int(np.lcm.reduce(denominators))
