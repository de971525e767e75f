"""
Trace-preserving conditional expectations, commutative Jensen gaps and the
operator Jensen gap on the Hilbert-Schmidt space
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import DomainError, ExpectationError, NonCommutativeRangeError
from app.schemas.expectation import BlocksExpectationSpec, SpectralExpectationSpec
from app.schemas.matrix import MatrixLiteral
from app.services.funcalc import SuperOperator, superop_power
from app.services.matcore import HermitianMatrix, PositiveMatrix, eigh, power

logger = logging.getLogger(__name__)

_RESOLUTION_TOL = 1e-10


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def spectral_projections(delta: HermitianMatrix, cluster_tol: Optional[float] = None) -> List[np.ndarray]:
    """
    Spectral projections of delta with eigenvalues grouped into clusters whose
    spread is at most cluster_tol * (1 + |delta|)
    """
    return [projection for _, projection in spectral_clusters(delta, cluster_tol)]


def spectral_clusters(delta: HermitianMatrix, cluster_tol: Optional[float] = None) -> List[Tuple[float, np.ndarray]]:
    """(mean eigenvalue, projection) per cluster, ascending"""
    cluster_tol = settings.CLUSTER_TOL if cluster_tol is None else cluster_tol
    spectrum = eigh(delta)
    values = spectrum.eigenvalues
    vectors = spectrum.eigenvectors
    width = cluster_tol * (1.0 + float(np.max(np.abs(values))))
    clusters = []
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[start] > width:
            block = vectors[:, start:i]
            clusters.append((float(np.mean(values[start:i])), _freeze(block @ block.conj().T)))
            start = i
    return clusters


def block_projections(sizes: Sequence[int], unitary: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """Coordinate block resolution of the identity, optionally rotated by a unitary"""
    if not sizes or any(size < 1 for size in sizes):
        raise ExpectationError(f"Block sizes must be positive, got {list(sizes)}")
    dim = int(sum(sizes))
    u = np.eye(dim) if unitary is None else np.asarray(unitary, dtype=complex)
    if u.shape != (dim, dim):
        raise ExpectationError(f"Unitary of shape {u.shape} does not match block dimension {dim}")
    projections = []
    offset = 0
    for size in sizes:
        columns = u[:, offset:offset + size]
        projections.append(_freeze(columns @ columns.conj().T))
        offset += size
    return projections


@dataclass(frozen=True, eq=False)
class ConditionalExpectation:
    """
    tau-preserving conditional expectation, either the pinching sum Q x Q over
    a resolution of the identity or the averaging onto the span of the
    spectral projections of a generator delta
    """

    kind: str
    dim: int
    projections: Tuple[np.ndarray, ...] = field(repr=False)
    generator: Optional[HermitianMatrix] = field(default=None, repr=False)
    cluster_tol: Optional[float] = None
    sizes: Optional[Tuple[int, ...]] = None

    @property
    def has_commutative_range(self) -> bool:
        if self.kind == "spectral":
            return True
        return all(round(float(np.real(np.trace(q)))) == 1 for q in self.projections)

    def apply_array(self, x: np.ndarray) -> np.ndarray:
        """Action on an arbitrary complex N x N matrix"""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim, self.dim):
            raise DomainError(f"Expected a {self.dim}x{self.dim} matrix, got shape {x.shape}")
        result = np.zeros_like(x)
        if self.kind == "spectral":
            for q in self.projections:
                result += (np.trace(q @ x) / np.real(np.trace(q))) * q
        else:
            for q in self.projections:
                result += q @ x @ q
        return result

    def apply(self, x: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix._wrap(self.apply_array(x.entries))

    def __call__(self, x: HermitianMatrix) -> HermitianMatrix:
        return self.apply(x)

    def to_spec(self):
        if self.kind == "spectral":
            return SpectralExpectationSpec(
                delta=MatrixLiteral.from_array(self.generator.entries),
                cluster_tol=self.cluster_tol,
            )
        if self.sizes is None:
            raise ExpectationError("Pinching over a rotated or explicit projection family has no JSON form")
        return BlocksExpectationSpec(sizes=list(self.sizes))


def ce_spectral_averaging(delta: HermitianMatrix, cluster_tol: Optional[float] = None) -> ConditionalExpectation:
    """E(x) = sum_k tau(P_k x)/tau(P_k) P_k onto the algebra generated by delta"""
    projections = spectral_projections(delta, cluster_tol)
    logger.debug("Spectral averaging with %d clusters in dim %d", len(projections), delta.dim)
    return ConditionalExpectation(
        kind="spectral",
        dim=delta.dim,
        projections=tuple(projections),
        generator=delta,
        cluster_tol=cluster_tol,
    )


def ce_block_pinching(projections: Sequence[np.ndarray], sizes: Optional[Sequence[int]] = None) -> ConditionalExpectation:
    """E(x) = sum_i Q_i x Q_i for an orthogonal resolution of the identity"""
    if not projections:
        raise ExpectationError("At least one projection is required")
    projections = [np.asarray(q, dtype=complex) for q in projections]
    dim = projections[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for i, q in enumerate(projections):
        if q.shape != (dim, dim):
            raise ExpectationError(f"Projection {i} has shape {q.shape}, expected {(dim, dim)}")
        if np.max(np.abs(q - q.conj().T)) > _RESOLUTION_TOL or np.max(np.abs(q @ q - q)) > _RESOLUTION_TOL:
            raise ExpectationError(f"Family member {i} is not an orthogonal projection")
        for j in range(i):
            if np.max(np.abs(q @ projections[j])) > _RESOLUTION_TOL:
                raise ExpectationError(f"Projections {j} and {i} are not orthogonal")
        total += q
    if np.max(np.abs(total - np.eye(dim))) > _RESOLUTION_TOL:
        raise ExpectationError("Projections do not sum to the identity")
    return ConditionalExpectation(
        kind="blocks",
        dim=dim,
        projections=tuple(_freeze(q) for q in projections),
        sizes=tuple(int(s) for s in sizes) if sizes is not None else None,
    )


def identity_expectation(dim: int) -> ConditionalExpectation:
    return ce_block_pinching(block_projections([dim]), sizes=[dim])


def expectation_from_spec(spec) -> ConditionalExpectation:
    if isinstance(spec, BlocksExpectationSpec):
        return ce_block_pinching(block_projections(spec.sizes), sizes=spec.sizes)
    if isinstance(spec, SpectralExpectationSpec):
        return ce_spectral_averaging(HermitianMatrix.from_literal(spec.delta), spec.cluster_tol)
    raise ExpectationError(f"Unsupported expectation spec {type(spec).__name__}")


def jensen_gap(expectation: ConditionalExpectation, x: PositiveMatrix, alpha: float) -> HermitianMatrix:
    """E(x^alpha) - (E x)^alpha for a conditional expectation with commutative range"""
    if not expectation.has_commutative_range:
        raise NonCommutativeRangeError("Jensen gap needs a conditional expectation with commutative range")
    if alpha < 1:
        raise DomainError(f"Jensen gap needs alpha >= 1, got {alpha}")
    averaged = PositiveMatrix.from_hermitian(expectation.apply(x))
    return expectation.apply(power(x, alpha)) - power(averaged, alpha)


def hs_projection_superop(expectation: ConditionalExpectation) -> SuperOperator:
    """E as an orthogonal projection on the Hilbert-Schmidt space"""
    return SuperOperator.from_map(expectation.apply_array, expectation.dim)


def range_basis(projection: SuperOperator) -> np.ndarray:
    """Orthonormal columns spanning the range of a superoperator projection"""
    values, vectors = linalg.eigh(0.5 * (projection.matrix + projection.matrix.conj().T))
    return vectors[:, values > 0.5]


def restricted_eigvalsh(operator: SuperOperator, basis: np.ndarray) -> np.ndarray:
    """Eigenvalues of the compression V* S V to the span of orthonormal columns V"""
    compressed = basis.conj().T @ operator.matrix @ basis
    return linalg.eigvalsh(0.5 * (compressed + compressed.conj().T))


def jensen_difference_superop(projection: SuperOperator, operator: SuperOperator, alpha: float) -> SuperOperator:
    """E S^alpha E - (E S E)^alpha for any alpha >= 0"""
    compressed = projection @ operator @ projection
    return projection @ superop_power(operator, alpha) @ projection - superop_power(compressed, alpha)


def operator_jensen_gap(projection: SuperOperator, operator: SuperOperator, alpha: float) -> SuperOperator:
    """
    Operator Jensen gap for the operator convex power alpha in [1, 2]

    Args:
        projection: orthogonal projection E on the Hilbert-Schmidt space
        operator: self-adjoint positive superoperator S
        alpha: exponent in [1, 2]

    Returns:
        E S^alpha E - (E S E)^alpha, supported on the range of E
    """
    if not 1.0 <= alpha <= 2.0:
        raise DomainError(f"Operator Jensen gap needs alpha in [1, 2], got {alpha}")
    if not projection.is_self_adjoint(1e-10):
        raise DomainError("Projection superoperator is not self-adjoint")
    return jensen_difference_superop(projection, operator, alpha)
