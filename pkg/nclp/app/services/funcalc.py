"""
Functional calculus beyond spectral powers: the integral representation of
s^{1+theta}, holomorphic contour calculus, left/right multiplication
superoperators and the Frechet derivative of the power map.

Vectorization is column-major throughout: vec(A X B) = (B^T kron A) vec(X).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, linalg

from app.core.config import settings
from app.core.exceptions import ContourError, DomainError, QuadratureError
from app.services.matcore import (
    HermitianMatrix,
    PositiveMatrix,
    diagonal,
    power,
    zeros,
)
from app.services.quadrature import QuadratureScheme, composite_gauss_legendre

logger = logging.getLogger(__name__)

FRECHET_METHODS = ("divided_difference", "superop_integral", "contour", "finite_difference")

_SELF_TEST_POINTS = (1e-2, 1.0, 1e2)
_SELF_TEST_THETAS = (0.1, 0.5, 0.9)


def c_theta(theta: float) -> float:
    """Constant with s^{1+theta} = c_theta int_0^inf t^theta s^2/(s+t) dt/t"""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    return math.sin(math.pi * theta) / math.pi


def c_theta_oracle(theta: float) -> float:
    """
    Independent evaluation of int_0^inf t^{theta-1}/(1+t) dt.

    The half-line [1, inf) is folded onto [0, 1] by t -> 1/t, after which both
    pieces carry algebraic endpoint weights handled exactly by QUADPACK.
    """
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    integrand = lambda t: 1.0 / (1.0 + t)
    head, _ = integrate.quad(integrand, 0.0, 1.0, weight="alg", wvar=(theta - 1.0, 0.0), epsabs=0.0, epsrel=1e-14)
    tail, _ = integrate.quad(integrand, 0.0, 1.0, weight="alg", wvar=(-theta, 0.0), epsabs=0.0, epsrel=1e-14)
    return head + tail


def _integrate_power(
    entries: np.ndarray,
    theta: float,
    scheme: QuadratureScheme,
    support: np.ndarray,
) -> np.ndarray:
    """
    c_theta int t^theta (A - t + t^2 (A+t)^{-1}) dt/t on the scheme's window
    plus second-order closed-form tails at both ends
    """
    dim = entries.shape[0]
    eye = np.eye(dim)
    norm = float(np.max(np.abs(linalg.eigvalsh(entries)))) if dim else 0.0
    nodes, weights = scheme.nodes_weights()
    total = np.zeros((dim, dim), dtype=complex)
    for t, w in zip(nodes, weights):
        resolvent = linalg.solve(entries + t * eye, eye, assume_a="her")
        if t <= norm:
            integrand = entries - t * eye + (t * t) * resolvent
        else:
            # same integrand, A^2 (A+t)^{-1}, without the cancellation of large t
            integrand = entries @ resolvent @ entries
        total += (w * t ** theta) * integrand
    t0, t1 = scheme.t_min, scheme.t_max
    square = entries @ entries
    lower = entries * (t0 ** theta / theta) - support * (t0 ** (1 + theta) / (1 + theta))
    upper = square * (t1 ** (theta - 1) / (1 - theta)) - (square @ entries) * (t1 ** (theta - 2) / (2 - theta))
    return c_theta(theta) * (total + lower + upper)


@lru_cache(maxsize=1)
def quadrature_self_test() -> float:
    """Scalar self-test of the scheme; returns the worst relative error"""
    points = np.asarray(_SELF_TEST_POINTS)
    entries = np.diag(points).astype(complex)
    scheme = QuadratureScheme.for_spectrum(points.min(), points.max())
    worst = 0.0
    for theta in _SELF_TEST_THETAS:
        result = np.real(np.diag(_integrate_power(entries, theta, scheme, np.eye(points.size))))
        expected = points ** (1 + theta)
        worst = max(worst, float(np.max(np.abs(result - expected) / expected)))
    if worst > settings.QUAD_SELF_TEST_TOL:
        raise QuadratureError(f"Quadrature self-test failed: relative error {worst:.3e}")
    logger.debug("Quadrature self-test passed with relative error %.3e", worst)
    return worst


def power_integral(
    matrix: PositiveMatrix,
    one_plus_theta: float,
    scheme: Optional[QuadratureScheme] = None,
) -> PositiveMatrix:
    """
    A^{1+theta} from the integral representation with resolvents

    Args:
        matrix: positive semidefinite A
        one_plus_theta: exponent in (1, 2)
        scheme: quadrature window; derived from the spectrum of A when omitted

    Returns:
        PositiveMatrix approximating A^{1+theta}
    """
    theta = one_plus_theta - 1.0
    if not 0.0 < theta < 1.0:
        raise DomainError(f"Exponent must lie in (1, 2), got {one_plus_theta}")
    quadrature_self_test()
    if not isinstance(matrix, PositiveMatrix):
        matrix = PositiveMatrix.from_hermitian(matrix)
    spectrum = matrix.eigen()
    values = spectrum.eigenvalues
    top = float(values[-1]) if values.size else 0.0
    if top <= 0.0:
        return zeros(matrix.dim)
    on_support = values > settings.PSD_TOL * top
    lambda_min = float(values[on_support].min())
    if scheme is None:
        scheme = QuadratureScheme.for_spectrum(lambda_min, top)
    if not scheme.covers(lambda_min / 1e3, top * 1e3):
        raise QuadratureError(
            f"Quadrature window [{scheme.t_min:.3e}, {scheme.t_max:.3e}] does not cover "
            f"[{lambda_min / 1e3:.3e}, {top * 1e3:.3e}]"
        )
    condition = (top + scheme.t_min) / (max(float(values[0]), 0.0) + scheme.t_min)
    if condition > settings.QUAD_MAX_CONDITION:
        raise QuadratureError(f"Resolvent condition number {condition:.3e} exceeds {settings.QUAD_MAX_CONDITION:.1e}")
    vectors = spectrum.eigenvectors[:, on_support]
    support = vectors @ vectors.conj().T
    result = _integrate_power(matrix.entries, theta, scheme, support)
    return PositiveMatrix.from_hermitian(HermitianMatrix._wrap(result))


@dataclass(frozen=True)
class ContourSpec:
    """Circle |z - center| = radius inside the right half-plane, trapezoidal nodes"""

    center: float
    radius: float
    nodes: int = 128

    def __post_init__(self):
        if self.radius <= 0 or self.center <= 0:
            raise ContourError("Contour needs positive center and radius", self.center - self.radius)
        if self.center - self.radius <= 0:
            raise ContourError("Contour leaves the right half-plane", self.center - self.radius)
        if self.nodes < 3:
            raise ContourError("Contour needs at least 3 nodes", 0.0)

    @classmethod
    def for_spectrum(cls, lambda_min: float, lambda_max: float, nodes: Optional[int] = None) -> "ContourSpec":
        """
        Circle around [lambda_min, lambda_max] with enough nodes for settings.CONTOUR_TOL.

        The margin to the spectrum is max(lambda_min/2, 0.1 lambda_max) as long as
        that keeps the circle at least lambda_min/4 away from the branch point 0.
        Wider spectra get the margin sqrt(c h) - h (c the midpoint, h the half
        width), which equalizes the two analyticity ratios center/radius and
        radius/h. The trapezoid error decays like ratio^-nodes, so the node count
        is raised to what that ratio needs; past CONTOUR_MAX_NODES the spectrum is
        too spread for a circle and ContourError is raised.
        """
        if lambda_min <= 0:
            raise ContourError("Contour calculus needs a strictly positive spectrum", lambda_min)
        center = 0.5 * (lambda_min + lambda_max)
        half_width = 0.5 * (lambda_max - lambda_min)
        margin = max(lambda_min / 2.0, 0.1 * lambda_max)
        if margin > 0.75 * lambda_min:
            margin = math.sqrt(center * half_width) - half_width
        contour = cls(center=center, radius=half_width + margin, nodes=nodes or settings.CONTOUR_NODES)
        needed = contour.required_nodes([lambda_min, lambda_max])
        if needed > settings.CONTOUR_MAX_NODES:
            raise ContourError(
                f"Spectrum [{lambda_min:.3e}, {lambda_max:.3e}] needs {needed} contour nodes, "
                f"more than CONTOUR_MAX_NODES={settings.CONTOUR_MAX_NODES}",
                margin,
            )
        if needed > contour.nodes:
            logger.debug("Contour nodes raised from %d to %d for spread %.3e",
                         contour.nodes, needed, lambda_max / lambda_min)
            contour = cls(center=center, radius=contour.radius, nodes=needed)
        return contour

    def margin(self, eigenvalues: np.ndarray) -> float:
        """Distance from the spectrum to the circle (positive when inside)"""
        return float(self.radius - np.max(np.abs(np.asarray(eigenvalues) - self.center)))

    def analyticity_ratio(self, eigenvalues: np.ndarray) -> float:
        """min(center/radius, radius/max|lambda - center|), the rate base of the trapezoid error"""
        reach = float(np.max(np.abs(np.asarray(eigenvalues) - self.center)))
        outer = self.center / self.radius
        return outer if reach == 0.0 else min(outer, self.radius / reach)

    def required_nodes(self, eigenvalues: np.ndarray) -> int:
        ratio = self.analyticity_ratio(eigenvalues)
        if ratio <= 1.0:
            return settings.CONTOUR_MAX_NODES + 1
        return max(3, math.ceil(-math.log(settings.CONTOUR_TOL) / math.log(ratio)))

    def validate(self, eigenvalues: np.ndarray) -> float:
        margin = self.margin(eigenvalues)
        if margin <= settings.CONTOUR_MIN_RELATIVE_MARGIN * self.radius:
            raise ContourError("Spectrum lies outside or too close to the contour", margin)
        needed = self.required_nodes(eigenvalues)
        if self.nodes < needed:
            raise ContourError(f"Contour with {self.nodes} nodes cannot resolve this spectrum, needs {needed}", margin)
        return margin

    def points_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """z_k and w_k with sum w_k f(z_k) ~ (1/2 i pi) contour integral of f"""
        phi = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        direction = np.exp(1j * phi)
        return self.center + self.radius * direction, self.radius * direction / self.nodes


def _strict_spectrum(matrix: HermitianMatrix) -> np.ndarray:
    if not isinstance(matrix, PositiveMatrix):
        matrix = PositiveMatrix.from_hermitian(matrix)
    if not matrix.is_strictly_positive:
        raise DomainError("Contour calculus needs a strictly positive matrix")
    return matrix.eigen().eigenvalues


def contour_power(matrix: PositiveMatrix, p: float, contour: Optional[ContourSpec] = None) -> HermitianMatrix:
    """(1/2 i pi) contour integral of z^p (z - A)^{-1} dz, principal branch"""
    values = _strict_spectrum(matrix)
    if contour is None:
        contour = ContourSpec.for_spectrum(float(values[0]), float(values[-1]))
    contour.validate(values)
    dim = matrix.dim
    eye = np.eye(dim)
    total = np.zeros((dim, dim), dtype=complex)
    for z, w in zip(*contour.points_weights()):
        total += (w * np.power(z, p)) * linalg.solve(z * eye - matrix.entries, eye)
    return HermitianMatrix._wrap(total)


def contour_difference(
    x: PositiveMatrix,
    h: HermitianMatrix,
    p: float,
    contour: Optional[ContourSpec] = None,
) -> HermitianMatrix:
    """(x+h)^p - x^p = (1/2 i pi) contour integral of z^p (z-(x+h))^{-1} h (z-x)^{-1} dz"""
    values = _strict_spectrum(x)
    shifted = x + h
    shifted_values = _strict_spectrum(shifted)
    if contour is None:
        low = min(float(values[0]), float(shifted_values[0]))
        high = max(float(values[-1]), float(shifted_values[-1]))
        contour = ContourSpec.for_spectrum(low, high)
    contour.validate(values)
    contour.validate(shifted_values)
    eye = np.eye(x.dim)
    total = np.zeros((x.dim, x.dim), dtype=complex)
    for z, w in zip(*contour.points_weights()):
        left = linalg.solve(z * eye - shifted.entries, eye)
        right = linalg.solve(z * eye - x.entries, eye)
        total += (w * np.power(z, p)) * (left @ h.entries @ right)
    return HermitianMatrix._wrap(total)


def vec(matrix: Union[HermitianMatrix, np.ndarray]) -> np.ndarray:
    entries = matrix.entries if isinstance(matrix, HermitianMatrix) else np.asarray(matrix)
    return entries.reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on N x N matrices as an N^2 x N^2 matrix on column-major vectorizations"""

    dim: int
    matrix: np.ndarray

    __array_ufunc__ = None

    def __post_init__(self):
        size = self.dim * self.dim
        if self.matrix.shape != (size, size):
            raise DomainError(f"Superoperator on dim {self.dim} needs shape {(size, size)}, got {self.matrix.shape}")

    @classmethod
    def identity(cls, dim: int) -> "SuperOperator":
        return cls(dim, np.eye(dim * dim, dtype=complex))

    @classmethod
    def zero(cls, dim: int) -> "SuperOperator":
        return cls(dim, np.zeros((dim * dim, dim * dim), dtype=complex))

    @classmethod
    def from_map(cls, fn: Callable[[np.ndarray], np.ndarray], dim: int) -> "SuperOperator":
        """Matrix of a linear map from its action on the matrix units"""
        columns = []
        for k in range(dim * dim):
            unit = np.zeros(dim * dim, dtype=complex)
            unit[k] = 1.0
            columns.append(vec(np.asarray(fn(unvec(unit, dim)), dtype=complex)))
        return cls(dim, np.column_stack(columns))

    def apply(self, h: Union[HermitianMatrix, np.ndarray]) -> np.ndarray:
        return unvec(self.matrix @ vec(h), self.dim)

    def apply_hermitian(self, h: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix._wrap(self.apply(h))

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.dim, self.matrix @ other.matrix)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.dim, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "SuperOperator":
        return SuperOperator(self.dim, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def adjoint(self) -> "SuperOperator":
        """Adjoint for the Hilbert-Schmidt inner product Tr(x* y)"""
        return SuperOperator(self.dim, self.matrix.conj().T)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        scale = max(self.norm(), 1.0)
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) <= tol * scale

    def eigvalsh(self) -> np.ndarray:
        return linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    @staticmethod
    def inner(x, y) -> complex:
        """<x, y> = Tr(x* y)"""
        return complex(np.vdot(vec(x), vec(y)))


def left_superop(x: HermitianMatrix) -> SuperOperator:
    """L_x(h) = x h"""
    return SuperOperator(x.dim, np.kron(np.eye(x.dim), x.entries))


def right_superop(x: HermitianMatrix) -> SuperOperator:
    """R_x(h) = h x"""
    return SuperOperator(x.dim, np.kron(x.entries.T, np.eye(x.dim)))


def interpolated_superop(x: HermitianMatrix, t: float) -> SuperOperator:
    """t L_x + (1-t) R_x"""
    return SuperOperator(x.dim, t * left_superop(x).matrix + (1.0 - t) * right_superop(x).matrix)


def superop_power(operator: SuperOperator, alpha: float) -> SuperOperator:
    """Spectral power of a self-adjoint positive superoperator"""
    if alpha < 0:
        raise DomainError(f"superop_power needs alpha >= 0, got {alpha}")
    values, vectors = linalg.eigh(0.5 * (operator.matrix + operator.matrix.conj().T))
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if values.size and values[0] < -settings.PSD_TOL * scale:
        raise DomainError(f"Superoperator has negative spectrum {values[0]:.3e}")
    powered = np.zeros_like(values)
    positive = values > 0
    powered[positive] = values[positive] ** alpha
    return SuperOperator(operator.dim, (vectors * powered) @ vectors.conj().T)


def divided_difference_kernel(values: np.ndarray, p: float, tol: Optional[float] = None) -> np.ndarray:
    """
    Gamma_ij = (l_i^p - l_j^p)/(l_i - l_j), with p((l_i + l_j)/2)^{p-1} on
    numerically equal pairs
    """
    tol = settings.DEGENERACY_TOL if tol is None else tol
    li = np.asarray(values, dtype=float)[:, None]
    lj = np.asarray(values, dtype=float)[None, :]
    diff = li - lj
    degenerate = np.abs(diff) <= tol * (1.0 + np.abs(li) + np.abs(lj))
    safe = np.where(degenerate, 1.0, diff)
    return np.where(degenerate, p * ((li + lj) / 2.0) ** (p - 1.0), (li ** p - lj ** p) / safe)


def frechet_derivative(
    x: PositiveMatrix,
    h: HermitianMatrix,
    p: float,
    method: str = "divided_difference",
    contour: Optional[ContourSpec] = None,
    panels: Optional[int] = None,
    nodes: Optional[int] = None,
) -> HermitianMatrix:
    """
    D_x f_p(h) for x strictly positive

    Args:
        x: strictly positive matrix
        h: Hermitian direction
        p: exponent >= 1
        method: divided_difference | superop_integral | contour | finite_difference
        contour: contour for the contour method
        panels, nodes: Gauss-Legendre layout in t for the superop_integral method

    Returns:
        HermitianMatrix derivative
    """
    if p < 1:
        raise DomainError(f"Frechet derivative needs p >= 1, got {p}")
    if not isinstance(x, PositiveMatrix):
        x = PositiveMatrix.from_hermitian(x)
    if not x.is_strictly_positive:
        raise DomainError("Frechet derivative needs an invertible x")
    if x.dim != h.dim:
        raise DomainError(f"Dimension mismatch: {x.dim} vs {h.dim}")

    if method == "divided_difference":
        spectrum = x.eigen()
        u = spectrum.eigenvectors
        rotated = u.conj().T @ h.entries @ u
        gamma = divided_difference_kernel(spectrum.eigenvalues, p)
        return HermitianMatrix._wrap(u @ (gamma * rotated) @ u.conj().T)

    if method == "superop_integral":
        panels = panels or settings.SUPEROP_PANELS
        nodes = nodes or settings.SUPEROP_NODES
        ts, ws = composite_gauss_legendre(0.0, 1.0, panels, nodes)
        total = np.zeros(x.dim * x.dim, dtype=complex)
        h_vec = vec(h)
        for t, w in zip(ts, ws):
            total += w * (superop_power(interpolated_superop(x, t), p - 1.0).matrix @ h_vec)
        return HermitianMatrix._wrap(p * unvec(total, x.dim))

    if method == "contour":
        values = x.eigen().eigenvalues
        if contour is None:
            contour = ContourSpec.for_spectrum(float(values[0]), float(values[-1]))
        contour.validate(values)
        eye = np.eye(x.dim)
        total = np.zeros((x.dim, x.dim), dtype=complex)
        for z, w in zip(*contour.points_weights()):
            resolvent = linalg.solve(z * eye - x.entries, eye)
            total += (w * np.power(z, p)) * (resolvent @ h.entries @ resolvent)
        return HermitianMatrix._wrap(total)

    if method == "finite_difference":
        eps = np.finfo(float).eps
        step = float(eps) ** (1.0 / 3.0) * (1.0 + x.norm_inf()) / (1.0 + h.norm_inf())
        forward = power(PositiveMatrix.from_hermitian(x + step * h), p)
        backward = power(PositiveMatrix.from_hermitian(x - step * h), p)
        return HermitianMatrix._wrap((forward.entries - backward.entries) / (2.0 * step))

    raise DomainError(f"Unknown derivative method '{method}', expected one of {FRECHET_METHODS}")


def scalar_power(value: float, p: float) -> PositiveMatrix:
    """1 x 1 positive matrix value^p, for scalar consistency checks"""
    return power(diagonal([value]), p)
