"""
Trace-preserving unital positive semigroups e^{tL} on matrix algebras, their
resolvents R_lambda = (lambda - L)^{-1} and the contraction facts for the
resolvent defect x - lambda R_lambda x.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import DomainError, GeneratorError, InvariantViolation, ResolventError
from app.schemas.generator import PinchingSpec, UnitaryMixingSpec
from app.services.expectations import ConditionalExpectation, expectation_from_spec, hs_projection_superop
from app.services.funcalc import SuperOperator, unvec, vec
from app.services.matcore import (
    HermitianMatrix,
    PositiveMatrix,
    make_rng,
    power,
    random_hermitian,
    random_psd,
    random_unitary,
    schatten_norm,
    trace,
    trace_pair,
)
from app.services.quadrature import gauss_legendre

logger = logging.getLogger(__name__)

GENERATOR_KINDS = ("unitary_mixing", "pinching")

_UNITARY_TOL = 1e-10
_TAYLOR_STOP = 1e-18
_TAYLOR_MAX_TERMS = 60


@dataclass(frozen=True, eq=False)
class Generator:
    """Generator L of a trace-preserving unital positive semigroup"""

    kind: str
    operator: SuperOperator
    unitaries: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    rates: Tuple[float, ...] = ()
    expectation: Optional[ConditionalExpectation] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.operator.dim

    def apply(self, x: HermitianMatrix) -> HermitianMatrix:
        return self.operator.apply_hermitian(x)


@dataclass(frozen=True, eq=False)
class Resolvent:
    """R = (lambda Id - L)^{-1}"""

    lam: float
    operator: SuperOperator
    generator: Generator = field(repr=False)

    def apply(self, x: HermitianMatrix) -> HermitianMatrix:
        return self.operator.apply_hermitian(x)

    def scaled(self) -> SuperOperator:
        """lambda R_lambda"""
        return self.lam * self.operator


class ResolventDefect(NamedTuple):
    defect_norm: float
    input_norm: float
    cross_term: float

    def holds(self, scale: float, slack: float = 1e-9) -> bool:
        return self.defect_norm <= self.input_norm + slack * scale and self.cross_term >= -slack * scale


@dataclass
class ResolventLimit:
    """Residuals of the approximation x - lambda R x = lim t(1 - tR_t) R x"""

    ts: List[float]
    residuals: List[float]
    contraction_terms: List[float]
    cross_terms: List[float]
    reference_power: float

    def monotone(self, floor: float = 1e-12) -> bool:
        """Non-increasing residuals, ignoring changes below the rounding floor"""
        return all(later <= earlier + floor for earlier, later in zip(self.residuals, self.residuals[1:]))


def make_unitary_mixing_generator(unitaries: Sequence[np.ndarray], rates: Sequence[float]) -> Generator:
    """L(x) = sum_j r_j (u_j x u_j* - x)"""
    if len(unitaries) != len(rates) or not unitaries:
        raise GeneratorError("One positive rate per unitary is required")
    dim = np.asarray(unitaries[0]).shape[0]
    total = np.zeros((dim * dim, dim * dim), dtype=complex)
    identity = np.eye(dim * dim)
    frozen = []
    for j, (u, rate) in enumerate(zip(unitaries, rates)):
        u = np.asarray(u, dtype=complex)
        if u.shape != (dim, dim):
            raise GeneratorError(f"Unitary {j} has shape {u.shape}, expected {(dim, dim)}")
        defect = float(np.max(np.abs(u.conj().T @ u - np.eye(dim))))
        if defect > _UNITARY_TOL:
            raise GeneratorError(f"Matrix {j} is not unitary: |u*u - 1| = {defect:.3e}")
        if rate <= 0:
            raise GeneratorError(f"Rate {j} must be positive, got {rate}")
        total += rate * (np.kron(u.conj(), u) - identity)
        u.setflags(write=False)
        frozen.append(u)
    return Generator(
        kind="unitary_mixing",
        operator=SuperOperator(dim, total),
        unitaries=tuple(frozen),
        rates=tuple(float(r) for r in rates),
    )


def make_pinching_generator(expectation: ConditionalExpectation) -> Generator:
    """L = E - Id, so T_t = e^{-t} Id + (1 - e^{-t}) E"""
    projection = hs_projection_superop(expectation)
    operator = projection - SuperOperator.identity(expectation.dim)
    return Generator(kind="pinching", operator=operator, expectation=expectation)


def random_unitary_mixing(
    dim: int,
    count: int,
    seed: int,
    rates: Optional[Sequence[float]] = None,
    stream: int = 0,
) -> Generator:
    rng = make_rng(seed, stream)
    unitaries = [random_unitary(dim, rng) for _ in range(count)]
    if rates is None:
        rates = rng.uniform(0.5, 1.5, size=count).tolist()
    return make_unitary_mixing_generator(unitaries, rates)


def generator_from_spec(spec) -> Generator:
    if isinstance(spec, UnitaryMixingSpec):
        return random_unitary_mixing(spec.dim, spec.count, spec.seed, spec.rates)
    if isinstance(spec, PinchingSpec):
        return make_pinching_generator(expectation_from_spec(spec.expectation))
    raise GeneratorError(f"Unsupported generator spec {type(spec).__name__}")


def expm_superop(operator: SuperOperator) -> SuperOperator:
    """Scaling and squaring with a Taylor series truncated below 1e-18 of the partial sum"""
    a = operator.matrix
    norm = float(np.linalg.norm(a, 1))
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    scaled = a / float(2 ** squarings)
    term = np.eye(a.shape[0], dtype=complex)
    total = term.copy()
    for k in range(1, _TAYLOR_MAX_TERMS + 1):
        term = term @ scaled / k
        total = total + term
        if np.linalg.norm(term, 1) < _TAYLOR_STOP * np.linalg.norm(total, 1):
            break
    for _ in range(squarings):
        total = total @ total
    return SuperOperator(operator.dim, total)


def propagator(generator: Generator, t: float) -> SuperOperator:
    """T_t = e^{tL}"""
    if t < 0:
        raise DomainError(f"Semigroups run forward in time only, got t = {t}")
    return expm_superop(t * generator.operator)


def evolve(generator: Generator, t: float, x: HermitianMatrix) -> HermitianMatrix:
    return propagator(generator, t).apply_hermitian(x)


def pinching_propagator(generator: Generator, t: float) -> SuperOperator:
    """Closed form e^{-t} Id + (1 - e^{-t}) E of a pinching semigroup"""
    if generator.kind != "pinching":
        raise GeneratorError("Closed-form propagator exists for pinching generators only")
    projection = generator.operator + SuperOperator.identity(generator.dim)
    return math.exp(-t) * SuperOperator.identity(generator.dim) + (1.0 - math.exp(-t)) * projection


def pinching_scaled_resolvent(generator: Generator, lam: float) -> SuperOperator:
    """Closed form lambda R_lambda = (lambda/(lambda+1)) (Id + E/lambda)"""
    if generator.kind != "pinching":
        raise GeneratorError("Closed-form resolvent exists for pinching generators only")
    projection = generator.operator + SuperOperator.identity(generator.dim)
    return (lam / (lam + 1.0)) * (SuperOperator.identity(generator.dim) + (1.0 / lam) * projection)


def resolvent(generator: Generator, lam: float) -> Resolvent:
    if lam <= 0:
        raise DomainError(f"Resolvent needs lambda > 0, got {lam}")
    size = generator.dim * generator.dim
    shifted = lam * np.eye(size) - generator.operator.matrix
    condition = float(np.linalg.cond(shifted))
    if not np.isfinite(condition) or condition > settings.RESOLVENT_MAX_CONDITION:
        raise ResolventError(f"lambda - L is numerically singular at lambda = {lam}", condition)
    inverse = linalg.solve(shifted, np.eye(size))
    return Resolvent(lam=lam, operator=SuperOperator(generator.dim, inverse), generator=generator)


def laplace_resolvent_oracle(
    generator: Generator,
    lam: float,
    x: HermitianMatrix,
    panels: Optional[int] = None,
    nodes: Optional[int] = None,
) -> np.ndarray:
    """
    int_0^T e^{-lambda t} T_t(x) dt with e^{-lambda T} = cutoff, composite
    Gauss-Legendre on equal panels. Panels are refined until each spans at most
    two decay lengths of lambda + |L|; the propagators at the nodes of panel k are
    e^{khL} e^{s_j L} for the shared local offsets s_j.
    """
    if lam <= 0:
        raise DomainError(f"Laplace transform needs lambda > 0, got {lam}")
    panels = panels or settings.LAPLACE_PANELS
    nodes = nodes or settings.LAPLACE_NODES
    horizon = -math.log(settings.LAPLACE_CUTOFF) / lam
    rate = lam + float(np.linalg.norm(generator.operator.matrix, 1))
    panels = max(panels, int(math.ceil(horizon * rate / 2.0)))
    width = horizon / panels

    ref_nodes, ref_weights = gauss_legendre(nodes)
    offsets = 0.5 * width * (ref_nodes + 1.0)
    weights = 0.5 * width * ref_weights
    local = [propagator(generator, s).matrix for s in offsets]
    step = propagator(generator, width).matrix

    x_vec = vec(x)
    start = x_vec.copy()
    total = np.zeros_like(x_vec)
    for k in range(panels):
        origin = k * width
        for s, w, prop in zip(offsets, weights, local):
            total += (w * math.exp(-lam * (origin + s))) * (prop @ start)
        start = step @ start
    logger.debug("Laplace oracle used %d panels of width %.3e", panels, width)
    return unvec(total, generator.dim)


def _sample_scale(generator: Generator) -> float:
    return max(1.0, generator.operator.norm())


def check_invariants(
    generator: Generator,
    seed: int = 0,
    samples: int = 3,
    times: Sequence[float] = (0.1, 1.0, 10.0),
) -> Dict[str, float]:
    """
    Unital kernel, trace annihilation, Hermiticity preservation and positivity
    of e^{tL}; raises InvariantViolation on the first failure
    """
    dim = generator.dim
    scale = _sample_scale(generator)
    report = {}

    unit = generator.operator.apply(np.eye(dim))
    report["unital"] = float(np.max(np.abs(unit)))
    if report["unital"] > 1e-11 * scale:
        raise InvariantViolation("generator_unital", report["unital"], 1e-11 * scale)

    worst_trace = 0.0
    worst_hermitian = 0.0
    for k in range(samples):
        x = random_hermitian(dim, seed, stream=k)
        image = generator.operator.apply(x)
        worst_trace = max(worst_trace, abs(complex(np.trace(image))) / max(x.norm_inf(), 1.0))
        worst_hermitian = max(worst_hermitian, float(np.max(np.abs(image - image.conj().T))))
    report["trace"] = worst_trace
    report["hermitian"] = worst_hermitian
    if worst_trace > 1e-11 * scale:
        raise InvariantViolation("generator_trace", worst_trace, 1e-11 * scale)
    if worst_hermitian > 1e-11 * scale:
        raise InvariantViolation("generator_hermitian", worst_hermitian, 1e-11 * scale)

    worst_floor = 0.0
    for t in times:
        prop = propagator(generator, t)
        for k in range(samples):
            x = random_psd(dim, seed, "generic", stream=samples + k)
            image = prop.apply_hermitian(x)
            floor = float(linalg.eigvalsh(image.entries)[0]) / max(x.norm_inf(), 1e-300)
            worst_floor = min(worst_floor, floor)
    report["positivity"] = worst_floor
    if worst_floor < -1e-9:
        raise InvariantViolation("semigroup_positive", worst_floor, -1e-9)
    return report


def check_resolvent_invariants(res: Resolvent, seed: int = 0, samples: int = 3) -> Dict[str, float]:
    """(lambda - L) R = Id, and lambda R positive, unital and trace preserving"""
    dim = res.generator.dim
    size = dim * dim
    shifted = res.lam * np.eye(size) - res.generator.operator.matrix
    scaled = res.scaled()
    report = {"inverse": float(np.max(np.abs(shifted @ res.operator.matrix - np.eye(size))))}
    if report["inverse"] > 1e-10 * max(1.0, float(np.linalg.norm(shifted, 1))):
        raise InvariantViolation("resolvent_inverse", report["inverse"], 1e-10)

    report["unital"] = float(np.max(np.abs(scaled.apply(np.eye(dim)) - np.eye(dim))))
    if report["unital"] > 1e-9:
        raise InvariantViolation("resolvent_unital", report["unital"], 1e-9)

    worst_trace = 0.0
    worst_floor = 0.0
    for k in range(samples):
        x = random_psd(dim, seed, "generic", stream=k)
        image = scaled.apply_hermitian(x)
        worst_trace = max(worst_trace, abs(trace(image) - trace(x)) / max(trace(x), 1e-300))
        worst_floor = min(worst_floor, float(linalg.eigvalsh(image.entries)[0]) / max(x.norm_inf(), 1e-300))
    report["trace"] = worst_trace
    report["positivity"] = worst_floor
    if worst_trace > 1e-9:
        raise InvariantViolation("resolvent_trace", worst_trace, 1e-9)
    if worst_floor < -1e-9:
        raise InvariantViolation("resolvent_positive", worst_floor, -1e-9)
    return report


def resolvent_defect_check(generator: Generator, lam: float, x: PositiveMatrix, p: float) -> ResolventDefect:
    """
    |x - lambda R x|_p, |x|_p and tau((x - lambda R x)(lambda R x)^{p-1})

    Args:
        generator: semigroup generator
        lam: resolvent parameter > 0
        x: positive input
        p: exponent >= 2

    Returns:
        ResolventDefect triple
    """
    if p < 2:
        raise DomainError(f"Resolvent defect check needs p >= 2, got {p}")
    res = resolvent(generator, lam)
    averaged = PositiveMatrix.from_hermitian(res.scaled().apply_hermitian(x))
    defect = x - averaged
    return ResolventDefect(
        defect_norm=schatten_norm(defect, p),
        input_norm=schatten_norm(x, p),
        cross_term=trace_pair(defect, power(averaged, p - 1)),
    )


def resolvent_limit_check(
    generator: Generator,
    lam: float,
    x: HermitianMatrix,
    ts: Sequence[float] = (1e2, 1e3, 1e4),
    p: float = 2.0,
) -> ResolventLimit:
    """
    Residuals |(x - lambda R_lambda x) - t(1 - t R_t) R_lambda x|_2 along ts, plus
    tau(t R_t(y) y^{p-1}) and tau(t(1 - t R_t)(y) y^{p-1}) for y = R_lambda x
    """
    res = resolvent(generator, lam)
    y = res.apply(x)
    target = x - lam * y
    y_positive = PositiveMatrix.from_hermitian(y) if isinstance(x, PositiveMatrix) else None
    reference = schatten_norm(y, p) ** p
    residuals, contraction_terms, cross_terms = [], [], []
    for t in ts:
        averaged = t * resolvent(generator, t).apply(y)
        approximant = t * (y - averaged)
        residuals.append(schatten_norm(target - approximant, 2))
        if y_positive is not None:
            weight = power(y_positive, p - 1)
            contraction_terms.append(trace_pair(averaged, weight))
            cross_terms.append(trace_pair(approximant, weight))
    return ResolventLimit(
        ts=list(ts),
        residuals=residuals,
        contraction_terms=contraction_terms,
        cross_terms=cross_terms,
        reference_power=reference,
    )
