"""
Verification checks for the trace inequality

    tau(|a - b|^p) <= tau((a - b)(a^{p-1} - b^{p-1})),  a, b >= 0, p >= 2,

every intermediate step of its two proofs, the contraction corollaries for
conditional expectations and resolvents, and the failure for p < 2.

Checks return the quantity that must be nonnegative (a gap) or a residual that
must vanish, together with the scale it should be compared against. Numerical
assertions that are part of a check's contract raise InvariantViolation.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError, DomainError, InvariantViolation
from app.services.expectations import (
    ConditionalExpectation,
    ce_spectral_averaging,
    hs_projection_superop,
    jensen_difference_superop,
    operator_jensen_gap,
    range_basis,
    restricted_eigvalsh,
)
from app.services.funcalc import (
    FRECHET_METHODS,
    frechet_derivative,
    interpolated_superop,
    superop_power,
    vec,
)
from app.services.matcore import (
    HermitianMatrix,
    PositiveMatrix,
    WeightedAtoms,
    identity,
    make_rng,
    pos_neg_parts,
    power,
    random_psd,
    schatten_norm,
    schatten_power,
    trace_pair,
    trace_product,
)
from app.services.quadrature import composite_gauss_legendre

logger = logging.getLogger(__name__)


def _require_pair(a: HermitianMatrix, b: HermitianMatrix) -> Tuple[PositiveMatrix, PositiveMatrix]:
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim)
    return PositiveMatrix.from_hermitian(a), PositiveMatrix.from_hermitian(b)


def pair_scale(a: HermitianMatrix, b: HermitianMatrix, p: float) -> float:
    """max(1, |a|_p^p + |b|_p^p), the yardstick for absolute tolerances"""
    return max(1.0, schatten_power(a, p) + schatten_power(b, p))


def normalized_gap(gap: float, delta: HermitianMatrix, p: float) -> float:
    """gap / |delta|_p^p, and 0 when delta vanishes"""
    denominator = schatten_power(delta, p)
    if denominator == 0.0:
        return 0.0
    return gap / denominator


# Commutative inequality


def classical_pointwise_check(a: float, b: float, p: float) -> float:
    """(a-b)(a^{p-1} - b^{p-1}) - |a-b|^p for reals a, b >= 0"""
    if a < 0 or b < 0:
        raise DomainError(f"Pointwise inequality needs a, b >= 0, got ({a}, {b})")
    if p < 2:
        raise DomainError(f"Pointwise inequality needs p >= 2, got {p}")
    return (a - b) * (a ** (p - 1) - b ** (p - 1)) - abs(a - b) ** p


def integrated_classical_gap(f: WeightedAtoms, g: WeightedAtoms, p: float) -> float:
    """sum_i mu_i [(f_i-g_i)(f_i^{p-1} - g_i^{p-1}) - |f_i-g_i|^p]"""
    if f.weights.shape != g.weights.shape or not np.allclose(f.weights, g.weights, rtol=0.0, atol=0.0):
        raise DomainError("Integrated inequality needs two functions on the same atoms")
    if p < 2:
        raise DomainError(f"Integrated inequality needs p >= 2, got {p}")
    if np.any(f.values < 0) or np.any(g.values < 0):
        raise DomainError("Integrated inequality needs nonnegative functions")
    diff = f.values - g.values
    pointwise = diff * (f.values ** (p - 1) - g.values ** (p - 1)) - np.abs(diff) ** p
    return float(np.sum(f.weights * pointwise))


# Main theorem


def theorem_gap(a: PositiveMatrix, b: PositiveMatrix, p: float) -> float:
    """tau((a-b)(a^{p-1} - b^{p-1})) - tau(|a-b|^p)"""
    if p < 2:
        raise DomainError(f"The trace inequality needs p >= 2, got {p}")
    a, b = _require_pair(a, b)
    delta = a - b
    return trace_pair(delta, power(a, p - 1) - power(b, p - 1)) - schatten_power(delta, p)


def duality_monotonicity_check(a: PositiveMatrix, b: PositiveMatrix, p: float) -> float:
    """
    <a - b, phi(a) - phi(b)> - |a - b|_p^p with the duality map phi = f_{p-1}
    on the positive cone; asserts agreement with theorem_gap and the norm
    identity |phi(x)|_{p'} = |x|_p^{p-1}
    """
    if p < 2:
        raise DomainError(f"Duality check needs p >= 2, got {p}")
    a, b = _require_pair(a, b)
    conjugate = p / (p - 1.0)
    for name, x in (("a", a), ("b", b)):
        mapped = schatten_norm(power(x, p - 1), conjugate)
        expected = schatten_norm(x, p) ** (p - 1)
        if abs(mapped - expected) > 1e-10 * max(1.0, expected):
            raise InvariantViolation("duality_norm", mapped, expected, f"|phi({name})|_p' != |{name}|_p^(p-1)")
    delta = a - b
    value = trace_pair(delta, power(a, p - 1) - power(b, p - 1)) - schatten_norm(delta, p) ** p
    reference = theorem_gap(a, b, p)
    scale = pair_scale(a, b, p)
    if abs(value - reference) > 1e-12 * scale:
        raise InvariantViolation("duality_theorem_agreement", value, reference)
    return value


# Case 1.a: delta >= 0, p = 2 + theta


@dataclass
class Case1aResult:
    ts: List[float]
    residuals: List[float]
    resolvent_order_floor: float
    inverse_order_floor: float
    integrated_residual: float
    scale: float

    @property
    def min_residual(self) -> float:
        return min(self.residuals) if self.residuals else 0.0


def _shifted_inverse(matrix: np.ndarray, t: float) -> np.ndarray:
    eye = np.eye(matrix.shape[0])
    return linalg.solve(matrix + t * eye, eye, assume_a="pos")


def _min_eig(matrix: np.ndarray) -> float:
    return float(linalg.eigvalsh(0.5 * (matrix + matrix.conj().T))[0])


def case1a_grid(b: HermitianMatrix, delta: HermitianMatrix, points: Optional[int] = None) -> np.ndarray:
    """Log-spaced t grid over six decades around the spectral scale of b and delta"""
    points = points or settings.CASE1A_GRID_POINTS
    scale = max(1.0, b.norm_inf() + delta.norm_inf())
    return scale * np.logspace(-3.0, 3.0, points)


def case1a_step_check(
    b: PositiveMatrix,
    delta: PositiveMatrix,
    theta: float,
    ts: Optional[Sequence[float]] = None,
) -> Case1aResult:
    """
    Pointwise integrand bound of the case a >= b

        tau(delta(delta + t^2 (b+delta+t)^{-1} - t^2 (b+t)^{-1})) >= tau(delta^3 (delta+t)^{-1})

    on a t grid, the two operator-order facts behind it, and the integrated
    conclusion tau(delta(a^{1+theta} - b^{1+theta})) >= tau(delta^{2+theta}).
    """
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    b, delta = _require_pair(b, delta)
    ts = case1a_grid(b, delta) if ts is None else np.asarray(ts, dtype=float)
    d = delta.entries
    bd = b.entries + d
    eye = np.eye(b.dim)
    residuals = []
    resolvent_floor = math.inf
    inverse_floor = math.inf
    for t in ts:
        inv_bdt = _shifted_inverse(bd, t)
        inv_bt = _shifted_inverse(b.entries, t)
        inv_dt = _shifted_inverse(d, t)
        lhs = trace_product(d, d + (t * t) * inv_bdt - (t * t) * inv_bt)
        rhs = trace_product(d, d, d, inv_dt)
        residuals.append(lhs - rhs)
        resolvent_floor = min(resolvent_floor, _min_eig(d @ inv_dt @ d - d @ inv_bdt @ d))
        inverse_floor = min(inverse_floor, _min_eig(eye / t - inv_bt))
    a = PositiveMatrix.from_hermitian(b + delta)
    integrated = trace_pair(delta, power(a, 1 + theta) - power(b, 1 + theta)) - schatten_power(delta, 2 + theta)
    scale = max(1.0, schatten_power(delta, 2) + schatten_norm(delta, 1) * b.norm_inf())
    return Case1aResult(
        ts=[float(t) for t in ts],
        residuals=residuals,
        resolvent_order_floor=resolvent_floor,
        inverse_order_floor=inverse_floor,
        integrated_residual=integrated,
        scale=scale,
    )


# Case 1.b: arbitrary delta, p in [2, 3]


@dataclass
class Case1bResult:
    terms: Tuple[float, float, float, float]
    identity_residual: float
    cross_terms: Tuple[float, float]
    consequences: Tuple[float, float]
    scale: float


def case1b_decomposition_check(a: PositiveMatrix, b: PositiveMatrix, p: float) -> Case1bResult:
    """
    Split through alpha = a + delta_- = b + delta_+ >= a, b:

        tau((a-b)(a^{p-1}-b^{p-1})) = T1 + T2 + T3 + T4
        T1 = tau((a-alpha)(a^{p-1}-alpha^{p-1}))    T2 = tau((a-alpha)(alpha^{p-1}-b^{p-1}))
        T3 = tau((alpha-b)(alpha^{p-1}-b^{p-1}))    T4 = tau((alpha-b)(a^{p-1}-alpha^{p-1}))

    T2, T4 are the cross terms (>= 0); T1 - tau(delta_-^p) and
    T3 - tau(delta_+^p) are the consequences of the case a >= b.
    """
    if not 2.0 <= p <= 3.0:
        raise DomainError(f"Case 1.b covers p in [2, 3], got {p}")
    a, b = _require_pair(a, b)
    delta = a - b
    plus, minus = pos_neg_parts(delta)
    alpha = PositiveMatrix.from_hermitian(a + minus)
    a_pow, b_pow, alpha_pow = power(a, p - 1), power(b, p - 1), power(alpha, p - 1)
    lower = a - alpha
    upper = alpha - b
    t1 = trace_pair(lower, a_pow - alpha_pow)
    t2 = trace_pair(lower, alpha_pow - b_pow)
    t3 = trace_pair(upper, alpha_pow - b_pow)
    t4 = trace_pair(upper, a_pow - alpha_pow)
    total = trace_pair(delta, a_pow - b_pow)
    return Case1bResult(
        terms=(t1, t2, t3, t4),
        identity_residual=abs(total - (t1 + t2 + t3 + t4)),
        cross_terms=(t2, t4),
        consequences=(t1 - schatten_power(minus, p), t3 - schatten_power(plus, p)),
        scale=pair_scale(a, b, p),
    )


# Case 2: p >= 3


def case2_split(p: float, n: Optional[int] = None) -> Tuple[int, float]:
    """n >= 1 with p - 1 - n = 1 + theta, theta in [0, 1)"""
    if p < 3:
        raise DomainError(f"Case 2 covers p >= 3, got {p}")
    if n is None:
        n = int(math.floor(p - 2.0))
    theta = p - 2.0 - n
    if n < 1 or not 0.0 <= theta < 1.0:
        raise DomainError(f"n = {n} is not admissible for p = {p}: need p - 1 - n in [1, 2)")
    return n, theta


def case2_identity_check(a: PositiveMatrix, b: PositiveMatrix, p: float, n: Optional[int] = None) -> float:
    """
    |tau((a-b)(a^{p-1}-b^{p-1})) - tau(delta((b+delta)^{p-1-n} - b^{p-1-n}) b^n)
     - sum_{k=1..n} tau(delta (b+delta)^{p-1-k} delta b^{k-1})|
    """
    n, _ = case2_split(p, n)
    a, b = _require_pair(a, b)
    delta = a - b
    lhs = trace_pair(delta, power(a, p - 1) - power(b, p - 1))
    head = trace_product(delta, power(a, p - 1 - n) - power(b, p - 1 - n), power(b, n))
    total = head
    for k in range(1, n + 1):
        # b^0 is the identity, not the support projection of b
        b_power = identity(b.dim) if k == 1 else power(b, k - 1)
        total += trace_product(delta, power(a, p - 1 - k), delta, b_power)
    return abs(lhs - total)


@dataclass
class Case2Chain:
    """
    links: each entry must be >= 0 (or, for equalities, is minus the
    absolute residual); support_floors: smallest eigenvalues of E(b) - delta_-
    and E(b + delta) - delta_+
    """

    links: Dict[str, float]
    support_floors: Tuple[float, float]
    terminal_residual: float
    lower_bound: float
    upper_value: float
    scale: float

    @property
    def min_link(self) -> float:
        return min(self.links.values())


def case2_terminal_identity(delta: HermitianMatrix, p: float) -> Tuple[float, float]:
    """(tau(delta^2 (delta_-^{p-2} + delta_+^{p-2})), tau(|delta|^p))"""
    plus, minus = pos_neg_parts(delta)
    square = delta.entries @ delta.entries
    lhs = trace_product(square, power(minus, p - 2).entries + power(plus, p - 2).entries)
    return lhs, schatten_power(delta, p)


def case2_conclusion_check(a: PositiveMatrix, b: PositiveMatrix, p: float) -> Case2Chain:
    n, theta = case2_split(p)
    a, b = _require_pair(a, b)
    delta = a - b
    plus, minus = pos_neg_parts(delta)
    expectation = ce_spectral_averaging(delta)
    square = delta.entries @ delta.entries
    e_b = PositiveMatrix.from_hermitian(expectation(b))
    e_a = PositiveMatrix.from_hermitian(expectation(a))

    total = trace_pair(delta, power(a, p - 1) - power(b, p - 1))
    head = trace_product(delta, power(a, 1 + theta) - power(b, 1 + theta), power(b, n))
    middle = trace_product(square, power(a, p - 2))
    tail = trace_product(square, power(b, p - 2))
    tail_averaged = trace_product(square, expectation(power(b, p - 2)))
    jensen_b = trace_product(square, power(e_b, p - 2))
    jensen_a = trace_product(square, power(e_a, p - 2))
    terminal_lhs, terminal_rhs = case2_terminal_identity(delta, p)

    links = {
        "positivity_drop": total - (head + middle),
        "head_bound": head - tail,
        "expectation_equality": -abs(tail - tail_averaged),
        "jensen_b": tail - jensen_b,
        "jensen_a": middle - jensen_a,
        "support_order": (jensen_b + jensen_a) - terminal_lhs,
    }
    return Case2Chain(
        links=links,
        support_floors=(_min_eig((e_b - minus).entries), _min_eig((e_a - plus).entries)),
        terminal_residual=abs(terminal_lhs - terminal_rhs),
        lower_bound=terminal_rhs,
        upper_value=total,
        scale=pair_scale(a, b, p),
    )


# Alternative proof for p in [3, 4]


@dataclass
class AltProofResult:
    representation: float
    direct: float
    representation_residual: float
    chain: Dict[str, float]
    jensen_floor: float
    epsilon: float
    scale: float


def smoothed_unit_rule(panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss-Legendre on [0, 1] pushed through t = s^2 (3 - 2s), which
    flattens endpoint behaviour of the integrand
    """
    s, w = composite_gauss_legendre(0.0, 1.0, panels, nodes)
    return s * s * (3.0 - 2.0 * s), w * 6.0 * s * (1.0 - s)


def alt_proof_check(
    a: PositiveMatrix,
    b: PositiveMatrix,
    p: float,
    epsilon: Optional[float] = None,
    panels: Optional[int] = None,
    nodes: Optional[int] = None,
    jensen_nodes: Sequence[float] = (0.25, 0.75),
) -> AltProofResult:
    """
    Double-integral representation

        tau(delta(a^{p-1} - b^{p-1})) = (p-1) int int <delta, (t L_{b+u delta} + (1-t) R_{b+u delta})^{p-2} delta> dt du

    with a tensor Gauss-Legendre rule, the pinched chain

        tau(delta((b+delta)^{p-1} - b^{p-1})) >= tau(delta((E b + delta)^{p-1} - (E b)^{p-1})) >= tau(|delta|^p)

    and the operator Jensen floor at sampled (t, u). Both a and b are shifted
    by epsilon * max(1, |a|, |b|) so that they are strictly positive.
    """
    if not 3.0 <= p <= 4.0:
        raise DomainError(f"The alternative proof covers p in [3, 4], got {p}")
    a, b = _require_pair(a, b)
    epsilon = settings.EPSILON_SHIFT if epsilon is None else epsilon
    shift = epsilon * max(1.0, a.norm_inf(), b.norm_inf())
    if shift > 0:
        logger.debug("Shifting a and b by %.3e", shift)
        a = PositiveMatrix.from_hermitian(a.shifted(shift))
        b = PositiveMatrix.from_hermitian(b.shifted(shift))
    if not (a.is_strictly_positive and b.is_strictly_positive):
        raise DomainError("Alternative proof needs strictly positive a and b; use epsilon > 0")
    panels = panels or settings.ALT_PANELS
    nodes = nodes or settings.ALT_NODES
    delta = a - b
    delta_vec = vec(delta)

    ts, wts = smoothed_unit_rule(panels, nodes)
    representation = 0.0
    for u, wu in zip(ts, wts):
        x = b + float(u) * delta
        for t, wt in zip(ts, wts):
            image = superop_power(interpolated_superop(x, t), p - 2.0).matrix @ delta_vec
            representation += wu * wt * float(np.real(np.vdot(delta_vec, image)))
    representation *= p - 1.0
    direct = trace_pair(delta, power(a, p - 1) - power(b, p - 1))
    scale = pair_scale(a, b, p)
    residual = abs(representation - direct) / max(abs(direct), 1e-300) if direct != 0.0 else abs(representation)

    expectation = ce_spectral_averaging(delta)
    e_b = PositiveMatrix.from_hermitian(expectation(b))
    pinched_a = PositiveMatrix.from_hermitian(e_b + delta)
    pinched = trace_pair(delta, power(pinched_a, p - 1) - power(e_b, p - 1))
    chain = {
        "pinching": direct - pinched,
        "commutative": pinched - schatten_power(delta, p),
    }

    projection = hs_projection_superop(expectation)
    basis = range_basis(projection)
    floor = math.inf
    for u in jensen_nodes:
        x = b + float(u) * delta
        for t in jensen_nodes:
            operator = interpolated_superop(x, t)
            gap = operator_jensen_gap(projection, operator, p - 2.0)
            values = restricted_eigvalsh(gap, basis)
            level = max(operator.norm(), 1.0) ** (p - 2.0)
            floor = min(floor, float(values[0]) / level if values.size else 0.0)
    return AltProofResult(
        representation=representation,
        direct=direct,
        representation_residual=residual,
        chain=chain,
        jensen_floor=floor,
        epsilon=shift,
        scale=scale,
    )


@dataclass
class ReversalWitness:
    """
    Outcome of the search for a strict reversal of E S^alpha E >= (E S E)^alpha
    when alpha = p - 2 lies in (0, 1)
    """

    p: float
    found: bool
    seed: int
    stream: Optional[int]
    t: Optional[float]
    u: Optional[float]
    gap_min: float
    gap_max: float
    attempts: int
    trace: List[Tuple[int, float, float]] = field(default_factory=list)


def concavity_reversal_check(
    p: float,
    seed: int = 0,
    dim: int = 3,
    attempts: int = 20,
    stream_offset: int = 0,
) -> ReversalWitness:
    """
    Draw (E, S) from the alternative-proof construction (E the Hilbert-Schmidt
    projection onto the algebra of delta, S = t L_{b+u delta} + (1-t) R_{b+u delta})
    and assert the reversed order E S^alpha E <= (E S E)^alpha on range(E);
    stops at the first draw whose Jensen-direction gap is below -1e-6 * scale.
    All gaps are relative to |S|^alpha.
    """
    if not 2.0 < p < 3.0:
        raise DomainError(f"Concavity reversal needs p in (2, 3), got {p}")
    alpha = p - 2.0
    worst_min = math.inf
    worst_max = -math.inf
    trace = []
    for attempt in range(attempts):
        stream = stream_offset + attempt
        a = random_psd(dim, seed, "generic", stream=3 * stream)
        b = random_psd(dim, seed, "generic", stream=3 * stream + 1)
        rng = make_rng(seed, 3 * stream + 2)
        delta = a - b
        t, u = (float(v) for v in rng.uniform(0.05, 0.95, size=2))
        operator = interpolated_superop(b + u * delta, t)
        projection = hs_projection_superop(ce_spectral_averaging(delta))
        gap = jensen_difference_superop(projection, operator, alpha)
        values = restricted_eigvalsh(gap, range_basis(projection))
        level = max(operator.norm(), 1.0) ** alpha
        gap_min = float(values[0]) / level
        gap_max = float(values[-1]) / level
        trace.append((stream, gap_min, gap_max))
        worst_min = min(worst_min, gap_min)
        worst_max = max(worst_max, gap_max)
        if gap_max > 1e-9:
            raise InvariantViolation("concavity_reversed_order", gap_max, 1e-9, f"seed={seed} stream={stream}")
        if gap_min < -1e-6:
            logger.info("Reversal witness at p=%.3f seed=%d stream=%d gap=%.3e", p, seed, stream, gap_min)
            return ReversalWitness(
                p=p, found=True, seed=seed, stream=stream, t=t, u=u,
                gap_min=gap_min, gap_max=gap_max, attempts=attempt + 1, trace=trace,
            )
    return ReversalWitness(
        p=p, found=False, seed=seed, stream=None, t=None, u=None,
        gap_min=worst_min, gap_max=worst_max, attempts=attempts, trace=trace,
    )


# Corollaries


def corollary1_ratio(x: PositiveMatrix, expectation: ConditionalExpectation, p: float) -> float:
    """|x - E x|_p / |x|_p, asserting tau((x - E x)(E x)^{p-1}) = 0"""
    if p < 2:
        raise DomainError(f"Contraction of Id - E needs p >= 2, got {p}")
    x = PositiveMatrix.from_hermitian(x)
    norm = schatten_norm(x, p)
    if norm == 0.0:
        return 0.0
    averaged = PositiveMatrix.from_hermitian(expectation(x))
    defect = x - averaged
    orthogonality = trace_pair(defect, power(averaged, p - 1))
    threshold = 1e-10 * max(1.0, norm ** p)
    if abs(orthogonality) > threshold:
        raise InvariantViolation("corollary1_orthogonality", orthogonality, threshold)
    return schatten_norm(defect, p) / norm


def corollary1_holder_chain(
    x: PositiveMatrix, expectation: ConditionalExpectation, p: float
) -> Tuple[float, float, float]:
    """(|x - Ex|_p^p, tau((x - Ex) x^{p-1}), |x - Ex|_p |x|_p^{p-1}), non-decreasing"""
    x = PositiveMatrix.from_hermitian(x)
    defect = x - expectation(x)
    defect_norm = schatten_norm(defect, p)
    return (
        defect_norm ** p,
        trace_pair(defect, power(x, p - 1)),
        defect_norm * schatten_norm(x, p) ** (p - 1),
    )


def corollary2_holder_chain(
    x: PositiveMatrix, averaged: PositiveMatrix, p: float
) -> Tuple[float, float]:
    """
    (|x - y|_p^p, |x - y|_p |x|_p^{p-1} - tau((x - y) y^{p-1})) for y = lambda R x;
    the first never exceeds the second
    """
    defect = x - averaged
    defect_norm = schatten_norm(defect, p)
    return (
        defect_norm ** p,
        defect_norm * schatten_norm(x, p) ** (p - 1) - trace_pair(defect, power(averaged, p - 1)),
    )


# p < 2 counterexample on two atoms


def exact_l1_ratio(mu: Fraction, values: Tuple[Fraction, Fraction]) -> Fraction:
    """|x - E x|_1 / |x|_1 on atoms (mu, 1 - mu) in exact rational arithmetic"""
    mu = Fraction(mu)
    x1, x2 = (Fraction(v) for v in values)
    if not 0 < mu < 1:
        raise DomainError(f"Atom weight must lie in (0, 1), got {mu}")
    mean = mu * x1 + (1 - mu) * x2
    numerator = mu * abs(x1 - mean) + (1 - mu) * abs(x2 - mean)
    denominator = mu * abs(x1) + (1 - mu) * abs(x2)
    if denominator == 0:
        return Fraction(0)
    return numerator / denominator


def counterexample_ratio(weights: Sequence[float], values: Sequence[float], p: float) -> float:
    """|x - E x|_p / |x|_p with E the normalized mean on the atoms"""
    atoms = WeightedAtoms(np.asarray(weights, dtype=float), np.asarray(values, dtype=float))
    norm = atoms.norm(p)
    if norm == 0.0:
        return 0.0
    defect = atoms.with_values(atoms.values - atoms.expectation().values)
    return defect.norm(p) / norm


def _two_atom_ratios(mu: np.ndarray, r: np.ndarray, p: float) -> np.ndarray:
    """Vectorized ratio for weights (mu, 1-mu) and x = (1, r), 0 <= r <= 1"""
    mean = mu + (1.0 - mu) * r
    defect = mu * np.abs(1.0 - mean) ** p + (1.0 - mu) * np.abs(r - mean) ** p
    norm = mu + (1.0 - mu) * r ** p
    return (defect / norm) ** (1.0 / p)


@dataclass
class CounterexampleResult:
    p: float
    weights: Tuple[float, float]
    values: Tuple[float, float]
    ratio: float
    evaluations: int
    trace: List[Tuple[str, float, float, float]] = field(default_factory=list)

    @property
    def exceeds_one(self) -> bool:
        return self.ratio > 1.0 + 1e-12


def counterexample_search(p: float, budget: Optional[int] = None, grid: int = 64) -> CounterexampleResult:
    """
    Largest |x - E x|_p / |x|_p over two atoms with weights (mu, 1-mu) and
    x = (1, r): a grid of mu = (i+1)/(grid+1), r = j/(grid-1), then coordinate
    refinement with halving steps for at most `budget` further evaluations

    Args:
        p: exponent >= 1
        budget: refinement evaluations; settings.COUNTEREXAMPLE_BUDGET by default
        grid: points per axis

    Returns:
        CounterexampleResult with the best witness and its search trace
    """
    if p < 1:
        raise DomainError(f"Counterexample search needs p >= 1, got {p}")
    budget = settings.COUNTEREXAMPLE_BUDGET if budget is None else budget
    mus = (np.arange(grid) + 1.0) / (grid + 1.0)
    rs = np.arange(grid) / (grid - 1.0)
    table = _two_atom_ratios(mus[:, None], rs[None, :], p)
    i, j = np.unravel_index(int(np.argmax(table)), table.shape)
    mu, r, best = float(mus[i]), float(rs[j]), float(table[i, j])
    trace = [("grid", mu, r, best)]
    evaluations = table.size

    step_mu, step_r = 1.0 / (grid + 1.0), 1.0 / (grid - 1.0)
    used = 0
    mu_floor = 1e-6
    while used < budget and max(step_mu, step_r) > 1e-12:
        improved = False
        for d_mu, d_r in ((step_mu, 0.0), (-step_mu, 0.0), (0.0, step_r), (0.0, -step_r)):
            if used >= budget:
                break
            cand_mu = min(max(mu + d_mu, mu_floor), 1.0 - mu_floor)
            cand_r = min(max(r + d_r, 0.0), 1.0)
            value = float(_two_atom_ratios(np.float64(cand_mu), np.float64(cand_r), p))
            used += 1
            if value > best:
                mu, r, best = cand_mu, cand_r, value
                improved = True
        if improved:
            trace.append(("refine", mu, r, best))
        else:
            step_mu /= 2.0
            step_r /= 2.0
    evaluations += used
    logger.info("Counterexample search p=%.3f best ratio %.6f after %d evaluations", p, best, evaluations)
    return CounterexampleResult(
        p=p,
        weights=(mu, 1.0 - mu),
        values=(1.0, r),
        ratio=best,
        evaluations=evaluations,
        trace=trace,
    )


# Derivative agreement


@dataclass
class FrechetAgreement:
    p: float
    reference: str
    differences: Dict[str, float]
    euler_residual: float


def frechet_agreement(x: PositiveMatrix, h: HermitianMatrix, p: float) -> FrechetAgreement:
    """
    Relative Frobenius distance of every derivative method to divided
    differences, and the Euler relation D_x f_p(x) = p x^p
    """
    reference = frechet_derivative(x, h, p, method="divided_difference")
    scale = max(reference.frobenius(), 1e-300)
    differences = {}
    for method in FRECHET_METHODS[1:]:
        other = frechet_derivative(x, h, p, method=method)
        differences[method] = (other - reference).frobenius() / scale
    euler = frechet_derivative(x, x, p, method="divided_difference")
    expected = p * power(x, p)
    euler_residual = (euler - expected).frobenius() / max(expected.frobenius(), 1e-300)
    return FrechetAgreement(p=p, reference="divided_difference", differences=differences, euler_residual=euler_residual)
