"""
Tests for the trace inequality, its proof steps, the corollaries and the p < 2 counterexample
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, DomainError, NotPositiveError
from app.services import lab
from app.services.expectations import block_projections, ce_block_pinching, ce_spectral_averaging
from app.services.matcore import (
    PositiveMatrix,
    WeightedAtoms,
    diagonal,
    identity,
    make_rng,
    power,
    random_hermitian,
    random_psd,
    random_unitary,
    schatten_norm,
    zeros,
)

P_GRID = [2.0, 2.3, 2.5, 3.0, 3.2, 4.0, 6.8]


def _pair(kind, dim, stream):
    if kind == "commuting":
        return random_psd(dim, 31, "commuting-pair", stream)
    return random_psd(dim, 31, kind, 2 * stream), random_psd(dim, 31, kind, 2 * stream + 1)


class TestClassical:
    def test_golden_pointwise(self):
        assert lab.classical_pointwise_check(2.0, 1.0, 3.0) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("p", P_GRID)
    def test_pointwise_is_nonnegative(self, p):
        rng = make_rng(5)
        for a, b in rng.exponential(2.0, size=(50, 2)):
            assert lab.classical_pointwise_check(a, b, p) >= -1e-12 * max(1.0, a ** p + b ** p)

    def test_pointwise_domain(self):
        with pytest.raises(DomainError):
            lab.classical_pointwise_check(-1.0, 1.0, 3.0)
        with pytest.raises(DomainError):
            lab.classical_pointwise_check(1.0, 2.0, 1.5)

    def test_integrated_gap_matches_diagonal_matrices(self):
        f = WeightedAtoms(np.ones(3), [0.5, 2.0, 1.0])
        g = WeightedAtoms(np.ones(3), [1.5, 0.0, 1.0])
        gap = lab.integrated_classical_gap(f, g, 3.2)
        assert gap == pytest.approx(lab.theorem_gap(diagonal(f.values), diagonal(g.values), 3.2), rel=1e-12)

    def test_integrated_gap_needs_common_atoms(self):
        with pytest.raises(DomainError):
            lab.integrated_classical_gap(WeightedAtoms([1.0], [1.0]), WeightedAtoms([2.0], [1.0]), 3.0)


class TestTheorem:
    def test_golden_scalars(self):
        assert lab.theorem_gap(diagonal([2.0]), diagonal([1.0]), 3.0) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("kind", ["generic", "singular", "commuting"])
    @pytest.mark.parametrize("p", P_GRID)
    def test_gap_is_nonnegative(self, kind, p):
        for stream in range(5):
            a, b = _pair(kind, 4, stream)
            gap = lab.theorem_gap(a, b, p)
            assert gap >= -1e-9 * lab.pair_scale(a, b, p)

    def test_p2_is_an_equality(self):
        for stream in range(5):
            a, b = _pair("generic", 3, stream)
            assert abs(lab.theorem_gap(a, b, 2.0)) <= 1e-11 * lab.pair_scale(a, b, 2.0)

    def test_equal_operands(self):
        a = random_psd(3, 1, "generic", 0)
        assert lab.theorem_gap(a, a, 3.5) == pytest.approx(0.0, abs=1e-12)

    def test_domain(self):
        a, b = _pair("generic", 2, 0)
        with pytest.raises(DomainError):
            lab.theorem_gap(a, b, 1.9)
        with pytest.raises(NotPositiveError):
            lab.theorem_gap(diagonal([-1.0, 1.0]), b, 3.0)
        with pytest.raises(DimensionMismatchError):
            lab.theorem_gap(a, identity(3), 3.0)

    def test_normalized_gap(self):
        assert lab.normalized_gap(1.0, zeros(2), 3.0) == 0.0
        assert lab.normalized_gap(2.0, diagonal([1.0, 1.0]), 3.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 6.8])
    @pytest.mark.parametrize("c", [0.3, 2.5, 10.0])
    def test_gap_scales_with_c_to_the_p(self, p, c):
        for stream in range(3):
            a, b = _pair("generic", 3, stream)
            scaled = lab.theorem_gap(c * a, c * b, p)
            expected = c ** p * lab.theorem_gap(a, b, p)
            assert abs(scaled - expected) <= 1e-9 * c ** p * lab.pair_scale(a, b, p)

    @pytest.mark.parametrize("p", [2.0, 2.7, 3.5, 6.8])
    def test_commuting_pair_reduces_to_atoms(self, p):
        rng = make_rng(44, int(10 * p))
        for _ in range(3):
            u = random_unitary(4, rng)
            f = WeightedAtoms(np.ones(4), rng.exponential(2.0, size=4))
            g = WeightedAtoms(np.ones(4), rng.exponential(2.0, size=4))
            a = PositiveMatrix._from_spectrum(f.values, u)
            b = PositiveMatrix._from_spectrum(g.values, u)
            gap = lab.theorem_gap(a, b, p)
            assert gap == pytest.approx(lab.integrated_classical_gap(f, g, p), abs=1e-10 * lab.pair_scale(a, b, p))


class TestDuality:
    def test_norm_identity(self):
        x = diagonal([2.0, 3.0])
        assert schatten_norm(power(x, 2.0), 1.5) == pytest.approx(35.0 ** (2.0 / 3.0), rel=1e-12)

    @pytest.mark.parametrize("p", [2.5, 4.0])
    def test_agrees_with_theorem(self, p):
        a, b = _pair("singular", 3, 1)
        assert lab.duality_monotonicity_check(a, b, p) == pytest.approx(lab.theorem_gap(a, b, p), abs=1e-10)


class TestCase1a:
    def test_golden_scalar_residual(self):
        result = lab.case1a_step_check(diagonal([1.0]), diagonal([1.0]), 0.5, ts=[1.0])
        assert result.residuals[0] == pytest.approx(1.0 / 3.0, abs=1e-14)

    @pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 1.0])
    def test_step_and_order_facts(self, theta):
        b = random_psd(4, 2, "singular", 0)
        delta = random_psd(4, 2, "generic", 1)
        result = lab.case1a_step_check(b, delta, theta)
        assert len(result.ts) == 25
        assert result.min_residual >= -1e-10 * result.scale
        assert result.integrated_residual >= -1e-10 * result.scale
        assert result.resolvent_order_floor >= -1e-10 * max(1.0, delta.norm_inf() ** 2)
        assert result.inverse_order_floor >= -1e-10

    def test_theta_domain(self):
        with pytest.raises(DomainError):
            lab.case1a_step_check(identity(2), identity(2), 1.5)


class TestCase1b:
    @pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
    def test_decomposition(self, p):
        for stream in range(4):
            a, b = _pair("generic", 3, stream)
            result = lab.case1b_decomposition_check(a, b, p)
            assert result.identity_residual <= 1e-10 * result.scale
            assert min(result.cross_terms) >= -1e-9 * result.scale
            assert min(result.consequences) >= -1e-9 * result.scale

    def test_domain(self):
        with pytest.raises(DomainError):
            lab.case1b_decomposition_check(identity(2), identity(2), 3.5)


class TestCase2:
    def test_split(self):
        assert lab.case2_split(3.0) == (1, 0.0)
        assert lab.case2_split(3.5) == (1, 0.5)
        assert lab.case2_split(5.0) == (3, 0.0)
        with pytest.raises(DomainError):
            lab.case2_split(2.5)

    def test_terminal_identity_golden(self):
        lhs, rhs = lab.case2_terminal_identity(diagonal([2.0, -1.0]), 3.0)
        assert lhs == pytest.approx(9.0)
        assert rhs == pytest.approx(9.0)

    @pytest.mark.parametrize("kind", ["generic", "singular", "commuting"])
    @pytest.mark.parametrize("p", [3.0, 3.5, 5.0, 6.8])
    def test_induction_identity(self, kind, p):
        for stream in range(3):
            a, b = _pair(kind, 4, stream)
            assert lab.case2_identity_check(a, b, p) <= 1e-9 * lab.pair_scale(a, b, p)

    def test_identity_for_every_admissible_n(self):
        a, b = _pair("generic", 3, 0)
        assert lab.case2_identity_check(a, b, 4.5, n=2) <= 1e-9 * lab.pair_scale(a, b, 4.5)

    @pytest.mark.parametrize("p", [3.0, 3.2, 4.0, 6.8])
    def test_conclusion_chain(self, p):
        for stream in range(3):
            a, b = _pair("generic", 3, stream)
            chain = lab.case2_conclusion_check(a, b, p)
            support_scale = max(1.0, a.norm_inf() + b.norm_inf())
            assert chain.min_link >= -1e-9 * chain.scale
            assert min(chain.support_floors) >= -1e-9 * support_scale
            assert chain.terminal_residual <= 1e-10 * chain.scale
            assert chain.upper_value >= chain.lower_bound - 1e-9 * chain.scale


class TestAlternativeProof:
    @pytest.mark.parametrize("p", [3.0, 3.5, 4.0])
    def test_representation_and_chain(self, p):
        a = random_psd(3, 8, "spectral-gap", 0)
        b = random_psd(3, 8, "spectral-gap", 1)
        result = lab.alt_proof_check(a, b, p)
        assert result.representation_residual <= 1e-6
        assert min(result.chain.values()) >= -1e-9 * result.scale
        assert result.jensen_floor >= -1e-9
        assert result.epsilon > 0

    def test_singular_inputs_are_shifted(self):
        a, b = _pair("singular", 3, 0)
        result = lab.alt_proof_check(a, b, 4.0)
        assert result.representation_residual <= 1e-6

    def test_needs_shift_for_singular_inputs(self):
        with pytest.raises(DomainError):
            lab.alt_proof_check(diagonal([0.0, 1.0]), diagonal([1.0, 1.0]), 3.5, epsilon=0.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            lab.alt_proof_check(identity(2), identity(2), 2.5)

    def test_concavity_reversal_witness(self):
        witness = lab.concavity_reversal_check(2.5, seed=0, dim=3, attempts=20)
        assert witness.found
        assert witness.gap_min < -1e-6
        assert witness.gap_max <= 1e-9

    def test_concavity_domain(self):
        with pytest.raises(DomainError):
            lab.concavity_reversal_check(3.5)


class TestCorollaries:
    def test_golden_contraction(self):
        expectation = ce_spectral_averaging(zeros(2))
        ratio = lab.corollary1_ratio(diagonal([1.0, 0.0]), expectation, 2.0)
        assert ratio == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)

    @pytest.mark.parametrize("p", [2.0, 2.7, 4.0, 6.8])
    def test_contraction_both_kinds(self, p):
        for stream in range(4):
            x = random_psd(4, 17, "singular" if stream % 2 else "generic", stream)
            spectral = ce_spectral_averaging(random_hermitian(4, 17, 100 + stream))
            pinching = ce_block_pinching(block_projections([1, 3], random_unitary(4, make_rng(17, stream))))
            for expectation in (spectral, pinching):
                assert lab.corollary1_ratio(x, expectation, p) <= 1.0 + 1e-10
                lhs, middle, rhs = lab.corollary1_holder_chain(x, expectation, p)
                scale = max(1.0, rhs)
                assert lhs <= middle + 1e-9 * scale
                assert middle <= rhs + 1e-9 * scale

    def test_zero_input(self):
        assert lab.corollary1_ratio(zeros(2), ce_spectral_averaging(zeros(2)), 3.0) == 0.0

    def test_contraction_domain(self):
        with pytest.raises(DomainError):
            lab.corollary1_ratio(identity(2), ce_spectral_averaging(zeros(2)), 1.5)


class TestCounterexample:
    def test_exact_golden_ratio(self):
        assert lab.exact_l1_ratio(Fraction(1, 4), (Fraction(1), Fraction(0))) == Fraction(3, 2)

    def test_float_golden_ratio(self):
        assert lab.counterexample_ratio([0.25, 0.75], [1.0, 0.0], 1.0) == pytest.approx(1.5, abs=1e-12)

    def test_search_p1(self):
        result = lab.counterexample_search(1.0, budget=500)
        assert result.ratio >= 1.49
        assert result.exceeds_one
        assert result.evaluations <= 64 * 64 + 500
        mu, x2 = result.weights[0], result.values[1]
        assert float(lab.exact_l1_ratio(Fraction(mu), (Fraction(1), Fraction(x2)))) == pytest.approx(result.ratio)

    def test_search_p_between_one_and_two(self):
        assert lab.counterexample_search(1.5, budget=500).exceeds_one

    @pytest.mark.parametrize("p", [2.0, 3.0, 6.8])
    def test_no_counterexample_for_p_at_least_two(self, p):
        result = lab.counterexample_search(p, budget=200)
        assert result.ratio <= 1.0 + 1e-12

    def test_zero_budget_is_grid_only(self):
        result = lab.counterexample_search(1.0, budget=0)
        assert result.evaluations == 64 * 64
        assert len(result.trace) == 1

    def test_domain(self):
        with pytest.raises(DomainError):
            lab.counterexample_search(0.5)
        with pytest.raises(DomainError):
            lab.exact_l1_ratio(Fraction(0), (Fraction(1), Fraction(0)))


class TestFrechetAgreement:
    def test_agreement_table(self, gapped, direction):
        agreement = lab.frechet_agreement(gapped, direction, 3.5)
        assert agreement.reference == "divided_difference"
        assert set(agreement.differences) == {"superop_integral", "contour", "finite_difference"}
        assert agreement.differences["superop_integral"] < 1e-7
        assert agreement.differences["contour"] < 1e-7
        assert agreement.differences["finite_difference"] < 1e-5
        assert agreement.euler_residual < 1e-9
