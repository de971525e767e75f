"""
Tests for conditional expectations, commutative Jensen gaps and operator Jensen gaps
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.exceptions import DomainError, ExpectationError, NonCommutativeRangeError
from app.schemas.expectation import BlocksExpectationSpec
from app.services.expectations import (
    block_projections,
    ce_block_pinching,
    ce_spectral_averaging,
    expectation_from_spec,
    hs_projection_superop,
    identity_expectation,
    jensen_gap,
    operator_jensen_gap,
    range_basis,
    restricted_eigvalsh,
    spectral_clusters,
)
from app.services.funcalc import SuperOperator, interpolated_superop
from app.services.matcore import diagonal, make_rng, random_hermitian, random_psd, random_unitary, trace


class TestConstruction:
    def test_spectral_clusters_merge_close_eigenvalues(self):
        clusters = spectral_clusters(diagonal([1.0, 1.0 + 1e-12, 3.0]))
        assert len(clusters) == 2
        assert clusters[0][0] == pytest.approx(1.0)
        assert_allclose(clusters[1][1], np.diag([0.0, 0.0, 1.0]), atol=1e-12)

    def test_block_projections_resolve_identity(self):
        u = random_unitary(4, make_rng(3))
        total = sum(block_projections([1, 3], u))
        assert_allclose(total, np.eye(4), atol=1e-12)

    def test_block_sizes_must_be_positive(self):
        with pytest.raises(ExpectationError):
            block_projections([2, 0])

    def test_rejects_incomplete_family(self):
        with pytest.raises(ExpectationError):
            ce_block_pinching([np.diag([1.0, 0.0])])

    def test_rejects_non_orthogonal_family(self):
        q = np.full((2, 2), 0.5)
        with pytest.raises(ExpectationError):
            ce_block_pinching([np.diag([1.0, 0.0]), q])

    def test_from_spec(self):
        expectation = expectation_from_spec(BlocksExpectationSpec(sizes=[1, 2]))
        assert expectation.dim == 3
        assert expectation.to_spec().sizes == [1, 2]

    def test_rotated_pinching_has_no_spec(self):
        expectation = ce_block_pinching(block_projections([1, 1], random_unitary(2, make_rng(0))))
        with pytest.raises(ExpectationError):
            expectation.to_spec()


class TestConditionalExpectation:
    @pytest.fixture(params=["spectral", "blocks"])
    def expectation(self, request):
        if request.param == "spectral":
            return ce_spectral_averaging(random_hermitian(4, 8, 0))
        return ce_block_pinching(block_projections([2, 2], random_unitary(4, make_rng(8))))

    def test_idempotent_and_trace_preserving(self, expectation):
        x = random_psd(4, 8, "generic", 1)
        once = expectation(x)
        assert_allclose(expectation(once).entries, once.entries, atol=1e-12)
        assert trace(once) == pytest.approx(trace(x))

    def test_unital(self, expectation):
        assert_allclose(expectation.apply_array(np.eye(4)), np.eye(4), atol=1e-12)

    def test_hilbert_schmidt_projection(self, expectation):
        projection = hs_projection_superop(expectation)
        assert projection.is_self_adjoint(1e-10)
        assert_allclose((projection @ projection).matrix, projection.matrix, atol=1e-12)

    def test_spectral_range_is_commutative(self):
        expectation = ce_spectral_averaging(random_hermitian(3, 1, 0))
        assert expectation.has_commutative_range
        assert len(expectation.projections) == 3

    def test_rank_one_blocks_are_commutative(self):
        assert ce_block_pinching(block_projections([1, 1, 1])).has_commutative_range
        assert not ce_block_pinching(block_projections([1, 2])).has_commutative_range

    def test_identity_expectation(self):
        x = random_hermitian(3, 4, 0)
        assert_allclose(identity_expectation(3)(x).entries, x.entries)

    def test_dimension_checked(self, expectation):
        with pytest.raises(DomainError):
            expectation.apply_array(np.eye(3))


class TestJensen:
    def test_golden_gap(self):
        # E onto span(1, delta) with delta = 0: the scalars, x = diag(0, 2), alpha = 2
        expectation = ce_spectral_averaging(diagonal([0.0, 0.0]))
        gap = jensen_gap(expectation, diagonal([0.0, 2.0]), 2.0)
        assert_allclose(gap.entries, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.7])
    def test_gap_is_positive(self, alpha):
        expectation = ce_spectral_averaging(random_hermitian(4, 2, 0))
        gap = jensen_gap(expectation, random_psd(4, 2, "generic", 1), alpha)
        assert np.linalg.eigvalsh(gap.entries)[0] >= -1e-9

    def test_needs_commutative_range(self):
        expectation = ce_block_pinching(block_projections([2, 2]))
        with pytest.raises(NonCommutativeRangeError):
            jensen_gap(expectation, random_psd(4, 0, "generic", 0), 2.0)

    def test_needs_alpha_at_least_one(self):
        with pytest.raises(DomainError):
            jensen_gap(ce_spectral_averaging(diagonal([1.0, 2.0])), diagonal([1.0, 1.0]), 0.5)

    @pytest.mark.parametrize("alpha", [1.0, 1.4, 2.0])
    def test_operator_jensen_gap_on_range(self, alpha):
        delta = random_hermitian(3, 6, 0)
        projection = hs_projection_superop(ce_spectral_averaging(delta))
        operator = interpolated_superop(random_psd(3, 6, "spectral-gap", 1), 0.3)
        gap = operator_jensen_gap(projection, operator, alpha)
        values = restricted_eigvalsh(gap, range_basis(projection))
        assert values.size == 3
        assert values[0] >= -1e-9 * max(1.0, operator.norm()) ** alpha

    def test_operator_jensen_gap_domain(self):
        projection = SuperOperator.identity(2)
        with pytest.raises(DomainError):
            operator_jensen_gap(projection, SuperOperator.identity(2), 2.5)
