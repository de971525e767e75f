"""
Tests for pydantic schemas: matrix literals, specs, campaign config and reports
"""

import numpy as np
import pytest
from pydantic import TypeAdapter, ValidationError

from app.core.config import settings
from app.schemas import (
    AtomsLiteral,
    BlocksExpectationSpec,
    CampaignConfig,
    CellResult,
    ExpectationSpec,
    FailureRecord,
    GapReport,
    GeneratorSpec,
    MatrixLiteral,
    PairOperands,
    PinchingSpec,
    SpectralExpectationSpec,
    UnitaryMixingSpec,
)


class TestMatrixLiteral:
    def test_from_array(self):
        literal = MatrixLiteral.from_array(np.array([[1.0, 1j], [-1j, 2.0]]))
        assert literal.dim == 2
        assert literal.im == [[0.0, 1.0], [-1.0, 0.0]]
        np.testing.assert_array_equal(literal.to_array(), np.array([[1.0, 1j], [-1j, 2.0]]))

    def test_rejects_ragged_rows(self):
        with pytest.raises(ValidationError):
            MatrixLiteral(dim=2, re=[[1.0, 0.0], [0.0]], im=[[0.0, 0.0], [0.0, 0.0]])

    def test_rejects_wrong_dim(self):
        with pytest.raises(ValidationError):
            MatrixLiteral(dim=3, re=[[1.0]], im=[[0.0]])

    def test_atoms_lengths(self):
        with pytest.raises(ValidationError):
            AtomsLiteral(weights=[1.0], values=[1.0, 2.0])
        with pytest.raises(ValidationError):
            AtomsLiteral(weights=[], values=[])


class TestSpecs:
    def test_expectation_discriminator(self):
        adapter = TypeAdapter(ExpectationSpec)
        assert isinstance(adapter.validate_python({"kind": "blocks", "sizes": [2, 1]}), BlocksExpectationSpec)
        spectral = adapter.validate_python({"kind": "spectral", "delta": MatrixLiteral.from_array(np.eye(2)).model_dump()})
        assert isinstance(spectral, SpectralExpectationSpec)
        with pytest.raises(ValidationError):
            adapter.validate_python({"kind": "diagonal"})

    def test_block_sizes(self):
        with pytest.raises(ValidationError):
            BlocksExpectationSpec(sizes=[])
        with pytest.raises(ValidationError):
            BlocksExpectationSpec(sizes=[2, 0])

    def test_generator_discriminator(self):
        adapter = TypeAdapter(GeneratorSpec)
        mixing = adapter.validate_json('{"kind": "unitary_mixing", "count": 1, "rates": [0.5]}')
        assert isinstance(mixing, UnitaryMixingSpec) and mixing.dim == 3
        pinching = adapter.validate_json('{"kind": "pinching", "expectation": {"kind": "blocks", "sizes": [1, 1]}}')
        assert isinstance(pinching, PinchingSpec)

    def test_mixing_rates(self):
        with pytest.raises(ValidationError):
            UnitaryMixingSpec(count=2, rates=[1.0])
        with pytest.raises(ValidationError):
            UnitaryMixingSpec(count=1, rates=[-1.0])

    def test_operands_forbid_extra_keys(self):
        literal = MatrixLiteral.from_array(np.eye(2)).model_dump()
        assert PairOperands(a=literal, b=literal, p=3.0).p == 3.0
        with pytest.raises(ValidationError):
            PairOperands(a=literal, b=literal, p=3.0, q=1.0)


class TestCampaignConfig:
    def test_defaults_come_from_settings(self):
        config = CampaignConfig()
        assert config.seed == settings.SEED
        assert config.p_grid == list(settings.DEFAULT_P_GRID)
        assert config.rel_slack == settings.REL_SLACK
        assert not config.inject_fault

    @pytest.mark.parametrize(
        "field, value",
        [
            ("p_grid", [1.5]),
            ("p_grid", []),
            ("sub2_grid", [2.0]),
            ("dims", [0]),
            ("dims", []),
            ("kinds", ["hermitian"]),
            ("checks", ["everything"]),
            ("trials", -1),
            ("rel_slack", 0.0),
        ],
    )
    def test_invalid_values(self, field, value):
        with pytest.raises(ValidationError):
            CampaignConfig(**{field: value})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            CampaignConfig.model_validate({"trials": 1, "colour": "red"})


class TestGapReport:
    def _failure(self, trial):
        return FailureRecord(check="theorem", seed=1, stream=trial, dim=2, p=3.0, kind="generic", trial=trial,
                             message="theorem_gap below slack")

    def test_properties(self):
        cells = [
            CellResult(check="theorem", dim=2, p=3.0, kind="generic", trials=2, normalized_min_gap=0.5),
            CellResult(check="theorem", dim=2, p=4.0, kind="generic", trials=2, normalized_min_gap=-0.1,
                       failures=[self._failure(0), self._failure(1)]),
            CellResult(check="counterexample", dim=2, p=1.0, kind="atoms", trials=1),
        ]
        report = GapReport(config=CampaignConfig(trials=2), cells=cells)
        assert report.failure_count == 2
        assert not report.ok
        assert [f.trial for f in report.failures] == [0, 1]
        assert [cell.p for cell in report.worst_cells()] == [4.0, 3.0]
        assert report.worst_cells(1)[0].normalized_min_gap == -0.1

    def test_empty_report_is_ok(self):
        report = GapReport(config=CampaignConfig(trials=0))
        assert report.ok and report.failures == []
        assert report.project == settings.PROJECT_NAME

    def test_json_round_trip(self):
        report = GapReport(config=CampaignConfig(trials=1, dims=[2]), cells=[
            CellResult(check="theorem", dim=2, p=2.5, kind="singular", trials=1, min_gap=1e-3, extra={"scale": 2.0}),
        ])
        assert GapReport.model_validate_json(report.model_dump_json()) == report
