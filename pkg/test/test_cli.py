"""
Tests for the nclp command-line router and its subcommands
"""

import json

import pytest

from app.cli.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, build_parser, main
from app.cli.commands import derivative
from app.cli.commands.check import tolerance_provenance
from app.core.exceptions import ContourError, QuadratureError

SMALL = {
    "seed": 3,
    "trials": 2,
    "heavy_trials": 1,
    "dims": [2],
    "p_grid": [2.0, 3.0],
    "sub2_grid": [1.0],
    "checks": ["classical", "theorem", "duality", "case2_identity"],
    "counterexample_budget": 100,
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "campaign.json"
    path.write_text(json.dumps(SMALL), encoding="utf-8")
    return str(path)


def _literal(diag):
    n = len(diag)
    return {
        "dim": n,
        "re": [[diag[i] if i == j else 0.0 for j in range(n)] for i in range(n)],
        "im": [[0.0] * n for _ in range(n)],
    }


class TestRouter:
    def test_every_command_is_registered(self):
        parser = build_parser()
        for command in ("verify", "sweep", "counterexample", "derivative", "semigroup", "check"):
            extra = {"counterexample": ["--p", "1"], "check": ["theorem_gap", "--operands", "{}"]}.get(command, [])
            assert parser.parse_args([command] + extra).command == command

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_unknown_flag(self):
        assert main(["verify", "--bogus"]) == EXIT_USAGE

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "verify" in capsys.readouterr().out

    def test_negative_threads(self):
        assert main(["--threads", "-1", "verify", "--trials", "0"]) == EXIT_USAGE


class TestVerify:
    def test_passes_and_writes_report(self, config_file, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(["--quiet", "verify", "--config", config_file, "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["config"]["seed"] == 3
        assert report["cells"]
        assert capsys.readouterr().out.rstrip().endswith(f"report: {out}")

    def test_flags_override_config_file(self, config_file, tmp_path):
        out = tmp_path / "report.json"
        assert main(["verify", "--config", config_file, "--seed", "11", "--dims", "3", "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["config"]["seed"] == 11
        assert {cell["dim"] for cell in report["cells"]} == {3}

    def test_p_below_two_is_a_usage_error(self, config_file, tmp_path):
        assert main(["verify", "--config", config_file, "--p-grid", "1.5", "--out", str(tmp_path / "r.json")]) == EXIT_USAGE

    def test_zero_trials(self, tmp_path):
        out = tmp_path / "empty.json"
        assert main(["verify", "--trials", "0", "--out", str(out)]) == EXIT_OK
        assert json.loads(out.read_text(encoding="utf-8"))["cells"] == []

    def test_injected_fault_fails(self, config_file, tmp_path, capsys):
        out = tmp_path / "fault.json"
        assert main(["verify", "--config", config_file, "--inject-fault", "--out", str(out)]) == EXIT_FAILURE
        assert "corrupted" in capsys.readouterr().out
        failures = [f for cell in json.loads(out.read_text(encoding="utf-8"))["cells"] for f in cell["failures"]]
        assert failures and failures[0]["seed"] == 3

    def test_missing_config_file(self, tmp_path):
        assert main(["verify", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"trials": 1, "colour": "red"}), encoding="utf-8")
        assert main(["verify", "--config", str(path), "--out", str(tmp_path / "r.json")]) == EXIT_USAGE

    def test_csv_format(self, config_file, tmp_path):
        out = tmp_path / "report.csv"
        assert main(["verify", "--config", config_file, "--format", "csv", "--out", str(out)]) == EXIT_OK
        assert out.read_text(encoding="utf-8").startswith("check,dim,p,kind,trials")


class TestSweep:
    def test_table_is_reproducible(self, config_file, tmp_path, capsys):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["sweep", "--config", config_file, "--dims", "2,3", "--p-grid", "2,3,4"]
        assert main(args + ["--out", str(first)]) == EXIT_OK
        assert main(args + ["--out", str(second)]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()
        assert len(first.read_text(encoding="utf-8").splitlines()) == 7
        assert "rows: 6  failures: 0" in capsys.readouterr().out

    def test_bad_grid(self, tmp_path):
        assert main(["sweep", "--dims", "2,x", "--out", str(tmp_path / "s.csv")]) == EXIT_USAGE


class TestCounterexample:
    def test_l1_ratio(self, capsys):
        assert main(["counterexample", "--p", "1", "--budget", "300"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "ratio |x - Ex|_p / |x|_p" in out
        assert "x = (1, 0): 3/2" in out

    def test_p_between_one_and_two(self):
        assert main(["counterexample", "--p", "1.5", "--budget", "300"]) == EXIT_OK

    def test_p_out_of_range(self):
        assert main(["counterexample", "--p", "2.5"]) == EXIT_USAGE

    def test_p_is_required(self):
        assert main(["counterexample"]) == EXIT_USAGE


class TestDerivative:
    def test_methods_agree(self, capsys):
        assert main(["derivative", "--dim", "3", "--p", "3.5", "--seed", "4"]) == EXIT_OK
        out = capsys.readouterr().out
        for method in ("superop_integral", "contour", "finite_difference"):
            assert method in out
        assert "FAIL" not in out

    @pytest.mark.parametrize(
        "error",
        [ContourError("Spectrum lies outside or too close to the contour", -0.1), QuadratureError("window too narrow")],
    )
    def test_numerical_errors_exit_with_usage(self, monkeypatch, capsys, error):
        def failing(x, h, p):
            raise error

        monkeypatch.setattr(derivative, "frechet_agreement", failing)
        assert main(["derivative", "--dim", "2", "--p", "3.0"]) == EXIT_USAGE
        assert type(error).__name__ in capsys.readouterr().err


class TestSemigroup:
    def test_unitary_mixing(self, capsys):
        assert main(["semigroup", "--seed", "2"]) == EXIT_OK
        assert capsys.readouterr().out.rstrip().endswith("PASS")

    def test_pinching_spec(self):
        spec = json.dumps({"kind": "pinching", "expectation": {"kind": "blocks", "sizes": [1, 2]}})
        assert main(["semigroup", "--spec", spec, "--p", "2.5", "--seed", "2"]) == EXIT_OK

    def test_bad_spec(self):
        assert main(["semigroup", "--spec", '{"kind": "unitary_mixing", "count": 2, "rates": [1.0]}']) == EXIT_USAGE

    def test_p_below_two(self):
        assert main(["semigroup", "--p", "1.5"]) == EXIT_USAGE


class TestCheck:
    def test_equal_operands_have_zero_gap(self, capsys):
        operands = json.dumps({"a": _literal([1.0, 2.0]), "b": _literal([1.0, 2.0]), "p": 3.0})
        assert main(["check", "theorem_gap", "--operands", operands]) == EXIT_OK
        out = capsys.readouterr().out
        gap = next(line for line in out.splitlines() if line.strip().startswith("gap = "))
        assert abs(float(gap.split("=")[1])) <= 1e-12
        assert "tolerance:" in out

    def test_scalar_golden_value(self, capsys):
        operands = json.dumps({"a": 2.0, "b": 1.0, "p": 3.0})
        assert main(["check", "classical_pointwise_check", "--operands", operands, "--tol", "1e-6"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "pointwise_gap = 2.000000000000e+00" in out
        assert "(flag --tol)" in out

    def test_contraction(self, capsys):
        operands = json.dumps({"x": _literal([1.0, 0.0]), "expectation": {"kind": "blocks", "sizes": [1, 1]}, "p": 2.0})
        assert main(["check", "corollary1_ratio", "--operands", operands]) == EXIT_OK

    def test_contraction_dimension_mismatch(self):
        operands = json.dumps({"x": _literal([1.0, 0.0]), "expectation": {"kind": "blocks", "sizes": [3]}, "p": 2.0})
        assert main(["check", "corollary1_ratio", "--operands", operands]) == EXIT_USAGE

    def test_malformed_operands(self):
        assert main(["check", "theorem_gap", "--operands", '{"a": 1}']) == EXIT_USAGE

    def test_not_positive(self):
        operands = json.dumps({"a": _literal([-1.0, 2.0]), "b": _literal([1.0, 2.0]), "p": 3.0})
        assert main(["check", "theorem_gap", "--operands", operands]) == EXIT_USAGE

    def test_tolerance_provenance(self, monkeypatch):
        assert tolerance_provenance(1e-3) == (1e-3, "flag --tol")
        monkeypatch.delenv("NCLP_REL_SLACK", raising=False)
        assert tolerance_provenance()[1] == "settings.REL_SLACK default"
        monkeypatch.setenv("NCLP_REL_SLACK", "1e-7")
        assert tolerance_provenance()[1] == "environment NCLP_REL_SLACK"
