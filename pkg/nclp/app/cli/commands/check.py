"""
check: run one lab operation on inline JSON operands

    python main.py check theorem_gap --operands '{"a": {...}, "b": {...}, "p": 3}'

Inputs are echoed back together with the tolerance in force and where it came
from (flag, environment or settings default).
"""

import argparse
import os
from typing import Callable, Dict, Optional, Tuple

from pydantic import BaseModel

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.operands import ContractionOperands, NormOperands, PairOperands, ScalarPairOperands
from app.services import lab
from app.services.expectations import expectation_from_spec
from app.services.matcore import HermitianMatrix, PositiveMatrix, schatten_norm


def _pair(operands: PairOperands):
    return PositiveMatrix.from_literal(operands.a), PositiveMatrix.from_literal(operands.b)


def _theorem_gap(operands: PairOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    a, b = _pair(operands)
    gap = lab.theorem_gap(a, b, operands.p)
    scale = lab.pair_scale(a, b, operands.p)
    return {"gap": gap, "normalized_gap": lab.normalized_gap(gap, a - b, operands.p), "scale": scale}, gap >= -tol * scale


def _duality(operands: PairOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    a, b = _pair(operands)
    value = lab.duality_monotonicity_check(a, b, operands.p)
    scale = lab.pair_scale(a, b, operands.p)
    return {"monotonicity_gap": value, "scale": scale}, value >= -tol * scale


def _classical(operands: ScalarPairOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    value = lab.classical_pointwise_check(operands.a, operands.b, operands.p)
    scale = max(1.0, operands.a ** operands.p + operands.b ** operands.p)
    return {"pointwise_gap": value}, value >= -tol * scale


def _corollary1(operands: ContractionOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    x = PositiveMatrix.from_literal(operands.x)
    expectation = expectation_from_spec(operands.expectation)
    if expectation.dim != x.dim:
        raise ConfigError(f"Expectation acts in dim {expectation.dim}, x has dim {x.dim}")
    ratio = lab.corollary1_ratio(x, expectation, operands.p)
    return {"ratio": ratio}, ratio <= 1.0 + tol


def _case2_identity(operands: PairOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    a, b = _pair(operands)
    residual = lab.case2_identity_check(a, b, operands.p)
    scale = lab.pair_scale(a, b, operands.p)
    return {"residual": residual, "scale": scale}, abs(residual) <= tol * scale


def _case1b(operands: PairOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    a, b = _pair(operands)
    result = lab.case1b_decomposition_check(a, b, operands.p)
    values = {f"T{i + 1}": term for i, term in enumerate(result.terms)}
    values["identity_residual"] = result.identity_residual
    values["scale"] = result.scale
    slack = tol * result.scale
    passed = abs(result.identity_residual) <= slack and min(result.cross_terms) >= -slack
    return values, passed


def _schatten(operands: NormOperands, tol: float) -> Tuple[Dict[str, float], bool]:
    x = HermitianMatrix.from_literal(operands.x)
    return {"norm": schatten_norm(x, operands.p)}, True


OPERATIONS: Dict[str, Tuple[type, Callable[[BaseModel, float], Tuple[Dict[str, float], bool]]]] = {
    "theorem_gap": (PairOperands, _theorem_gap),
    "duality_monotonicity_check": (PairOperands, _duality),
    "classical_pointwise_check": (ScalarPairOperands, _classical),
    "corollary1_ratio": (ContractionOperands, _corollary1),
    "case2_identity_check": (PairOperands, _case2_identity),
    "case1b_decomposition_check": (PairOperands, _case1b),
    "schatten_norm": (NormOperands, _schatten),
}


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("check", help="Run one lab operation on inline JSON operands.")
    parser.add_argument("name", choices=sorted(OPERATIONS), help="Lab operation.")
    parser.add_argument("--operands", type=str, required=True, help="JSON object with the operation's operands.")
    parser.add_argument("--tol", type=float, default=None, help="Relative slack (default: settings.REL_SLACK).")
    parser.set_defaults(run=run)
    return parser


def tolerance_provenance(flag: Optional[float] = None) -> Tuple[float, str]:
    if flag is not None:
        return flag, "flag --tol"
    if "NCLP_REL_SLACK" in os.environ:
        return settings.REL_SLACK, "environment NCLP_REL_SLACK"
    return settings.REL_SLACK, "settings.REL_SLACK default"


def run(args: argparse.Namespace) -> int:
    schema, operation = OPERATIONS[args.name]
    operands = schema.model_validate_json(args.operands)
    tol, source = tolerance_provenance(args.tol)

    print(f"operation: {args.name}")
    print(f"operands: {operands.model_dump_json()}")
    print(f"tolerance: {tol:g} ({source})")
    values, passed = operation(operands, tol)
    for key, value in values.items():
        print(f"  {key} = {value:.12e}")
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1
