"""
semigroup: generator invariants, resolvent against its Laplace oracle,
resolvent defect and the t -> infinity approximation residuals
"""

import argparse

import numpy as np
from pydantic import TypeAdapter

from app.core.config import settings
from app.core.exceptions import ConfigError, InvariantViolation
from app.schemas.generator import GeneratorSpec
from app.services.campaign_runner import GENERATOR_FAMILIES, ORACLE_TOL, family_generator
from app.services.matcore import random_psd
from app.services.semigroups import (
    check_invariants,
    check_resolvent_invariants,
    generator_from_spec,
    laplace_resolvent_oracle,
    resolvent,
    resolvent_defect_check,
    resolvent_limit_check,
)

DEFECT_SLACK = 1e-9


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("semigroup", help="Semigroup and resolvent checks for one generator.")
    parser.add_argument("--kind", choices=GENERATOR_FAMILIES, default="unitary_mixing", help="Generator family.")
    parser.add_argument("--spec", type=str, default=None,
                        help="Inline JSON generator spec; replaces --kind and --dim.")
    parser.add_argument("--lam", type=float, default=1.0, help="Resolvent parameter lambda > 0.")
    parser.add_argument("--p", type=float, default=2.0, help="Exponent p >= 2.")
    parser.add_argument("--dim", type=int, default=3, help="Matrix dimension.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for the generator and the input x.")
    parser.set_defaults(run=run)
    return parser


def _generator(args: argparse.Namespace, seed: int):
    if args.spec:
        spec = TypeAdapter(GeneratorSpec).validate_json(args.spec)
        return generator_from_spec(spec)
    return family_generator(args.kind, args.dim, seed)


def run(args: argparse.Namespace) -> int:
    if args.lam <= 0:
        raise ConfigError(f"--lam must be positive, got {args.lam}")
    if args.p < 2.0:
        raise ConfigError(f"--p must be at least 2, got {args.p}")
    if args.dim < 1:
        raise ConfigError(f"--dim must be positive, got {args.dim}")
    seed = settings.SEED if args.seed is None else args.seed
    generator = _generator(args, seed)
    x = random_psd(generator.dim, seed, "generic", 1)
    print(f"generator: {generator.kind}  dim = {generator.dim}  lambda = {args.lam:g}  p = {args.p:g}  seed = {seed}")

    try:
        invariants = check_invariants(generator, seed=seed)
        res = resolvent(generator, args.lam)
        resolvent_invariants = check_resolvent_invariants(res, seed=seed)
    except InvariantViolation as e:
        print(f"invariant violated: {e}")
        return 1
    for name, value in invariants.items():
        print(f"  generator {name:<12} {value: .3e}")
    for name, value in resolvent_invariants.items():
        print(f"  resolvent {name:<12} {value: .3e}")

    oracle = laplace_resolvent_oracle(generator, args.lam, x)
    direct = res.operator.apply(x.entries)
    oracle_error = float(np.linalg.norm(direct - oracle) / max(np.linalg.norm(direct), 1e-300))
    print(f"  Laplace oracle rel. difference {oracle_error:.3e} (tol {ORACLE_TOL:.0e})")

    defect = resolvent_defect_check(generator, args.lam, x, args.p)
    scale = max(1.0, defect.input_norm ** args.p)
    print(f"  |x - lambda R x|_p = {defect.defect_norm:.6e}  |x|_p = {defect.input_norm:.6e}")
    print(f"  cross term tau((x - lambda R x)(lambda R x)^(p-1)) = {defect.cross_term:.6e}")

    limit = resolvent_limit_check(generator, args.lam, x, p=args.p)
    print(f"  {'t':>8} {'residual':>12} {'contraction':>14} {'cross':>12}")
    for t, residual, contraction, cross in zip(limit.ts, limit.residuals, limit.contraction_terms, limit.cross_terms):
        print(f"  {t:>8.0e} {residual:>12.3e} {contraction:>14.6e} {cross:>12.3e}")
    print(f"  reference |R x|_p^p = {limit.reference_power:.6e}  monotone: {limit.monotone()}")

    ok = oracle_error <= ORACLE_TOL and defect.holds(scale, DEFECT_SLACK) and limit.monotone()
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1
