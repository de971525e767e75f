"""
counterexample: two-atom search showing Id - E is not L_p contractive for p < 2
"""

import argparse
from fractions import Fraction

from app.core.exceptions import ConfigError
from app.services.lab import counterexample_search, exact_l1_ratio

# mu = 1/4, x = (1, 0) gives |x - Ex|_1 / |x|_1 = 3/2
GOLDEN_WEIGHT = Fraction(1, 4)
GOLDEN_VALUES = (Fraction(1), Fraction(0))


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("counterexample", help="Search for |x - Ex|_p > |x|_p with p < 2.")
    parser.add_argument("--p", type=float, required=True, help="Exponent in [1, 2).")
    parser.add_argument("--budget", type=int, default=None, help="Refinement evaluations after the grid.")
    parser.add_argument("--grid", type=int, default=64, help="Grid points per axis.")
    parser.set_defaults(run=run)
    return parser


def run(args: argparse.Namespace) -> int:
    if not 1.0 <= args.p < 2.0:
        raise ConfigError(f"counterexample needs --p in [1, 2), got {args.p}")
    if args.grid < 2:
        raise ConfigError(f"--grid must be at least 2, got {args.grid}")
    result = counterexample_search(args.p, budget=args.budget, grid=args.grid)
    mu, x2 = result.weights[0], result.values[1]

    print(f"p = {result.p:g}")
    print(f"ratio |x - Ex|_p / |x|_p = {result.ratio:.12f}")
    print(f"witness: mu = ({mu:.12f}, {1.0 - mu:.12f}), x = (1, {x2:.12f})")
    print(f"evaluations: {result.evaluations}  refinement steps: {len(result.trace) - 1}")
    if args.p == 1.0:
        exact = exact_l1_ratio(Fraction(mu), (Fraction(1), Fraction(x2)))
        golden = exact_l1_ratio(GOLDEN_WEIGHT, GOLDEN_VALUES)
        print(f"exact ratio at witness: {float(exact):.12f}")
        print(f"exact ratio at mu = {GOLDEN_WEIGHT}, x = (1, 0): {golden}")
        return 0 if result.ratio >= 1.49 else 1
    return 0 if result.exceeds_one else 1
