"""
derivative: four-method agreement table for the Frechet derivative of x -> x^p
"""

import argparse

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.services.lab import frechet_agreement
from app.services.matcore import random_hermitian, random_psd

# relative tolerance against divided differences; finite differences use --fd-tol
METHOD_TOL = 1e-7
EULER_TOL = 1e-9


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("derivative", help="Cross-check Frechet derivative methods.")
    parser.add_argument("--dim", type=int, default=3, help="Matrix dimension.")
    parser.add_argument("--p", type=float, default=3.5, help="Exponent p >= 1.")
    parser.add_argument("--seed", type=int, default=None, help="Seed for x and the direction h.")
    parser.add_argument("--fd-tol", type=float, default=None, dest="fd_tol",
                        help="Finite-difference tolerance (default: settings.DERIVATIVE_TOL).")
    parser.set_defaults(run=run)
    return parser


def run(args: argparse.Namespace) -> int:
    if args.dim < 1:
        raise ConfigError(f"--dim must be positive, got {args.dim}")
    if args.p < 1.0:
        raise ConfigError(f"--p must be at least 1, got {args.p}")
    seed = settings.SEED if args.seed is None else args.seed
    fd_tol = settings.DERIVATIVE_TOL if args.fd_tol is None else args.fd_tol
    x = random_psd(args.dim, seed, "spectral-gap", 0)
    h = random_hermitian(args.dim, seed, 1)
    agreement = frechet_agreement(x, h, args.p)

    rows = [(method, value, fd_tol if method == "finite_difference" else METHOD_TOL)
            for method, value in agreement.differences.items()]
    rows.append(("euler_relation", agreement.euler_residual, EULER_TOL))

    print(f"dim = {args.dim}  p = {args.p:g}  seed = {seed}  reference = {agreement.reference}")
    print(f"{'method':<20} {'rel. difference':>16} {'tolerance':>10}  status")
    ok = True
    for method, value, tol in rows:
        passed = value <= tol
        ok = ok and passed
        print(f"{method:<20} {value:>16.3e} {tol:>10.0e}  {'ok' if passed else 'FAIL'}")
    return 0 if ok else 1
