"""
Campaign runner: expands a CampaignConfig into (check, dim, p, kind) cells,
runs seeded trials per cell and reduces them into a GapReport
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from app.core.config import settings
from app.core.exceptions import GeneratorError, InvariantViolation, LabError
from app.schemas.campaign import CHECK_NAMES, CampaignConfig, CellResult, FailureRecord, GapReport
from app.services import lab
from app.services.expectations import block_projections, ce_block_pinching, ce_spectral_averaging
from app.services.matcore import (
    HermitianMatrix,
    PositiveMatrix,
    WeightedAtoms,
    make_rng,
    random_hermitian,
    random_psd,
    random_unitary,
    schatten_norm,
    schatten_power,
)
from app.services.semigroups import (
    check_resolvent_invariants,
    laplace_resolvent_oracle,
    make_pinching_generator,
    make_unitary_mixing_generator,
    random_unitary_mixing,
    resolvent,
    resolvent_defect_check,
)

logger = logging.getLogger(__name__)

HEAVY_CHECKS = ("alt_proof", "frechet", "corollary2", "concavity_reversal")
GENERATOR_FAMILIES = ("zero", "unitary_mixing", "pinching")
RESOLVENT_LAMBDAS = (0.1, 1.0, 10.0)
ORACLE_TOL = 1e-6
CORRUPTED_KIND = "corrupted"

_PSD_KIND = {"generic": "generic", "singular": "singular", "commuting": "commuting-pair"}


@dataclass(frozen=True)
class Cell:
    index: int
    check: str
    dim: int
    p: float
    kinds: Tuple[str, ...]
    trials: int

    @property
    def label(self) -> str:
        return "+".join(self.kinds)

    def stream(self, trial: int) -> int:
        return (self.index << 32) | trial

    def kind(self, trial: int) -> str:
        return self.kinds[trial % len(self.kinds)]


@dataclass
class TrialOutcome:
    """
    gap: headline quantity of the check (raw); normalized: its scale-free
    form; assertions: (name, normalized value, threshold) triples that must
    satisfy value >= -threshold
    """

    gap: float
    normalized: float
    assertions: List[Tuple[str, float, float]] = field(default_factory=list)
    extra: Dict[str, float] = field(default_factory=dict)


def instance_pair(seed: int, kind: str, dim: int, stream: int) -> Tuple[HermitianMatrix, HermitianMatrix]:
    if kind == "commuting":
        return random_psd(dim, seed, "commuting-pair", stream)
    if kind == CORRUPTED_KIND:
        a = random_psd(dim, seed, "generic", 2 * stream)
        corrupted = HermitianMatrix._wrap(a.entries - 2.0 * a.norm_inf() * np.eye(dim))
        return corrupted, random_psd(dim, seed, "generic", 2 * stream + 1)
    return random_psd(dim, seed, _PSD_KIND[kind], 2 * stream), random_psd(dim, seed, _PSD_KIND[kind], 2 * stream + 1)


def _scaled(gap: float, denominator: float) -> float:
    return gap / denominator if denominator > 0 else gap


def _classical_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    rng = make_rng(config.seed, stream)
    weights = rng.uniform(0.1, 1.0, size=cell.dim)
    f = WeightedAtoms(weights, rng.exponential(2.0, size=cell.dim))
    g = WeightedAtoms(weights, rng.exponential(2.0, size=cell.dim))
    gap = lab.integrated_classical_gap(f, g, cell.p)
    normalized = _scaled(gap, float(np.sum(weights * np.abs(f.values - g.values) ** cell.p)))
    return TrialOutcome(gap, normalized, [("classical_gap", normalized, config.rel_slack)])


def _theorem_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    gap = lab.theorem_gap(a, b, cell.p)
    scale = lab.pair_scale(a, b, cell.p)
    delta_power = schatten_power(a - b, cell.p)
    normalized = _scaled(gap, delta_power)
    assertions = [("theorem_gap", gap / scale, config.rel_slack)]
    if cell.p == 2.0:
        assertions.append(("p2_equality", -abs(gap) / scale, 1e-11))
    return TrialOutcome(gap, normalized, assertions)


def _duality_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    value = lab.duality_monotonicity_check(a, b, cell.p)
    scale = lab.pair_scale(a, b, cell.p)
    return TrialOutcome(value, _scaled(value, schatten_power(a - b, cell.p)), [("duality_gap", value / scale, config.rel_slack)])


def _case1a_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    b, delta = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    result = lab.case1a_step_check(b, delta, cell.p - 2.0)
    delta_scale = max(1.0, delta.norm_inf() ** 2)
    normalized = result.min_residual / result.scale
    return TrialOutcome(
        result.min_residual,
        normalized,
        [
            ("pointwise_residual", normalized, 1e-10),
            ("integrated_residual", result.integrated_residual / result.scale, 1e-10),
            ("resolvent_order", result.resolvent_order_floor / delta_scale, 1e-10),
            ("inverse_order", result.inverse_order_floor * min(result.ts), 1e-10),
        ],
    )


def _case1b_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    result = lab.case1b_decomposition_check(a, b, cell.p)
    s = result.scale
    cross = min(result.cross_terms)
    return TrialOutcome(
        cross,
        cross / s,
        [
            ("identity_residual", -result.identity_residual / s, 1e-10),
            ("cross_term_lower", result.cross_terms[0] / s, 1e-9),
            ("cross_term_upper", result.cross_terms[1] / s, 1e-9),
            ("case1a_minus", result.consequences[0] / s, 1e-9),
            ("case1a_plus", result.consequences[1] / s, 1e-9),
        ],
    )


def _case2_identity_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    residual = lab.case2_identity_check(a, b, cell.p)
    normalized = -residual / lab.pair_scale(a, b, cell.p)
    return TrialOutcome(-residual, normalized, [("induction_identity", normalized, 1e-9)])


def _case2_chain_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    chain = lab.case2_conclusion_check(a, b, cell.p)
    s = chain.scale
    support_scale = max(1.0, a.norm_inf() + b.norm_inf())
    assertions = [(name, value / s, 1e-9) for name, value in sorted(chain.links.items())]
    assertions.append(("support_b", chain.support_floors[0] / support_scale, 1e-9))
    assertions.append(("support_a", chain.support_floors[1] / support_scale, 1e-9))
    assertions.append(("terminal_identity", -chain.terminal_residual / s, 1e-10))
    assertions.append(("bound_order", (chain.upper_value - chain.lower_bound) / s, 1e-9))
    return TrialOutcome(chain.min_link, chain.min_link / s, assertions)


def _alt_proof_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    a, b = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    result = lab.alt_proof_check(a, b, cell.p, epsilon=config.epsilon)
    s = result.scale
    gap = min(result.chain.values())
    return TrialOutcome(
        gap,
        gap / s,
        [
            ("representation", -result.representation_residual, 1e-6),
            ("pinching", result.chain["pinching"] / s, 1e-9),
            ("commutative", result.chain["commutative"] / s, 1e-9),
            ("operator_jensen", result.jensen_floor, 1e-9),
        ],
        {"epsilon": result.epsilon},
    )


def _concavity_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    witness = lab.concavity_reversal_check(cell.p, seed=config.seed, dim=cell.dim, attempts=8, stream_offset=8 * stream)
    if not witness.found:
        raise InvariantViolation(
            "reversal_witness", witness.gap_min, -1e-6, f"no strict Jensen gap in {witness.attempts} draws"
        )
    return TrialOutcome(
        -witness.gap_max,
        -witness.gap_max,
        [("reversed_order", -witness.gap_max, 1e-9)],
        {"witness": 1.0, "reversal_gap": witness.gap_min},
    )


def _corollary1_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    x, _ = instance_pair(config.seed, cell.kind(trial), cell.dim, stream)
    rng = make_rng(config.seed, stream)
    if trial % 2 == 0:
        expectation = ce_spectral_averaging(random_hermitian(cell.dim, config.seed, 2 * stream + 1))
    else:
        split = 1 + trial % max(cell.dim - 1, 1)
        sizes = [split, cell.dim - split] if cell.dim > 1 else [1]
        expectation = ce_block_pinching(block_projections(sizes, random_unitary(cell.dim, rng)))
    ratio = lab.corollary1_ratio(x, expectation, cell.p)
    lhs, middle, rhs = lab.corollary1_holder_chain(x, expectation, cell.p)
    scale = max(1.0, schatten_power(x, cell.p))
    return TrialOutcome(
        1.0 - ratio,
        1.0 - ratio,
        [
            ("contraction", 1.0 - ratio, 1e-10),
            ("theorem_step", (middle - lhs) / scale, 1e-9),
            ("holder_step", (rhs - middle) / scale, 1e-9),
        ],
    )


def family_generator(family: str, dim: int, seed: int, stream: int = 0):
    """Generator of one of GENERATOR_FAMILIES with randomness from (seed, stream)"""
    if family not in GENERATOR_FAMILIES:
        raise GeneratorError(f"Unknown generator family '{family}', expected one of {GENERATOR_FAMILIES}")
    if family == "zero":
        return make_unitary_mixing_generator([np.eye(dim)], [1.0])
    if family == "unitary_mixing":
        return random_unitary_mixing(dim, 2, seed, stream=2 * stream + 1)
    return make_pinching_generator(ce_spectral_averaging(random_hermitian(dim, seed, 2 * stream + 1)))


def _corollary2_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    family = cell.kind(trial)
    lam = RESOLVENT_LAMBDAS[(trial // len(cell.kinds)) % len(RESOLVENT_LAMBDAS)]
    instance_kind = "generic" if trial % 2 == 0 else "singular"
    x = random_psd(cell.dim, config.seed, instance_kind, 2 * stream)
    generator = family_generator(family, cell.dim, config.seed, stream)
    res = resolvent(generator, lam)
    invariants = check_resolvent_invariants(res, seed=config.seed)
    direct = res.operator.apply(x.entries)
    oracle = laplace_resolvent_oracle(generator, lam, x)
    oracle_error = float(np.linalg.norm(direct - oracle) / max(np.linalg.norm(direct), 1e-300))
    defect = resolvent_defect_check(generator, lam, x, cell.p)
    averaged = PositiveMatrix.from_hermitian(res.scaled().apply_hermitian(x))
    contraction = _scaled(defect.input_norm - schatten_norm(averaged, cell.p), max(1.0, defect.input_norm))
    lhs, rhs = lab.corollary2_holder_chain(x, averaged, cell.p)
    scale = max(1.0, defect.input_norm ** cell.p)
    margin = defect.input_norm - defect.defect_norm
    normalized = _scaled(margin, defect.input_norm)
    return TrialOutcome(
        margin,
        normalized,
        [
            ("defect_contraction", normalized, 1e-9),
            ("cross_term", defect.cross_term / scale, 1e-9),
            ("holder_chain", (rhs - lhs) / scale, 1e-9),
            ("schatten_contraction", contraction, 1e-9),
            ("laplace_oracle", -oracle_error, ORACLE_TOL),
        ],
        {
            "lambda": lam,
            "laplace_oracle": oracle_error,
            "resolvent_trace": invariants["trace"],
            "resolvent_positivity": invariants["positivity"],
        },
    )


def _counterexample_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    result = lab.counterexample_search(cell.p, budget=config.counterexample_budget)
    assertions = []
    if cell.p == 1.0:
        assertions.append(("p1_ratio", result.ratio - 1.49, 0.0))
    return TrialOutcome(
        result.ratio - 1.0,
        result.ratio - 1.0,
        assertions,
        {"ratio": result.ratio, "mu": result.weights[0], "x2": result.values[1]},
    )


def _frechet_trial(config: CampaignConfig, cell: Cell, trial: int, stream: int) -> TrialOutcome:
    x = random_psd(cell.dim, config.seed, "spectral-gap", 2 * stream)
    h = random_hermitian(cell.dim, config.seed, 2 * stream + 1)
    agreement = lab.frechet_agreement(x, h, cell.p)
    worst = max(agreement.differences.values())
    return TrialOutcome(
        -worst,
        -worst,
        [
            ("superop_integral", -agreement.differences["superop_integral"], 1e-7),
            ("contour", -agreement.differences["contour"], 1e-7),
            ("finite_difference", -agreement.differences["finite_difference"], config.derivative_tol),
            ("euler_relation", -agreement.euler_residual, 1e-9),
        ],
    )


TRIALS: Dict[str, Callable[[CampaignConfig, Cell, int, int], TrialOutcome]] = {
    "classical": _classical_trial,
    "theorem": _theorem_trial,
    "case1a": _case1a_trial,
    "case1b": _case1b_trial,
    "case2_identity": _case2_identity_trial,
    "case2_chain": _case2_chain_trial,
    "alt_proof": _alt_proof_trial,
    "concavity_reversal": _concavity_trial,
    "duality": _duality_trial,
    "corollary1": _corollary1_trial,
    "corollary2": _corollary2_trial,
    "counterexample": _counterexample_trial,
    "frechet": _frechet_trial,
}


def _p_values(check: str, config: CampaignConfig) -> List[float]:
    grid = config.p_grid
    if check == "counterexample":
        return list(config.sub2_grid)
    if check in ("case1a", "case1b"):
        return [p for p in grid if 2.0 <= p <= 3.0]
    if check in ("case2_identity", "case2_chain"):
        return [p for p in grid if p >= 3.0]
    if check == "alt_proof":
        return [p for p in grid if 3.0 <= p <= 4.0]
    if check == "concavity_reversal":
        return [p for p in grid if 2.0 < p < 3.0]
    return list(grid)


def _kinds(check: str, config: CampaignConfig) -> List[Tuple[str, ...]]:
    if check in ("classical", "counterexample"):
        return [("atoms",)]
    if check == "frechet":
        return [("spectral-gap",)]
    if check == "concavity_reversal":
        return [("generic",)]
    if check == "corollary2":
        return [(family,) for family in GENERATOR_FAMILIES]
    return [(kind,) for kind in config.kinds]


def plan_cells(config: CampaignConfig, merge_kinds: bool = False) -> List[Cell]:
    """Deterministic cell list; cell order fixes the per-trial streams"""
    cells = []
    if config.trials == 0:
        return cells
    for check in CHECK_NAMES:
        if check not in config.checks:
            continue
        heavy = check in HEAVY_CHECKS
        trials = min(config.heavy_trials, config.trials) if heavy else config.trials
        dims = [d for d in config.dims if d <= config.heavy_max_dim] if heavy else list(config.dims)
        if check == "counterexample":
            dims, trials = [2], 1
        kind_groups = _kinds(check, config)
        if merge_kinds:
            kind_groups = [tuple(kind for group in kind_groups for kind in group)]
        for dim in dims:
            for p in _p_values(check, config):
                for kinds in kind_groups:
                    cells.append(Cell(len(cells), check, dim, float(p), kinds, trials))
    if config.inject_fault:
        cells.append(Cell(len(cells), "theorem", 2, float(config.p_grid[0]), (CORRUPTED_KIND,), 1))
    return cells


def _failure(config: CampaignConfig, cell: Cell, trial: int, stream: int, message: str,
             value: Optional[float] = None, threshold: Optional[float] = None) -> FailureRecord:
    return FailureRecord(
        check=cell.check,
        seed=config.seed,
        stream=stream,
        dim=cell.dim,
        p=cell.p,
        kind=cell.kind(trial),
        trial=trial,
        value=value,
        threshold=threshold,
        message=message,
    )


def run_cell(config: CampaignConfig, cell: Cell) -> CellResult:
    """Run every trial of a cell; lab errors become failure records"""
    run_trial = TRIALS[cell.check]
    gaps, normalized = [], []
    extras: Dict[str, List[float]] = {}
    failures = []
    for trial in range(cell.trials):
        stream = cell.stream(trial)
        try:
            outcome = run_trial(config, cell, trial, stream)
        except InvariantViolation as e:
            failures.append(_failure(config, cell, trial, stream, str(e), e.value, e.threshold))
            continue
        except LabError as e:
            failures.append(_failure(config, cell, trial, stream, f"{type(e).__name__}: {e}"))
            continue
        gaps.append(outcome.gap)
        normalized.append(outcome.normalized)
        for key, value in outcome.extra.items():
            extras.setdefault(key, []).append(value)
        for name, value, threshold in outcome.assertions:
            if not value >= -threshold:
                failures.append(
                    _failure(config, cell, trial, stream, f"{name}: {value:.6e} below -{threshold:.1e}", value, -threshold)
                )
    logger.debug("Cell %d %s dim=%d p=%.3f: %d trials, %d failures", cell.index, cell.check, cell.dim, cell.p,
                 cell.trials, len(failures))
    return CellResult(
        check=cell.check,
        dim=cell.dim,
        p=cell.p,
        kind=cell.label,
        trials=cell.trials,
        min_gap=float(min(gaps)) if gaps else None,
        median_gap=float(np.median(gaps)) if gaps else None,
        normalized_min_gap=float(min(normalized)) if normalized else None,
        failures=failures,
        extra={key: float(np.mean(values)) for key, values in sorted(extras.items())},
    )


def _n_jobs(threads: Optional[int]) -> int:
    threads = settings.THREADS if threads is None else threads
    return -1 if threads == 0 else threads


def run_cells(config: CampaignConfig, cells: Sequence[Cell], threads: Optional[int] = None,
              progress: bool = True) -> List[CellResult]:
    """Cells run through joblib; results come back in cell order"""
    if not cells:
        return []
    results = Parallel(n_jobs=_n_jobs(threads), return_as="generator")(
        delayed(run_cell)(config, cell) for cell in cells
    )
    return list(tqdm(results, total=len(cells), desc="cells", unit="cell", disable=not progress))


def run_campaign(config: CampaignConfig, threads: Optional[int] = None, progress: bool = False) -> GapReport:
    """
    Execute every configured check over its cells

    Args:
        config: validated campaign configuration
        threads: joblib workers (0 = all cores); settings.THREADS by default
        progress: show a tqdm progress bar

    Returns:
        GapReport with one CellResult per cell, in plan order
    """
    cells = plan_cells(config)
    logger.info("Running %d cells with seed %d", len(cells), config.seed)
    report = GapReport(config=config, cells=run_cells(config, cells, threads, progress))
    logger.info("Campaign finished: %d cells, %d failures", len(report.cells), report.failure_count)
    return report


def corollary2_check(config: CampaignConfig, threads: Optional[int] = None) -> GapReport:
    """Resolvent-defect cells over every generator family, lambda in {0.1, 1, 10}"""
    return run_campaign(config.model_copy(update={"checks": ["corollary2"]}), threads)


def sweep(config: CampaignConfig, threads: Optional[int] = None, progress: bool = False) -> GapReport:
    """Theorem cells over dims x p grid with all instance kinds merged into one row"""
    theorem_only = config.model_copy(update={"checks": ["theorem"]})
    cells = plan_cells(theorem_only, merge_kinds=True)
    return GapReport(config=theorem_only, cells=run_cells(theorem_only, cells, threads, progress))
