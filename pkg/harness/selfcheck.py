"""Oracle suite behind the `validate` subcommand."""

from typing import Callable, NamedTuple

from instance import sample_weights
from kasteleyn import count_tilings_dp, count_tilings_product
from lattice import LatticeKind, build_lattice, validate_lattice
from matching.blossom import min_weight_perfect_matching
from matching.brute_force import brute_force_matching
from matching.hungarian import min_weight_perfect_matching_bipartite
from utils.errors import DimerLabError
from utils.logging import get_logger
from utils.rng import mix

logger = get_logger(__name__)

LATTICE_SIZES = (4, 8, 16)
SOLVER_INSTANCES = 50
SOLVER_SIZE = 4
COUNT_MAX_SIDE = 8


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_lattices() -> CheckResult:
    failures = []
    for kind in LatticeKind:
        for L in LATTICE_SIZES:
            violations = validate_lattice(build_lattice(kind, L))
            failures.extend(f"{kind}/{L} {v.invariant} at {v.element}: {v.detail}" for v in violations)
    return CheckResult("lattice invariants", not failures, "; ".join(failures[:5]) or f"{len(LatticeKind) * len(LATTICE_SIZES)} lattices")


def check_solvers(instances: int = SOLVER_INSTANCES, seed: int = 0) -> CheckResult:
    """Blossom against brute force on every kind, Hungarian against blossom on bipartite kinds."""
    failures = []
    for kind in LatticeKind:
        g = build_lattice(kind, SOLVER_SIZE)
        for index in range(instances):
            inst = sample_weights(g, mix(seed, kind.tag, SOLVER_SIZE), index)
            blossom = min_weight_perfect_matching(inst)
            oracle = brute_force_matching(inst).matching
            if blossom.edge_ids != oracle.edge_ids or blossom.cost != oracle.cost:
                failures.append(f"{kind}#{index}: blossom {blossom.cost!r} vs brute force {oracle.cost!r}")
            if g.bipartite:
                hungarian = min_weight_perfect_matching_bipartite(inst)
                if hungarian.edge_ids != blossom.edge_ids:
                    failures.append(f"{kind}#{index}: hungarian {hungarian.cost!r} vs blossom {blossom.cost!r}")
    return CheckResult("matching solvers", not failures, "; ".join(failures[:5]) or f"{instances} instances per kind")


def check_counts(max_side: int = COUNT_MAX_SIDE) -> CheckResult:
    failures = []
    for m in range(1, max_side + 1):
        for n in range(1, max_side + 1):
            if (m * n) % 2:
                continue
            dp, product = count_tilings_dp(m, n), count_tilings_product(m, n)
            if round(product) != dp:
                failures.append(f"{m}x{n}: dp {dp} vs product {product!r}")
    return CheckResult("tiling counts", not failures, "; ".join(failures[:5]) or f"all even areas up to {max_side}x{max_side}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (check_lattices, check_solvers, check_counts)


def run_selfcheck() -> list[CheckResult]:
    """Run every check; a check that raises counts as failed."""
    results = []
    for check in CHECKS:
        try:
            result = check()
        except DimerLabError as e:
            logger.exception(f"Check {check.__name__} raised: {e}")
            result = CheckResult(check.__name__, False, f"{type(e).__name__}: {e}")
        level = "PASS" if result.passed else "FAIL"
        logger.info(f"{level} {result.name}: {result.detail}")
        results.append(result)
    return results
