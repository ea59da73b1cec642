"""Script for perturbing a ground state and re-solving.

Three excitations are supported: removing the heaviest ground-state edge,
removing a uniformly chosen ground-state edge, and penalising every
ground-state edge by epsilon.
"""

import math
from dataclasses import dataclass
from typing import Callable, Collection, Sequence

import numpy as np

from instance import WeightedInstance
from matching.blossom import min_weight_perfect_matching
from matching.models import Matching
from utils.errors import NonFiniteWeight, OptimalityViolation
from utils.logging import get_logger
from utils.rng import LINK_STREAM, mix, stream

logger = get_logger(__name__)

Solver = Callable[..., Matching]

EPSILON_MIN = 0.01
EPSILON_MAX = 0.9
EPSILON_POINTS = 24
ENERGY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LinkExcitationResult:
    removed_edge: int
    ground: Matching
    excited: Matching
    delta_e: float


@dataclass(frozen=True)
class EpsilonExcitationResult:
    epsilon: float
    ground: Matching
    excited: Matching
    delta_e: float
    overlap: float
    distance: float


def energy_difference(weights: np.ndarray, excited: Matching, ground: Matching) -> float:
    """Sum over edges of (n_e^excited - n_e^ground) * w_e, correctly rounded."""
    gained = sorted(excited.edge_ids - ground.edge_ids)
    lost = sorted(ground.edge_ids - excited.edge_ids)
    return math.fsum([float(weights[e]) for e in gained] + [-float(weights[e]) for e in lost])


def _link_result(
    inst: WeightedInstance,
    ground: Matching,
    removed: int,
    solver: Solver,
    ) -> LinkExcitationResult:
    excited = solver(inst, forbidden={removed})
    delta_e = energy_difference(inst.weights, excited, ground)
    if removed in excited:
        raise OptimalityViolation(f"Excited matching still uses removed edge {removed}")
    if delta_e < 0:
        raise OptimalityViolation(f"Negative excitation energy {delta_e} after removing edge {removed}")
    return LinkExcitationResult(removed_edge=removed, ground=ground, excited=excited, delta_e=delta_e)


def max_weight_excite(
    inst: WeightedInstance,
    ground: Matching,
    solver: Solver = min_weight_perfect_matching,
    ) -> LinkExcitationResult:
    """Remove the heaviest ground-state edge and re-solve.

    Args:
        inst: Weighted instance.
        ground: Its verified optimum.
        solver: Exact solver accepting `forbidden`.

    Returns:
        The removed edge, both matchings and the energy gap.
    """
    ids = ground.sorted_ids
    removed = max(ids, key=lambda e: (inst.weights[e], -e))
    return _link_result(inst, ground, removed, solver)


def link_substream(inst: WeightedInstance) -> np.random.Generator:
    """Dedicated generator for choosing the removed edge of one instance."""
    return stream(mix(inst.stream_seed, LINK_STREAM))


def random_link_excite(
    inst: WeightedInstance,
    ground: Matching,
    rng_stream: np.random.Generator,
    solver: Solver = min_weight_perfect_matching,
    ) -> LinkExcitationResult:
    """Remove a uniformly chosen ground-state edge and re-solve."""
    ids = ground.sorted_ids
    removed = ids[int(rng_stream.integers(len(ids)))]
    return _link_result(inst, ground, removed, solver)


def epsilon_excite(
    inst: WeightedInstance,
    ground: Matching,
    epsilon: float,
    solver: Solver = min_weight_perfect_matching,
    ) -> EpsilonExcitationResult:
    """Penalise every ground-state edge by epsilon and re-solve.

    The solver minimizes w_e + epsilon * n_e; `delta_e` reports the change in
    original weights only, and `overlap` is the shared fraction of edges
    relative to |ground|.

    Args:
        inst: Weighted instance.
        ground: Its verified optimum.
        epsilon: Finite, non-negative penalty.
        solver: Exact solver accepting `penalties`.

    Returns:
        The epsilon-ground state with overlap and distance.
    """
    if not math.isfinite(epsilon):
        raise NonFiniteWeight(f"Epsilon must be finite, got {epsilon}")
    if epsilon < 0:
        raise ValueError(f"Epsilon must be non-negative, got {epsilon}")

    if epsilon == 0:
        excited = ground
    else:
        penalties = epsilon * ground.indicator(inst.graph.num_edges).astype(np.float64)
        excited = solver(inst, penalties=penalties)

    delta_e = energy_difference(inst.weights, excited, ground)
    if delta_e < -ENERGY_TOLERANCE:
        raise OptimalityViolation(f"Epsilon state at {epsilon} undercuts the ground state by {-delta_e}")
    overlap = len(excited.edge_ids & ground.edge_ids) / len(ground) if len(ground) else 1.0
    return EpsilonExcitationResult(
        epsilon=float(epsilon),
        ground=ground,
        excited=excited,
        delta_e=delta_e,
        overlap=overlap,
        distance=1.0 - overlap,
    )


def epsilon_grid(
    lo: float = EPSILON_MIN,
    hi: float = EPSILON_MAX,
    points: int = EPSILON_POINTS,
    ) -> np.ndarray:
    """Geometric grid, denser towards zero."""
    return np.geomspace(lo, hi, points)


def epsilon_sweep(
    inst: WeightedInstance,
    ground: Matching,
    grid: Sequence[float],
    solver: Solver = min_weight_perfect_matching,
    ) -> list[EpsilonExcitationResult]:
    """Run epsilon_excite across an increasing grid and check monotonicity.

    Raises:
        OptimalityViolation: Overlap grew or the energy gap shrank with epsilon.
    """
    results = [epsilon_excite(inst, ground, eps, solver) for eps in grid]
    for before, after in zip(results, results[1:]):
        if after.epsilon <= before.epsilon:
            raise ValueError(f"Epsilon grid must be strictly increasing at {after.epsilon}")
        if after.overlap > before.overlap:
            raise OptimalityViolation(
                f"Overlap rose from {before.overlap} to {after.overlap} between "
                f"epsilon {before.epsilon} and {after.epsilon}"
            )
        if after.delta_e < before.delta_e - ENERGY_TOLERANCE:
            raise OptimalityViolation(
                f"Energy gap fell from {before.delta_e} to {after.delta_e} between "
                f"epsilon {before.epsilon} and {after.epsilon}"
            )
    return results


def departure_threshold(results: Collection[EpsilonExcitationResult]) -> float | None:
    """Smallest epsilon whose state differs from the ground state, or None."""
    moved = [r.epsilon for r in results if r.distance > 0]
    return min(moved) if moved else None
