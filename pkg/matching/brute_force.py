"""Exhaustive enumeration of perfect matchings, used as an exact oracle."""

from typing import Collection

import numpy as np

from instance import WeightedInstance
from matching.models import BruteForceResult, make_matching
from matching.prepare import prepare
from utils.errors import NoPerfectMatching, TooLarge

MAX_VERTICES = 20


def brute_force_matching(
    inst: WeightedInstance,
    forbidden: Collection[int] = (),
    penalties: np.ndarray | None = None,
    ) -> BruteForceResult:
    """Enumerate every perfect matching and keep the cheapest.

    The lowest-id uncovered vertex is matched to each free neighbour in turn.
    Parallel edges are collapsed first, so the count is over the simple graph.

    Args:
        inst: Weighted instance with at most 20 vertices.
        forbidden: Edge ids that may not be used.
        penalties: Optional per-edge additive penalties.

    Returns:
        The optimum (by integerized effective weight, ties to the smaller
        sorted id tuple) and the number of perfect matchings.
    """
    n = inst.graph.num_vertices
    if n > MAX_VERTICES:
        raise TooLarge(f"Brute force is capped at {MAX_VERTICES} vertices, got {n}")

    sg = prepare(inst, forbidden, penalties)
    nbrs: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
    for (u, v), c, e in zip(sg.endpoints, sg.int_weights, sg.edge_ids):
        nbrs[u].append((v, c, e))
        nbrs[v].append((u, c, e))

    full = (1 << n) - 1
    count = 0
    best: tuple[int, tuple[int, ...]] | None = None
    chosen: list[int] = []

    def recurse(covered: int, total: int) -> None:
        nonlocal count, best
        if covered == full:
            count += 1
            candidate = (total, tuple(sorted(chosen)))
            if best is None or candidate < best:
                best = candidate
            return
        v = (~covered & full & -(~covered & full)).bit_length() - 1
        for w, c, e in nbrs[v]:
            if covered >> w & 1:
                continue
            chosen.append(e)
            recurse(covered | (1 << v) | (1 << w), total + c)
            chosen.pop()

    recurse(0, 0)
    if best is None:
        raise NoPerfectMatching(f"No perfect matching on {n} vertices with {len(set(forbidden))} forbidden edges")

    return BruteForceResult(make_matching(inst.weights, sg.effective, best[1]), count)
