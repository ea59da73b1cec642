"""Turning a weighted instance into a simple integer-weighted solver graph."""

from dataclasses import dataclass
from typing import Collection

import numpy as np

from instance import WeightedInstance
from utils.errors import NonFiniteWeight

# Weights are scaled by 2**40 and rounded once; solver duals then stay
# (half-)integral and optimality can be certified exactly.
WEIGHT_SCALE = float(2**40)


@dataclass(frozen=True)
class SolverGraph:
    """Simple graph handed to the exact solvers.

    Attributes:
        num_vertices: Vertex count of the host graph.
        endpoints: (u, v) per kept edge.
        int_weights: Integerized effective weight per kept edge.
        edge_ids: Host edge id per kept edge, ascending.
        effective: Effective real weight w_e + penalty_e over all host edge ids.
    """

    num_vertices: int
    endpoints: list[tuple[int, int]]
    int_weights: list[int]
    edge_ids: list[int]
    effective: np.ndarray


def effective_weights(
    inst: WeightedInstance,
    penalties: np.ndarray | None = None,
    ) -> np.ndarray:
    """w_e + penalty_e for every edge; raises NonFiniteWeight on NaN or inf."""
    effective = np.asarray(inst.weights, dtype=np.float64)
    if penalties is not None:
        penalties = np.asarray(penalties, dtype=np.float64)
        if penalties.shape != effective.shape:
            raise ValueError(f"Penalties shape {penalties.shape} does not match {effective.shape} edges")
        if not np.all(np.isfinite(penalties)):
            raise NonFiniteWeight("Penalty array contains a non-finite entry")
        if np.any(penalties < 0):
            raise ValueError("Penalties must be non-negative")
        effective = effective + penalties

    if not np.all(np.isfinite(effective)):
        e = int(np.flatnonzero(~np.isfinite(effective))[0])
        raise NonFiniteWeight(f"Effective weight of edge {e} is {effective[e]}")
    return effective


def integerize(w: float) -> int:
    return int(np.rint(w * WEIGHT_SCALE))


def prepare(
    inst: WeightedInstance,
    forbidden: Collection[int] = (),
    penalties: np.ndarray | None = None,
    ) -> SolverGraph:
    """Build the solver graph.

    Steps:
    1. Compute effective weights and check they are finite
    2. Drop forbidden edges
    3. Integerize each remaining weight once
    4. Collapse parallel edges, keeping the cheapest (lowest id on ties)

    Args:
        inst: Weighted instance.
        forbidden: Edge ids excluded from the matching.
        penalties: Optional per-edge additive penalties.

    Returns:
        The simple solver graph, edges in ascending host-id order.
    """
    g = inst.graph
    effective = effective_weights(inst, penalties)
    excluded = set(int(e) for e in forbidden)
    for e in excluded:
        if not 0 <= e < g.num_edges:
            raise ValueError(f"Forbidden edge id {e} out of range")

    best: dict[tuple[int, int], tuple[int, int]] = {}
    for e in range(g.num_edges):
        if e in excluded:
            continue
        u, v = int(g.edges[e, 0]), int(g.edges[e, 1])
        if u == v:
            continue
        w = integerize(effective[e])
        kept = best.get((u, v))
        if kept is None or w < kept[1]:
            best[(u, v)] = (e, w)

    ordered = sorted((e, w, key) for key, (e, w) in best.items())
    return SolverGraph(
        num_vertices=g.num_vertices,
        endpoints=[key for _, _, key in ordered],
        int_weights=[w for _, w, _ in ordered],
        edge_ids=[e for e, _, _ in ordered],
        effective=effective,
    )
