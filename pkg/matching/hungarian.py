"""Hungarian method for bipartite minimum-weight perfect matching.

Successive shortest augmenting paths with vertex potentials (the labeling
of the Kuhn-Munkres method): every round runs Dijkstra on reduced costs from
all free left vertices, stops at the nearest free right vertex, lifts the
potentials so the path becomes tight and flips it.
"""

import heapq
import math
from typing import Collection

import numpy as np

from instance import WeightedInstance
from matching.models import Matching, make_matching, verify_perfect
from matching.prepare import prepare
from utils.errors import NoPerfectMatching, NotBipartite
from utils.logging import get_logger

logger = get_logger(__name__)


def min_weight_perfect_matching_bipartite(
    inst: WeightedInstance,
    forbidden: Collection[int] = (),
    penalties: np.ndarray | None = None,
    ) -> Matching:
    """Exact minimum-weight perfect matching on a bipartite graph.

    Args:
        inst: Weighted instance on an H or Q lattice (or a graph with parity classes).
        forbidden: Edge ids that may not be used.
        penalties: Optional non-negative per-edge additive penalties.

    Returns:
        The optimal matching; same contract as the blossom solver.

    Raises:
        NotBipartite: The graph carries no parity classes or an edge joins one class.
        NoPerfectMatching: No perfect matching exists.
    """
    g = inst.graph
    if g.parity is None:
        raise NotBipartite(f"Graph of kind {g.kind} has no bipartition")

    sg = prepare(inst, forbidden, penalties)
    parity = g.parity
    left = [v for v in range(g.num_vertices) if parity[v] == 0]
    right = [v for v in range(g.num_vertices) if parity[v] == 1]
    if len(left) != len(right):
        raise NoPerfectMatching(f"Unbalanced bipartition: {len(left)} left, {len(right)} right")

    # Edges stored left -> right with host id
    out: dict[int, list[tuple[int, int, int]]] = {x: [] for x in left}
    for (u, v), c, e in zip(sg.endpoints, sg.int_weights, sg.edge_ids):
        if parity[u] == parity[v]:
            raise NotBipartite(f"Edge {e} joins vertices {u} and {v} of the same class")
        x, y = (u, v) if parity[u] == 0 else (v, u)
        out[x].append((y, c, e))

    potential = [0] * g.num_vertices
    mate_edge: dict[int, int] = {}       # vertex -> host edge id
    mate: dict[int, int] = {}
    cost_of: dict[int, int] = {}         # host edge id -> integer cost

    for x in left:
        for _, c, e in out[x]:
            cost_of[e] = c

    for _ in range(len(left)):
        dist: dict[int, float] = {}
        parent: dict[int, tuple[int, int]] = {}   # right vertex -> (left vertex, edge id)
        heap: list[tuple[float, int]] = []
        for x in left:
            if x not in mate:
                dist[x] = 0
                heap.append((0, x))
        heapq.heapify(heap)

        done: set[int] = set()
        target = None
        while heap:
            d, a = heapq.heappop(heap)
            if a in done or d > dist[a]:
                continue
            done.add(a)
            if parity[a] == 1:
                if a not in mate:
                    target = a
                    break
                # Matched edges run right -> left and are tight
                b = mate[a]
                nd = d + (-cost_of[mate_edge[a]]) + potential[a] - potential[b]
                if nd < dist.get(b, math.inf):
                    dist[b] = nd
                    heapq.heappush(heap, (nd, b))
                continue
            for y, c, e in out[a]:
                if mate_edge.get(a) == e:
                    continue
                nd = d + c + potential[a] - potential[y]
                if nd < dist.get(y, math.inf):
                    dist[y] = nd
                    parent[y] = (a, e)
                    heapq.heappush(heap, (nd, y))

        if target is None:
            raise NoPerfectMatching(f"No augmenting path with {len(mate) // 2} of {len(left)} pairs matched")

        D = dist[target]
        for v in range(g.num_vertices):
            potential[v] += min(dist.get(v, D), D)

        y = target
        while True:
            x, e = parent[y]
            previous = mate_edge.get(x)
            previous_y = mate.get(x)
            mate[x], mate[y] = y, x
            mate_edge[x] = mate_edge[y] = e
            if previous is None:
                break
            y = previous_y

    ids = sorted({mate_edge[x] for x in left})
    verify_perfect(g, ids)
    matching = make_matching(inst.weights, sg.effective, ids)
    logger.debug(f"Hungarian matching on {g.num_vertices} vertices: cost {matching.cost:.6f}")
    return matching
