"""Matching type, cost bookkeeping and structural checks."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from lattice import LatticeGraph
from utils.errors import MalformedMatching


@dataclass(frozen=True)
class Matching:
    """A perfect matching as a set of edge ids.

    Attributes:
        edge_ids: Matched edge ids.
        cost: Sum of the original weights, taken in ascending edge-id order.
        objective: Sum of the effective (penalized) weights the solver minimized.
    """

    edge_ids: frozenset[int]
    cost: float
    objective: float = field(default=math.nan, compare=False)

    @property
    def sorted_ids(self) -> list[int]:
        return sorted(self.edge_ids)

    def __len__(self) -> int:
        return len(self.edge_ids)

    def __contains__(self, edge_id: int) -> bool:
        return edge_id in self.edge_ids

    def indicator(self, num_edges: int) -> np.ndarray:
        """Occupation numbers n_e as a 0/1 array over all edge ids."""
        n = np.zeros(num_edges, dtype=np.int8)
        n[self.sorted_ids] = 1
        return n


class BruteForceResult(NamedTuple):
    matching: Matching
    count: int


def matching_cost(weights: np.ndarray, edge_ids: Iterable[int]) -> float:
    """Correctly rounded sum of `weights` over `edge_ids` in canonical order."""
    return math.fsum(float(weights[e]) for e in sorted(edge_ids))


def make_matching(weights: np.ndarray, effective: np.ndarray, edge_ids: Iterable[int]) -> Matching:
    ids = frozenset(int(e) for e in edge_ids)
    return Matching(
        edge_ids=ids,
        cost=matching_cost(weights, ids),
        objective=matching_cost(effective, ids),
    )


def verify_perfect(g: LatticeGraph, edge_ids: Iterable[int]) -> None:
    """Raise MalformedMatching unless every vertex is covered exactly once."""
    cover = np.zeros(g.num_vertices, dtype=np.int64)
    ids = list(edge_ids)
    for e in ids:
        u, v = g.edges[e]
        cover[u] += 1
        cover[v] += 1

    bad = np.flatnonzero(cover != 1)
    if bad.size:
        v = int(bad[0])
        raise MalformedMatching(f"Vertex {v} covered {cover[v]} times ({bad.size} bad vertices)")
    if 2 * len(ids) != g.num_vertices:
        raise MalformedMatching(f"{len(ids)} edges cannot perfectly match {g.num_vertices} vertices")


def dump_matching(m: Matching, path: Path) -> None:
    """Write `cost <decimal>` followed by the sorted edge ids, one per line."""
    lines = [f"cost {m.cost:.17g}", *(str(e) for e in m.sorted_ids)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matching(path: Path) -> tuple[float, list[int]]:
    header, *rows = path.read_text(encoding="utf-8").split("\n")
    _, cost = header.split()
    return float(cost), [int(r) for r in rows if r.strip()]
