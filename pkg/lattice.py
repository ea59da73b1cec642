"""Script for building torus lattices (honeycomb, square, triangular)."""

import math
from collections import Counter, deque
from dataclasses import dataclass
from utils.compat import StrEnum
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from utils.errors import InvalidLattice
from utils.logging import get_logger

logger = get_logger(__name__)

SQRT3_2 = math.sqrt(3.0) / 2.0
UNIT_TOLERANCE = 1e-12


class LatticeKind(StrEnum):
    H = "H"
    Q = "Q"
    T = "T"

    @property
    def bipartite(self) -> bool:
        return self is not LatticeKind.T

    @property
    def degree(self) -> int:
        return _DEGREE[self]

    @property
    def tag(self) -> int:
        """Stable small integer used when mixing seeds."""
        return _TAG[self]

    def expected_edges(self, L: int) -> int:
        return self.degree * L * L // 2


_DEGREE = {LatticeKind.H: 3, LatticeKind.Q: 4, LatticeKind.T: 6}
_TAG = {LatticeKind.H: 1, LatticeKind.Q: 2, LatticeKind.T: 3}

# Forward neighbour steps in grid coordinates. H uses (0, 1) only from
# vertices with x + y even (brick-wall pattern).
_STEPS = {
    LatticeKind.H: ((1, 0), (0, 1)),
    LatticeKind.Q: ((1, 0), (0, 1)),
    LatticeKind.T: ((1, 0), (0, 1), (1, 1)),
}


def embed(kind: LatticeKind, x: int, y: int) -> tuple[float, float]:
    """Embedded position of grid point (x, y); valid for unwrapped coordinates.

    Q is the unit square grid, T the sheared grid with basis (1, 0) and
    (-1/2, sqrt(3)/2), H the brick wall drawn as a regular honeycomb.
    """
    if kind is LatticeKind.Q:
        return float(x), float(y)
    if kind is LatticeKind.T:
        return x - 0.5 * y, SQRT3_2 * y
    lift = 0.5 if (x + y) % 2 == 0 else 0.0
    return SQRT3_2 * x, 1.5 * y + lift


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """Immutable graph with geometry.

    Attributes:
        kind: Lattice kind, or None for hand-built test graphs.
        L: Vertices per direction (0 for hand-built graphs).
        positions: (n, 2) embedded vertex positions.
        edges: (m, 2) endpoint ids with u < v, row index is the edge id.
        displacements: (m, 2) embedded vector from u to v across the wrap.
        parity: (n,) class 0/1 for bipartite graphs, otherwise None.
        periods: (2, 2) rows are the two torus period vectors, or None.
        adjacency: per vertex, incident edge ids in ascending order.
    """

    kind: LatticeKind | None
    L: int
    positions: np.ndarray
    edges: np.ndarray
    displacements: np.ndarray
    parity: np.ndarray | None
    periods: np.ndarray | None
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def num_vertices(self) -> int:
        return int(self.positions.shape[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def bipartite(self) -> bool:
        return self.parity is not None

    def other_end(self, edge_id: int, vertex: int) -> int:
        u, v = self.edges[edge_id]
        return int(v) if vertex == u else int(u)

    def step(self, edge_id: int, from_vertex: int) -> np.ndarray:
        """Displacement when traversing `edge_id` starting at `from_vertex`."""
        if from_vertex == self.edges[edge_id, 0]:
            return self.displacements[edge_id]
        return -self.displacements[edge_id]

    def replace_edges(
        self,
        edges: np.ndarray,
        displacements: np.ndarray,
        ) -> "LatticeGraph":
        """Copy of this graph with a different edge list (vertices kept)."""
        return _assemble(
            self.kind,
            self.L,
            self.positions,
            edges,
            displacements,
            self.parity,
            self.periods,
        )


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def _assemble(
    kind: LatticeKind | None,
    L: int,
    positions: np.ndarray,
    edges: np.ndarray,
    displacements: np.ndarray,
    parity: np.ndarray | None,
    periods: np.ndarray | None,
    ) -> LatticeGraph:
    n = positions.shape[0]
    incident: list[list[int]] = [[] for _ in range(n)]
    for e, (u, v) in enumerate(np.asarray(edges, dtype=np.int64)):
        incident[int(u)].append(e)
        incident[int(v)].append(e)

    return LatticeGraph(
        kind=kind,
        L=L,
        positions=_frozen(np.asarray(positions, dtype=np.float64)),
        edges=_frozen(np.asarray(edges, dtype=np.int64).reshape(-1, 2)),
        displacements=_frozen(np.asarray(displacements, dtype=np.float64).reshape(-1, 2)),
        parity=None if parity is None else _frozen(np.asarray(parity, dtype=np.int8)),
        periods=None if periods is None else _frozen(np.asarray(periods, dtype=np.float64)),
        adjacency=tuple(tuple(sorted(ids)) for ids in incident),
    )


def build_lattice(kind: LatticeKind | str, L: int) -> LatticeGraph:
    """Build an L x L torus lattice of the given kind.

    Steps:
    1. Place vertex id y*L + x at its embedded position
    2. Emit forward edges per grid step, wrapping periodically
    3. Orient each edge from the lower to the higher vertex id
    4. Sort by (u, v) and assign edge ids in that order

    Args:
        kind: H, Q or T.
        L: Even number of vertices per direction, at least 2.

    Returns:
        The lattice graph; identical inputs give identical id assignments.
    """
    kind = LatticeKind(kind)
    if L < 2:
        raise InvalidLattice(f"L must be at least 2, got {L}")
    if L % 2:
        raise InvalidLattice(f"L must be even for a perfect matching to exist, got {L}")

    n = L * L
    positions = np.array([embed(kind, v % L, v // L) for v in range(n)])
    origin = np.array(embed(kind, 0, 0))
    periods = np.array([
        np.array(embed(kind, L, 0)) - origin,
        np.array(embed(kind, 0, L)) - origin,
    ])
    parity = np.array([(v % L + v // L) % 2 for v in range(n)]) if kind.bipartite else None

    raw: list[tuple[int, int, int, float, float]] = []
    for v in range(n):
        x, y = v % L, v // L
        here = embed(kind, x, y)
        for dx, dy in _STEPS[kind]:
            if kind is LatticeKind.H and dy == 1 and (x + y) % 2:
                continue
            w = ((y + dy) % L) * L + (x + dx) % L
            there = embed(kind, x + dx, y + dy)
            ddx, ddy = there[0] - here[0], there[1] - here[1]
            if v < w:
                raw.append((v, w, len(raw), ddx, ddy))
            else:
                raw.append((w, v, len(raw), -ddx, -ddy))

    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    edges = np.array([(u, v) for u, v, _, _, _ in raw], dtype=np.int64)
    displacements = np.array([(ddx, ddy) for _, _, _, ddx, ddy in raw])

    graph = _assemble(kind, L, positions, edges, displacements, parity, periods)
    logger.debug(f"Built {kind} lattice L={L}: {graph.num_vertices} vertices, {graph.num_edges} edges")
    return graph


def small_graph(
    num_vertices: int,
    pairs: Sequence[tuple[int, int]],
    parity: Sequence[int] | None = None,
    ) -> LatticeGraph:
    """Hand-built graph without geometry, for oracles and examples.

    Edge ids follow the order of `pairs`; each pair is stored as (min, max).

    Args:
        num_vertices: Vertex count.
        pairs: Edge endpoints.
        parity: Optional bipartition classes.

    Returns:
        A graph with zero positions and displacements and no torus periods.
    """
    edges = np.array([(min(u, v), max(u, v)) for u, v in pairs], dtype=np.int64).reshape(-1, 2)
    return _assemble(
        None,
        0,
        np.zeros((num_vertices, 2)),
        edges,
        np.zeros((len(pairs), 2)),
        None if parity is None else np.asarray(parity),
        None,
    )


class Violation(NamedTuple):
    invariant: str
    element: str
    detail: str


def _winding_coefficients(g: LatticeGraph, delta: np.ndarray) -> np.ndarray:
    return np.linalg.solve(g.periods.T, delta)


def _translate(g: LatticeGraph, vertex: int, sx: int, sy: int) -> int:
    L = g.L
    x, y = vertex % L, vertex // L
    return ((y + sy) % L) * L + (x + sx) % L


def _translation_steps(kind: LatticeKind) -> tuple[tuple[int, int], ...]:
    if kind is LatticeKind.H:
        return ((2, 0), (1, 1))
    return ((1, 0), (0, 1))


def _bfs_coloring(g: LatticeGraph) -> np.ndarray | None:
    color = np.full(g.num_vertices, -1, dtype=np.int64)
    for start in range(g.num_vertices):
        if color[start] >= 0:
            continue
        color[start] = g.parity[start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for e in g.adjacency[v]:
                w = g.other_end(e, v)
                if color[w] < 0:
                    color[w] = 1 - color[v]
                    queue.append(w)
                elif color[w] == color[v]:
                    return None
    return color


def validate_lattice(g: LatticeGraph) -> list[Violation]:
    """Check every LatticeGraph invariant and list what is broken.

    Args:
        g: A constructed (possibly tampered) lattice.

    Returns:
        Violations naming the invariant and the offending element;
        empty iff the graph is a valid torus lattice.
    """
    violations: list[Violation] = []
    kind, L = g.kind, g.L
    if kind is None:
        return [Violation("kind", "graph", "hand-built graph has no lattice kind")]

    if L < 2 or L % 2:
        violations.append(Violation("size", "graph", f"L={L} must be even and at least 2"))
    if g.num_vertices != L * L:
        violations.append(Violation("vertex_count", "graph", f"{g.num_vertices} vertices, expected {L * L}"))
    if g.num_edges != kind.expected_edges(L):
        violations.append(Violation("edge_count", "graph", f"{g.num_edges} edges, expected {kind.expected_edges(L)}"))

    degree_sum = 0
    for v, incident in enumerate(g.adjacency):
        degree_sum += len(incident)
        if len(incident) != kind.degree:
            violations.append(Violation("degree", f"vertex {v}", f"degree {len(incident)}, expected {kind.degree}"))
        for e in incident:
            if v not in g.edges[e]:
                violations.append(Violation("adjacency", f"vertex {v}", f"lists edge {e} not incident to it"))
    if degree_sum != 2 * g.num_edges:
        violations.append(Violation("handshake", "graph", f"degree sum {degree_sum} != 2 * {g.num_edges}"))

    for e, ((u, v), disp) in enumerate(zip(g.edges, g.displacements)):
        if not u < v:
            violations.append(Violation("orientation", f"edge {e}", f"endpoints ({u}, {v}) not ordered"))
        length = float(np.hypot(*disp))
        if abs(length - 1.0) > UNIT_TOLERANCE:
            violations.append(Violation("unit_length", f"edge {e}", f"length {length!r}"))
        coefficients = _winding_coefficients(g, g.positions[u] + disp - g.positions[v])
        if np.max(np.abs(coefficients - np.rint(coefficients))) > 1e-9:
            violations.append(Violation("displacement", f"edge {e}", f"u + d misses v by {coefficients}"))

    if kind.bipartite:
        if g.parity is None:
            violations.append(Violation("bipartite", "graph", "bipartite kind without parity classes"))
        else:
            for e, (u, v) in enumerate(g.edges):
                if g.parity[u] == g.parity[v]:
                    violations.append(Violation("bipartite", f"edge {e}", f"joins vertices {u} and {v} of class {g.parity[u]}"))
            coloring = _bfs_coloring(g)
            if coloring is not None and not np.array_equal(coloring, g.parity):
                violations.append(Violation("bipartite", "graph", "BFS 2-coloring disagrees with stored parity"))

    if g.num_vertices == L * L:
        pairs = Counter((int(u), int(v)) for u, v in g.edges)
        for sx, sy in _translation_steps(kind):
            moved = Counter()
            for u, v in g.edges:
                a, b = _translate(g, int(u), sx, sy), _translate(g, int(v), sx, sy)
                moved[(min(a, b), max(a, b))] += 1
            if moved != pairs:
                violations.append(Violation("translation", "graph", f"edge set not invariant under shift ({sx}, {sy})"))

    return violations


def export_edge_list(g: LatticeGraph, path: Path) -> None:
    """Write `kind L num_vertices num_edges` then `edge_id u v dx dy` per edge."""
    lines = [f"{g.kind} {g.L} {g.num_vertices} {g.num_edges}"]
    for e, ((u, v), (dx, dy)) in enumerate(zip(g.edges, g.displacements)):
        lines.append(f"{e} {u} {v} {dx:.17g} {dy:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def edge_lookup(g: LatticeGraph, pairs: Iterable[tuple[int, int]]) -> list[int]:
    """Edge ids for endpoint pairs (first match when parallel edges exist)."""
    index: dict[tuple[int, int], int] = {}
    for e, (u, v) in enumerate(g.edges):
        index.setdefault((int(u), int(v)), e)
    return [index[(min(a, b), max(a, b))] for a, b in pairs]
