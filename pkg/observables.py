"""Script for loop extraction and loop observables."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, model_validator

from lattice import LatticeGraph
from matching.models import Matching
from utils.errors import MalformedMatching
from utils.logging import get_logger

logger = get_logger(__name__)

GAUSS_BONNET_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Loop:
    """One closed alternating cycle of a symmetric difference.

    Attributes:
        vertex_sequence: v_0 .. v_{S-1} in traversal order.
        edge_sequence: e_k joins v_k and v_{k+1} (cyclically).
        unwrapped_positions: (S, 2) positions integrated along the loop.
        steps: (S, 2) displacement of each traversed edge.
        turning_angles: (S,) signed exterior angle at each v_k, in (-pi, pi].
        winding: Net wraps around the two torus periods.
    """

    vertex_sequence: tuple[int, ...]
    edge_sequence: tuple[int, ...]
    unwrapped_positions: np.ndarray
    steps: np.ndarray
    turning_angles: np.ndarray
    winding: tuple[int, int]

    @property
    def length_S(self) -> int:
        return len(self.edge_sequence)

    @property
    def contractible(self) -> bool:
        return self.winding == (0, 0)


def turning_angle(incoming: np.ndarray, outgoing: np.ndarray) -> float:
    """Signed angle from `incoming` to `outgoing`; pi for a reversal."""
    cross = incoming[0] * outgoing[1] - incoming[1] * outgoing[0]
    dot = incoming[0] * outgoing[0] + incoming[1] * outgoing[1]
    angle = math.atan2(cross, dot)
    return math.pi if angle == -math.pi else angle


def loop_from_steps(
    steps: Sequence[Sequence[float]],
    start: Sequence[float] = (0.0, 0.0),
    vertex_sequence: Sequence[int] | None = None,
    edge_sequence: Sequence[int] | None = None,
    periods: np.ndarray | None = None,
    ) -> Loop:
    """Assemble a loop from its step vectors.

    Args:
        steps: Displacement of each edge in traversal order.
        start: Position of v_0.
        vertex_sequence: Vertex ids (defaults to 0..S-1).
        edge_sequence: Edge ids (defaults to 0..S-1).
        periods: Torus period vectors as rows, or None for the plane.

    Returns:
        The loop with unwrapped positions, turning angles and winding numbers.
    """
    steps = np.asarray(steps, dtype=np.float64).reshape(-1, 2)
    S = len(steps)
    positions = np.asarray(start, dtype=np.float64) + np.vstack([np.zeros(2), np.cumsum(steps, axis=0)[:-1]])
    total = steps.sum(axis=0)

    if periods is None:
        if np.max(np.abs(total)) > 1e-9:
            raise MalformedMatching(f"Open loop without torus periods: net displacement {total}")
        winding = (0, 0)
    else:
        coefficients = np.linalg.solve(np.asarray(periods).T, total)
        rounded = np.rint(coefficients)
        if np.max(np.abs(coefficients - rounded)) > 1e-6:
            raise MalformedMatching(f"Loop does not close on the torus: {coefficients} periods")
        winding = (int(rounded[0]), int(rounded[1]))

    turning = np.array([turning_angle(steps[k - 1], steps[k]) for k in range(S)])
    for array in (positions, steps, turning):
        array.setflags(write=False)

    return Loop(
        vertex_sequence=tuple(vertex_sequence) if vertex_sequence is not None else tuple(range(S)),
        edge_sequence=tuple(edge_sequence) if edge_sequence is not None else tuple(range(S)),
        unwrapped_positions=positions,
        steps=steps,
        turning_angles=turning,
        winding=winding,
    )


def symmetric_difference(m1: Matching, m2: Matching, g: LatticeGraph) -> list[Loop]:
    """Decompose m1 xor m2 into vertex-disjoint alternating cycles.

    Steps:
    1. Collect the difference edges at every vertex
    2. Require exactly one m1 and one m2 edge at each touched vertex
    3. Start each loop at the smallest unvisited vertex, leaving on its m1 edge
    4. Walk until the start vertex comes back

    Args:
        m1: First perfect matching (the ground state by convention).
        m2: Second perfect matching on the same graph.
        g: Host graph.

    Returns:
        Loops ordered by their smallest vertex id.

    Raises:
        MalformedMatching: A touched vertex does not have one edge from each matching.
    """
    first: dict[int, int] = {}
    second: dict[int, int] = {}
    for owner, ids in ((first, m1.edge_ids - m2.edge_ids), (second, m2.edge_ids - m1.edge_ids)):
        for e in sorted(ids):
            for v in g.edges[e]:
                v = int(v)
                if v in owner:
                    raise MalformedMatching(f"Vertex {v} has two edges ({owner[v]}, {e}) from one matching")
                owner[v] = e

    if first.keys() != second.keys():
        odd = sorted(first.keys() ^ second.keys())
        raise MalformedMatching(f"Symmetric difference has odd degree at vertices {odd[:10]}")

    loops: list[Loop] = []
    visited: set[int] = set()
    for start in sorted(first):
        if start in visited:
            continue
        vertices: list[int] = []
        edges: list[int] = []
        steps: list[np.ndarray] = []
        v, use_first = start, True
        while True:
            visited.add(v)
            e = first[v] if use_first else second[v]
            vertices.append(v)
            edges.append(e)
            steps.append(g.step(e, v))
            v = g.other_end(e, v)
            use_first = not use_first
            if v == start:
                break
            if v in visited:
                raise MalformedMatching(f"Loop from vertex {start} revisits vertex {v}")

        loops.append(loop_from_steps(steps, g.positions[start], vertices, edges, g.periods))

    return loops


def gyration_radius(loop: Loop) -> float:
    """Mean squared distance of the loop's vertices from their centroid."""
    positions = loop.unwrapped_positions
    deviation = positions - positions.mean(axis=0)
    return float(np.mean(np.sum(deviation**2, axis=1)))


class WindingAngleStats(NamedTuple):
    theta_sq_mean: float
    theta_sum: float


def winding_angle_series(loop: Loop) -> np.ndarray:
    """theta_0 = 0, theta_k = sum of turning angles at v_1 .. v_k."""
    theta = np.zeros(loop.length_S)
    theta[1:] = np.cumsum(loop.turning_angles[1:])
    return theta


def winding_angle_stats(loop: Loop) -> WindingAngleStats:
    theta = winding_angle_series(loop)
    return WindingAngleStats(
        theta_sq_mean=float(np.mean(theta**2)),
        theta_sum=float(np.sum(loop.turning_angles)),
    )


def gauged_winding_variance(loop: Loop) -> float:
    """Start-independent winding-angle variance.

    The uniform rotation theta_sum * k / S is removed from the series, then
    its mean. For winding loops theta_sum is zero and only the mean goes.
    """
    theta = winding_angle_series(loop)
    S = loop.length_S
    drift = float(np.sum(loop.turning_angles)) * np.arange(S) / S
    phi = theta - drift
    return float(np.mean((phi - phi.mean()) ** 2))


def winding_numbers(loop: Loop) -> tuple[int, int]:
    return loop.winding


def gauss_bonnet_holds(loop: Loop, tolerance: float = GAUSS_BONNET_TOLERANCE) -> bool:
    """|total turning| is 2 pi for contractible loops and 0 for winding ones."""
    total = abs(float(np.sum(loop.turning_angles)))
    expected = 2 * math.pi if loop.contractible else 0.0
    return abs(total - expected) <= tolerance


class ObservationRecord(BaseModel):
    """One CSV row: a per-instance summary (loop_index None) or a single loop."""

    kind: str
    L: int
    instance: int
    excitation: str
    epsilon: float | None = None
    ground_cost: float
    delta_e: float
    loop_index: int | None = None
    S: int
    R2: float | None = None
    theta2_gauged: float | None = None
    theta2_raw: float | None = None
    wx: int | None = None
    wy: int | None = None
    overlap: float | None = None
    distance: float | None = None

    @model_validator(mode="after")
    def check_finite(self) -> "ObservationRecord":
        for name in ("epsilon", "ground_cost", "delta_e", "R2", "theta2_gauged", "theta2_raw", "overlap", "distance"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"Field {name} is not finite: {value}")
        return self


def observe(
    kind: str,
    L: int,
    instance: int,
    excitation: str,
    ground_cost: float,
    delta_e: float,
    loops: Sequence[Loop],
    epsilon: float | None = None,
    overlap: float | None = None,
    distance: float | None = None,
    ) -> list[ObservationRecord]:
    """Per-loop rows followed by the per-instance row, whose S is the sum of loop lengths."""
    shared = dict(kind=kind, L=L, instance=instance, excitation=excitation, epsilon=epsilon, ground_cost=ground_cost, delta_e=delta_e)
    rows = []
    for index, loop in enumerate(loops):
        stats = winding_angle_stats(loop)
        rows.append(ObservationRecord(
            **shared,
            loop_index=index,
            S=loop.length_S,
            R2=gyration_radius(loop),
            theta2_gauged=gauged_winding_variance(loop),
            theta2_raw=stats.theta_sq_mean,
            wx=loop.winding[0],
            wy=loop.winding[1],
        ))

    rows.append(ObservationRecord(
        **shared,
        S=sum(loop.length_S for loop in loops),
        overlap=overlap,
        distance=distance,
    ))
    return rows
