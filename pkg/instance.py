"""Script for attaching reproducible random weights to a lattice."""

from dataclasses import dataclass
from utils.compat import StrEnum
from pathlib import Path

import numpy as np

from lattice import LatticeGraph
from utils.logging import get_logger
from utils.rng import WEIGHT_STREAM, mix, stream, uniform_open_closed

logger = get_logger(__name__)


class WeightDistribution(StrEnum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class WeightedInstance:
    """A lattice with one positive weight per edge id."""

    graph: LatticeGraph
    weights: np.ndarray
    master_seed: int
    instance_index: int
    distribution: WeightDistribution = WeightDistribution.EXPONENTIAL

    @property
    def stream_seed(self) -> int:
        return mix(self.master_seed, self.instance_index)

    def with_weights(self, weights: np.ndarray) -> "WeightedInstance":
        """Same graph and seeds, explicit weights (used for hand-built examples)."""
        return WeightedInstance(
            graph=self.graph,
            weights=_frozen(weights),
            master_seed=self.master_seed,
            instance_index=self.instance_index,
            distribution=self.distribution,
        )


def _frozen(weights) -> np.ndarray:
    array = np.array(weights, dtype=np.float64)
    array.setflags(write=False)
    return array


def _transform(u: np.ndarray, distribution: WeightDistribution) -> np.ndarray:
    if distribution is WeightDistribution.EXPONENTIAL:
        return -np.log(u)
    return u


def sample_weights(
    g: LatticeGraph,
    master_seed: int,
    instance_index: int,
    distribution: WeightDistribution | str = WeightDistribution.EXPONENTIAL,
    ) -> WeightedInstance:
    """Draw i.i.d. weights for every edge of `g`.

    Steps:
    1. Key a Philox stream with mix(mix(master_seed, instance_index), WEIGHT_STREAM)
    2. Draw u in (0, 1] per edge, in edge-id order
    3. Map to w = -ln(u) (or w = u for the uniform tag)
    4. Redraw exact duplicates until all weights are distinct

    Args:
        g: The lattice.
        master_seed: 64-bit run seed.
        instance_index: Position of the instance within its stratum.
        distribution: Weight distribution tag.

    Returns:
        The weighted instance.
    """
    distribution = WeightDistribution(distribution)
    stream_seed = mix(master_seed, instance_index)
    generator = stream(mix(stream_seed, WEIGHT_STREAM))

    weights = _transform(uniform_open_closed(generator, g.num_edges), distribution)
    while True:
        _, first = np.unique(weights, return_index=True)
        if len(first) == len(weights):
            break
        # Keep the first occurrence of each tied value, redraw the rest
        keep = np.zeros(len(weights), dtype=bool)
        keep[first] = True
        redraw = np.flatnonzero(~keep)
        logger.debug(f"Redrawing {len(redraw)} tied weights for instance {instance_index}")
        weights[redraw] = _transform(uniform_open_closed(generator, len(redraw)), distribution)

    return WeightedInstance(
        graph=g,
        weights=_frozen(weights),
        master_seed=master_seed,
        instance_index=instance_index,
        distribution=distribution,
    )


def instance_from_weights(g: LatticeGraph, weights, master_seed: int = 0, instance_index: int = 0) -> WeightedInstance:
    """Wrap explicit weights, e.g. the 4-cycle (0.1, 0.2, 0.3, 0.4)."""
    weights = _frozen(weights)
    if weights.shape != (g.num_edges,):
        raise ValueError(f"Expected {g.num_edges} weights, got shape {weights.shape}")
    return WeightedInstance(graph=g, weights=weights, master_seed=master_seed, instance_index=instance_index)


def dump_weights(inst: WeightedInstance, path: Path) -> None:
    """Write `edge_id weight` lines; 17 significant digits round-trip exactly."""
    lines = [f"{e} {w:.17g}" for e, w in enumerate(inst.weights)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_weights(path: Path, g: LatticeGraph) -> np.ndarray:
    weights = np.full(g.num_edges, np.nan)
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        edge_id, value = line.split()
        weights[int(edge_id)] = float(value)

    if np.isnan(weights).any():
        raise ValueError(f"Weight file {path} does not cover all {g.num_edges} edges")
    return weights
