from collections import Counter

import numpy as np
import pytest
from scipy import stats

from excitation import (
    EPSILON_POINTS,
    departure_threshold,
    epsilon_excite,
    epsilon_grid,
    epsilon_sweep,
    link_substream,
    max_weight_excite,
    random_link_excite,
)
from instance import sample_weights
from lattice import LatticeKind, build_lattice
from matching.blossom import min_weight_perfect_matching
from matching.brute_force import brute_force_matching
from utils.errors import NonFiniteWeight
from utils.rng import stream


def brute_solver(inst, forbidden=(), penalties=None):
    return brute_force_matching(inst, forbidden, penalties).matching


def test_max_weight_on_four_cycle(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)
    result = max_weight_excite(four_cycle, ground)

    assert result.removed_edge == 2
    assert result.excited.edge_ids == {1, 3}
    assert result.delta_e == pytest.approx(0.2)


def test_random_link_on_four_cycle_is_uniform(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)
    rng = stream(42)
    removed = Counter()
    for _ in range(400):
        result = random_link_excite(four_cycle, ground, rng)
        removed[result.removed_edge] += 1
        assert result.delta_e == pytest.approx(0.2)

    assert set(removed) == {0, 2}
    assert stats.chisquare([removed[0], removed[2]]).pvalue > 0.01


def test_random_link_uniform_over_lattice_ground_edges():
    inst = sample_weights(build_lattice(LatticeKind.Q, 4), 3, 0)
    ground = min_weight_perfect_matching(inst)
    excited = {e: min_weight_perfect_matching(inst, forbidden={e}) for e in ground.sorted_ids}

    def cached_solver(inst, forbidden=(), penalties=None):
        (removed,) = forbidden
        return excited[removed]

    rng = link_substream(inst)
    counts = Counter(
        random_link_excite(inst, ground, rng, solver=cached_solver).removed_edge for _ in range(10_000)
    )

    assert set(counts) == ground.edge_ids
    assert stats.chisquare([counts[e] for e in ground.sorted_ids]).pvalue > 0.01


def test_overlap_saturates_at_large_epsilon():
    inst = sample_weights(build_lattice(LatticeKind.Q, 4), 9, 1)
    ground = min_weight_perfect_matching(inst)
    total = float(inst.weights.sum())
    grid = np.concatenate([epsilon_grid(points=8), total * np.array([2.0, 8.0, 32.0, 128.0])])

    results = epsilon_sweep(inst, ground, grid, solver=brute_solver)
    plateau = results[-4:]

    assert results[0].overlap >= plateau[0].overlap
    assert len({r.excited.edge_ids for r in plateau}) == 1
    assert len({r.overlap for r in plateau}) == 1
    assert plateau[0].overlap < 1.0


def test_epsilon_penalty_is_flat_on_ground_edges():
    inst = sample_weights(build_lattice(LatticeKind.H, 4), 4, 0)
    ground = min_weight_perfect_matching(inst)
    seen = []

    def recording_solver(inst, forbidden=(), penalties=None):
        seen.append(penalties)
        return min_weight_perfect_matching(inst, forbidden, penalties)

    epsilon_excite(inst, ground, 0.3, solver=recording_solver)

    (penalties,) = seen
    assert np.all(penalties[ground.sorted_ids] == 0.3)
    assert np.count_nonzero(penalties) == len(ground)


def test_link_substream_is_reproducible():
    inst = sample_weights(build_lattice(LatticeKind.Q, 8), 3, 5)
    ground = min_weight_perfect_matching(inst)

    first = random_link_excite(inst, ground, link_substream(inst))
    second = random_link_excite(inst, ground, link_substream(inst))

    assert first.removed_edge == second.removed_edge
    assert first.excited == second.excited


@pytest.mark.parametrize("kind", list(LatticeKind))
def test_max_weight_matches_brute_force(kind):
    g = build_lattice(kind, 4)
    for index in range(10):
        inst = sample_weights(g, 17, index)
        ground = min_weight_perfect_matching(inst)
        result = max_weight_excite(inst, ground)
        oracle = max_weight_excite(inst, brute_solver(inst), solver=brute_solver)

        assert result.removed_edge == oracle.removed_edge
        assert result.excited == oracle.excited
        assert result.delta_e > 0


def test_epsilon_zero_is_identity(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)
    result = epsilon_excite(four_cycle, ground, 0.0)

    assert result.excited == ground
    assert result.overlap == 1.0
    assert result.distance == 0.0
    assert result.delta_e == 0.0


def test_epsilon_on_four_cycle(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)
    result = epsilon_excite(four_cycle, ground, 0.5)

    assert result.excited.edge_ids == {1, 3}
    assert result.overlap == 0.0
    assert result.distance == 1.0
    assert result.delta_e == pytest.approx(0.2)


def test_small_epsilon_keeps_four_cycle_ground(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)

    assert epsilon_excite(four_cycle, ground, 0.05).excited == ground


@pytest.mark.parametrize("epsilon", [float("nan"), float("inf")])
def test_epsilon_must_be_finite(four_cycle, epsilon):
    ground = min_weight_perfect_matching(four_cycle)

    with pytest.raises(NonFiniteWeight):
        epsilon_excite(four_cycle, ground, epsilon)


def test_negative_epsilon_is_rejected(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)

    with pytest.raises(ValueError):
        epsilon_excite(four_cycle, ground, -0.1)


def test_epsilon_grid_shape():
    grid = epsilon_grid()

    assert grid.size == EPSILON_POINTS
    assert grid[0] == pytest.approx(0.01)
    assert grid[-1] == pytest.approx(0.9)
    assert np.all(np.diff(grid) > 0)


def test_epsilon_matches_brute_force_on_grid():
    inst = sample_weights(build_lattice(LatticeKind.Q, 4), 9, 0)
    ground = min_weight_perfect_matching(inst)
    for epsilon in epsilon_grid(points=8):
        result = epsilon_excite(inst, ground, epsilon)
        oracle = epsilon_excite(inst, ground, epsilon, solver=brute_solver)

        assert result.excited == oracle.excited


def test_sweep_is_monotone():
    g = build_lattice(LatticeKind.Q, 8)
    for index in range(5):
        inst = sample_weights(g, 4, index)
        ground = min_weight_perfect_matching(inst)
        results = epsilon_sweep(inst, ground, epsilon_grid())

        overlaps = [r.overlap for r in results]
        energies = [r.delta_e for r in results]
        assert all(b <= a for a, b in zip(overlaps, overlaps[1:]))
        assert all(b >= a - 1e-9 for a, b in zip(energies, energies[1:]))


def test_sweep_rejects_unordered_grid(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)

    with pytest.raises(ValueError):
        epsilon_sweep(four_cycle, ground, [0.5, 0.1])


def test_departure_threshold(four_cycle):
    ground = min_weight_perfect_matching(four_cycle)
    results = epsilon_sweep(four_cycle, ground, [0.05, 0.15, 0.3, 0.6])

    # the two matchings swap once 2 * epsilon exceeds the 0.2 gap
    assert departure_threshold(results) == 0.15
    assert departure_threshold(results[:1]) is None
