import math

import numpy as np
import pytest
from scipy import stats

from instance import WeightDistribution, dump_weights, instance_from_weights, read_weights, sample_weights
from lattice import LatticeKind, build_lattice


@pytest.fixture(scope="module")
def q64():
    return build_lattice(LatticeKind.Q, 64)


def test_exponential_mean_is_one(q64):
    inst = sample_weights(q64, master_seed=12345, instance_index=0)

    assert inst.weights.shape == (8192,)
    assert abs(inst.weights.mean() - 1.0) < 0.05


def test_tail_fraction_matches_exponential(q64):
    draws = np.concatenate([sample_weights(q64, 7, i).weights for i in range(13)])

    assert draws.size > 100_000
    assert abs(np.mean(draws > 1.0) - math.exp(-1)) < 0.01


def test_pooled_draws_pass_kolmogorov_smirnov(q64):
    draws = np.concatenate([sample_weights(q64, 2025, i).weights for i in range(13)])

    assert draws.size > 100_000
    assert stats.kstest(draws, "expon").statistic < 0.01


def test_same_seed_and_index_repeat(q64):
    a = sample_weights(q64, 99, 3)
    b = sample_weights(q64, 99, 3)

    assert np.array_equal(a.weights, b.weights)


def test_index_and_seed_change_the_draw(q64):
    base = sample_weights(q64, 99, 3).weights

    assert not np.array_equal(base, sample_weights(q64, 99, 4).weights)
    assert not np.array_equal(base, sample_weights(q64, 100, 3).weights)


def test_weights_are_positive_and_distinct():
    g = build_lattice(LatticeKind.T, 16)
    inst = sample_weights(g, 1, 0)

    assert np.all(inst.weights > 0)
    assert np.all(np.isfinite(inst.weights))
    assert np.unique(inst.weights).size == g.num_edges


def test_uniform_distribution_stays_in_unit_interval():
    g = build_lattice(LatticeKind.Q, 16)
    inst = sample_weights(g, 1, 0, WeightDistribution.UNIFORM)

    assert np.all((inst.weights > 0) & (inst.weights <= 1))
    assert inst.distribution is WeightDistribution.UNIFORM


def test_weights_are_read_only():
    inst = sample_weights(build_lattice(LatticeKind.Q, 4), 0, 0)

    with pytest.raises(ValueError):
        inst.weights[0] = 1.0


def test_weight_file_round_trip(tmp_path):
    g = build_lattice(LatticeKind.H, 8)
    inst = sample_weights(g, 5, 2)
    path = tmp_path / "weights.txt"

    dump_weights(inst, path)

    assert np.array_equal(read_weights(path, g), inst.weights)


def test_explicit_weights_must_match_edge_count():
    g = build_lattice(LatticeKind.Q, 4)

    with pytest.raises(ValueError):
        instance_from_weights(g, [1.0, 2.0])
