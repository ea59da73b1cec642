import time

import numpy as np
import pytest

from excitation import max_weight_excite
from instance import instance_from_weights, sample_weights
from kasteleyn import count_tilings_dp, open_grid_graph
from lattice import LatticeKind, build_lattice, small_graph
from matching.blossom import NO_NODE, greedy_start, min_weight_perfect_matching
from matching.brute_force import brute_force_matching
from matching.hungarian import min_weight_perfect_matching_bipartite
from matching.models import dump_matching, read_matching, verify_perfect
from matching.prepare import prepare
from utils.errors import MalformedMatching, NoPerfectMatching, NonFiniteWeight, NotBipartite, TooLarge
from utils.rng import stream


def test_single_edge(single_edge):
    m = min_weight_perfect_matching(single_edge)

    assert m.edge_ids == {0}
    assert m.cost == 0.7


def test_four_cycle_prefers_cheaper_pair(four_cycle):
    m = min_weight_perfect_matching(four_cycle)

    assert m.edge_ids == {0, 2}
    assert m.cost == pytest.approx(0.4)


def test_four_cycle_brute_force_counts_two(four_cycle):
    result = brute_force_matching(four_cycle)

    assert result.matching.edge_ids == {0, 2}
    assert result.count == 2


def test_path_has_one_matching(path_of_four):
    result = brute_force_matching(path_of_four)

    assert result.matching.edge_ids == {0, 2}
    assert result.count == 1
    assert min_weight_perfect_matching(path_of_four).edge_ids == {0, 2}


def test_complete_bipartite_two_by_two(k22):
    m = min_weight_perfect_matching_bipartite(k22)

    assert m.edge_ids == {0, 3}
    assert m.cost == 2.0
    assert min_weight_perfect_matching(k22) == m


def test_forbidden_edges_are_respected(four_cycle):
    m = min_weight_perfect_matching(four_cycle, forbidden={2})

    assert m.edge_ids == {1, 3}
    assert m.cost == pytest.approx(0.6)


def test_penalties_move_the_argmin_only(four_cycle):
    m = min_weight_perfect_matching(four_cycle, penalties=np.array([0.5, 0.0, 0.5, 0.0]))

    assert m.edge_ids == {1, 3}
    assert m.cost == pytest.approx(0.6)
    assert m.objective == pytest.approx(0.6)


def test_odd_vertex_count_has_no_matching():
    inst = instance_from_weights(small_graph(3, [(0, 1), (1, 2)]), [1.0, 2.0])

    with pytest.raises(NoPerfectMatching):
        min_weight_perfect_matching(inst)
    with pytest.raises(NoPerfectMatching):
        brute_force_matching(inst)


def test_forbidding_a_bridge_leaves_no_matching(path_of_four):
    with pytest.raises(NoPerfectMatching):
        min_weight_perfect_matching(path_of_four, forbidden={0})


def test_non_finite_weight_is_rejected():
    inst = instance_from_weights(small_graph(2, [(0, 1)]), [np.nan])

    with pytest.raises(NonFiniteWeight):
        min_weight_perfect_matching(inst)


def test_triangular_lattice_is_not_bipartite():
    inst = sample_weights(build_lattice(LatticeKind.T, 4), 0, 0)

    with pytest.raises(NotBipartite):
        min_weight_perfect_matching_bipartite(inst)


def test_brute_force_refuses_large_graphs():
    inst = sample_weights(build_lattice(LatticeKind.Q, 6), 0, 0)

    with pytest.raises(TooLarge):
        brute_force_matching(inst)


@pytest.mark.parametrize("kind", list(LatticeKind))
def test_blossom_matches_brute_force(kind):
    g = build_lattice(kind, 4)
    for index in range(25):
        inst = sample_weights(g, 2024, index)
        blossom = min_weight_perfect_matching(inst)
        oracle = brute_force_matching(inst).matching

        assert blossom.edge_ids == oracle.edge_ids, f"{kind} instance {index}"
        assert blossom.cost == oracle.cost


def test_blossom_matches_brute_force_on_non_bipartite_graph(triangle_strip):
    blossom = min_weight_perfect_matching(triangle_strip)
    oracle = brute_force_matching(triangle_strip).matching

    assert blossom == oracle


def test_blossom_matches_brute_force_with_forbidden_and_penalties():
    g = build_lattice(LatticeKind.T, 4)
    for index in range(10):
        inst = sample_weights(g, 77, index)
        ground = min_weight_perfect_matching(inst)
        heaviest = max(ground.edge_ids, key=lambda e: inst.weights[e])
        penalties = 0.3 * ground.indicator(g.num_edges).astype(float)

        assert min_weight_perfect_matching(inst, forbidden={heaviest}) == brute_force_matching(inst, forbidden={heaviest}).matching
        assert min_weight_perfect_matching(inst, penalties=penalties) == brute_force_matching(inst, penalties=penalties).matching


@pytest.mark.parametrize("kind", [LatticeKind.H, LatticeKind.Q])
def test_hungarian_agrees_with_blossom(kind):
    g = build_lattice(kind, 4)
    for index in range(50):
        inst = sample_weights(g, 31, index)

        assert min_weight_perfect_matching_bipartite(inst) == min_weight_perfect_matching(inst)


def test_hungarian_agrees_on_larger_lattice():
    inst = sample_weights(build_lattice(LatticeKind.H, 12), 3, 0)

    assert min_weight_perfect_matching_bipartite(inst) == min_weight_perfect_matching(inst)


def test_degenerate_q2_collapses_parallel_edges():
    inst = sample_weights(build_lattice(LatticeKind.Q, 2), 11, 0)
    result = brute_force_matching(inst)

    assert result.count == count_tilings_dp(2, 2)
    assert min_weight_perfect_matching(inst) == result.matching
    assert min_weight_perfect_matching_bipartite(inst) == result.matching


def test_open_grid_count_matches_dp():
    g = open_grid_graph(3, 4)
    inst = instance_from_weights(g, np.linspace(0.1, 1.0, g.num_edges))

    assert brute_force_matching(inst).count == count_tilings_dp(3, 4) == 11


def test_library_assignment_agrees_on_bipartite_lattice():
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import min_weight_full_bipartite_matching

    g = build_lattice(LatticeKind.Q, 8)
    inst = sample_weights(g, 8, 0)
    left = [v for v in range(g.num_vertices) if g.parity[v] == 0]
    right = [v for v in range(g.num_vertices) if g.parity[v] == 1]
    row, col = {v: i for i, v in enumerate(left)}, {v: i for i, v in enumerate(right)}
    rows, cols = [], []
    for u, v in g.edges:
        a, b = (u, v) if g.parity[u] == 0 else (v, u)
        rows.append(row[int(a)])
        cols.append(col[int(b)])
    biadjacency = csr_matrix((inst.weights, (rows, cols)), shape=(len(left), len(right)))

    r, c = min_weight_full_bipartite_matching(biadjacency)
    library_cost = float(biadjacency[r, c].sum())

    assert min_weight_perfect_matching(inst).cost == pytest.approx(library_cost, rel=1e-12)


def test_verify_perfect_rejects_double_cover(four_cycle):
    with pytest.raises(MalformedMatching):
        verify_perfect(four_cycle.graph, [0, 1])


def test_matching_file_round_trip(tmp_path, four_cycle):
    m = min_weight_perfect_matching(four_cycle)
    path = tmp_path / "matching.txt"

    dump_matching(m, path)
    cost, ids = read_matching(path)

    assert cost == m.cost
    assert ids == [0, 2]


@pytest.mark.parametrize("kind", list(LatticeKind))
def test_forbidding_more_edges_never_lowers_the_cost(kind):
    g = build_lattice(kind, 4)
    for index in range(5):
        inst = sample_weights(g, 404, index)
        order = stream(index).permutation(g.num_edges)
        forbidden: set[int] = set()
        cost = min_weight_perfect_matching(inst).cost
        for e in order:
            forbidden.add(int(e))
            try:
                m = min_weight_perfect_matching(inst, forbidden=forbidden)
            except NoPerfectMatching:
                break
            assert not (m.edge_ids & forbidden)
            assert m.cost >= cost - 1e-12, f"{kind} instance {index} after {len(forbidden)} forbidden"
            cost = m.cost


def test_blossom_matches_brute_force_on_random_graphs():
    rng = stream(2718)
    for trial in range(200):
        n = 2 * int(rng.integers(2, 6))
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5]
        if not pairs:
            continue
        inst = instance_from_weights(small_graph(n, pairs), rng.exponential(size=len(pairs)))
        try:
            oracle = brute_force_matching(inst).matching
        except NoPerfectMatching:
            with pytest.raises(NoPerfectMatching):
                min_weight_perfect_matching(inst)
            continue

        assert min_weight_perfect_matching(inst) == oracle, f"trial {trial}"


def test_greedy_start_is_dual_feasible():
    inst = sample_weights(build_lattice(LatticeKind.T, 8), 5, 0)
    sg = prepare(inst)
    top = max(sg.int_weights) + 1
    adj: list[dict[int, int]] = [{} for _ in range(sg.num_vertices)]
    for (u, v), w in zip(sg.endpoints, sg.int_weights):
        adj[u][v] = adj[v][u] = 2 * (top - w)

    mate, dualvar = greedy_start(adj)

    assert all(d % 2 == 0 for d in dualvar)
    assert mate.count(NO_NODE) < sg.num_vertices // 2
    for u in range(sg.num_vertices):
        for v, wt in adj[u].items():
            assert dualvar[u] + dualvar[v] >= 2 * wt
        if mate[u] != NO_NODE:
            assert mate[mate[u]] == u
            assert dualvar[u] + dualvar[mate[u]] == 2 * adj[u][mate[u]]


@pytest.mark.slow
def test_triangular_l160_solves_within_ten_seconds():
    inst = sample_weights(build_lattice(LatticeKind.T, 160), 1, 0)

    started = time.perf_counter()
    ground = min_weight_perfect_matching(inst)
    elapsed = time.perf_counter() - started

    assert len(ground) == 160 * 160 // 2
    assert elapsed < 10.0


@pytest.mark.slow
def test_square_l64_ground_and_max_weight_within_a_second():
    g = build_lattice(LatticeKind.Q, 64)
    started = time.perf_counter()
    for index in range(5):
        inst = sample_weights(g, 1, index)
        result = max_weight_excite(inst, min_weight_perfect_matching(inst))
        assert result.delta_e > 0
    per_instance = (time.perf_counter() - started) / 5

    assert per_instance < 1.0
