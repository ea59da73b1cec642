import numpy as np
import pytest

from instance import instance_from_weights
from lattice import small_graph
from utils.logging import set_level


@pytest.fixture(autouse=True)
def reset_log_level():
    yield
    set_level("INFO")


@pytest.fixture
def four_cycle():
    """0-1-2-3-0 with edge ids 0..3 in that order and weights 0.1..0.4."""
    g = small_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)], parity=[0, 1, 0, 1])
    return instance_from_weights(g, [0.1, 0.2, 0.3, 0.4])


@pytest.fixture
def single_edge():
    return instance_from_weights(small_graph(2, [(0, 1)], parity=[0, 1]), [0.7])


@pytest.fixture
def path_of_four():
    g = small_graph(4, [(0, 1), (1, 2), (2, 3)], parity=[0, 1, 0, 1])
    return instance_from_weights(g, [0.5, 0.25, 0.125])


@pytest.fixture
def k22():
    """a1=0, a2=1, b1=2, b2=3; edges a1b1, a1b2, a2b1, a2b2."""
    g = small_graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)], parity=[0, 0, 1, 1])
    return instance_from_weights(g, [1.0, 2.0, 3.0, 1.0])


@pytest.fixture
def triangle_strip():
    """Eight-vertex non-bipartite test graph: two rows of four joined by diagonals."""
    pairs = [
        (0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7),
        (0, 4), (1, 5), (2, 6), (3, 7),
        (0, 5), (1, 6), (2, 7), (3, 4),
    ]
    # fractional parts of square roots of primes: no two matchings tie
    weights = np.sqrt([2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43]) % 1
    return instance_from_weights(small_graph(8, pairs), weights)
