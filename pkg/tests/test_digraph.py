import pytest
from hypothesis import given, settings, strategies as st

from quantzoom.digraph import (
    Digraph,
    GraphError,
    GraphGenerationError,
    complete,
    diameter,
    generate_random,
    is_strongly_connected,
    read_edge_list,
    ring,
)

INF = float("inf")


def floyd_warshall_diameter(n, links):
    """Independent all-pairs oracle; returns None when some pair is unreachable."""
    d = [[0 if i == j else INF for j in range(n)] for i in range(n)]
    for i, j in links:
        d[i][j] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    worst = max(max(row) for row in d)
    return None if worst == INF else int(worst)


def test_three_cycle():
    g = Digraph.from_links(3, [(0, 1), (1, 2), (2, 0)])
    assert is_strongly_connected(g)
    assert diameter(g) == 2


def test_path_is_not_strongly_connected():
    g = Digraph.from_links(3, [(0, 1), (1, 2)])
    assert not is_strongly_connected(g)
    with pytest.raises(GraphError):
        diameter(g)


@pytest.mark.parametrize("n", [2, 4, 7])
def test_complete(n):
    g = complete(n)
    assert is_strongly_connected(g) and diameter(g) == 1


def test_ring_20():
    assert diameter(ring(20)) == 19


def test_edge_convention():
    g = Digraph.from_links(2, [(0, 1)])
    assert g.edges == frozenset({(1, 0)})
    assert g.out_neighbors[0] == (1,) and g.in_neighbors[1] == (0,)


def test_rejects_self_loops_and_small_graphs():
    with pytest.raises(GraphError):
        Digraph(3, [(1, 1)])
    with pytest.raises(GraphError):
        Digraph(1, [])


def test_immutable():
    g = ring(3)
    with pytest.raises(AttributeError):
        g.n = 4


@pytest.mark.parametrize("n", [2, 5])
def test_generate_full_probability_gives_complete(n):
    g = generate_random(n, 1.0, seed=123)
    assert g == complete(n) and g.diameter == 1


def test_generate_deterministic():
    a = generate_random(20, 0.3, seed=42)
    b = generate_random(20, 0.3, seed=42)
    assert a.edges == b.edges and a.strongly_connected
    assert generate_random(20, 0.3, seed=43).edges != a.edges


def test_generate_gives_up():
    with pytest.raises(GraphGenerationError, match="edge_prob"):
        generate_random(20, 0.001, seed=0, retry_budget=50)


@pytest.mark.parametrize("p", [0, -0.1, 1.5])
def test_generate_rejects_bad_probability(p):
    with pytest.raises(GraphError):
        generate_random(4, p, seed=0)


def test_exhaustive_small_against_oracle():
    for n in (2, 3):
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        for mask in range(1 << len(pairs)):
            links = [p for b, p in enumerate(pairs) if mask >> b & 1]
            g = Digraph.from_links(n, links)
            expected = floyd_warshall_diameter(n, links)
            assert is_strongly_connected(g) == (expected is not None)
            if expected is not None:
                assert diameter(g) == expected


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 8), st.floats(0.15, 1.0), st.integers(0, 2**32 - 1))
def test_random_graphs_against_oracle(n, p, seed):
    g = generate_random(n, p, seed=seed)
    assert diameter(g) == floyd_warshall_diameter(n, g.links())
    assert 1 <= diameter(g) <= n - 1
    for l, i in g.edges:
        assert l in g.out_neighbors[i] and i in g.in_neighbors[l]
    assert sum(map(len, g.out_neighbors)) == len(g.edges) == sum(map(len, g.in_neighbors))


def test_edge_list_round_trip(tmp_path):
    g = generate_random(6, 0.5, seed=1)
    f = tmp_path / "g.txt"
    g.write_edge_list(f)
    assert read_edge_list(f) == g
    assert "0 -> " in g.to_dot()


def test_edge_list_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("0 1\n1 x\n")
    with pytest.raises(GraphError, match=":2:"):
        read_edge_list(f)
