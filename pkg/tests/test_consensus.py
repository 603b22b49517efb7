from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quantzoom.consensus import (
    ConsensusBudgetError,
    ConsensusNodeState,
    consensus_round,
    init_consensus,
    max_consensus,
    min_consensus,
    node_streams,
    protocol_trace_csv,
    routing_probabilities,
    run_fitquac,
    trace_recorder,
)
from quantzoom.digraph import Digraph, complete, generate_random, ring
from quantzoom.metrics import PIECES, BitCounter
from quantzoom.quantize import QuantizationLevel, quantize

MILLI = QuantizationLevel("0.001")


def exact_mean_of_quantized(xs, level):
    return Fraction(sum(quantize(x, level) for x in xs), len(xs))


@pytest.mark.parametrize("x, y", [(0.004, 8), (0.0, 0), (2.3456, 4690)])
def test_init(x, y):
    s = init_consensus(x, MILLI)
    assert (s.y, s.z, s.halted) == (y, 2, False)


def test_routing_probabilities():
    g = Digraph.from_links(5, [(0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (3, 4), (4, 0)])
    p = routing_probabilities(g, 0)
    assert p == {0: 0.25, 1: 0.25, 2: 0.25, 3: 0.25}
    p = routing_probabilities(g, 4)
    assert p == {4: 0.5, 0: 0.5}
    assert sum(routing_probabilities(g, 1).values()) == pytest.approx(1)


def test_routing_requires_out_neighbour():
    g = Digraph.from_links(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        routing_probabilities(g, 2)


def test_self_routing_only_leaves_state_unchanged():
    # node 0 has no out-neighbours and node 1 keeps its single token
    g = Digraph.from_links(2, [(1, 0)])
    states = [ConsensusNodeState(17, 5), ConsensusNodeState(3, 1)]
    rngs = node_streams(0, 2)
    for lam in range(1, 6):
        consensus_round(states, g, lam, rngs, D=1)
        assert (states[0].y, states[0].z) == (17, 5)
        assert (states[1].y, states[1].z) == (3, 1)


def test_conservation_two_nodes():
    g = complete(2)
    states = [ConsensusNodeState(8, 2), ConsensusNodeState(12, 2)]
    rngs = node_streams(7, 2)
    for lam in range(1, 30):
        consensus_round(states, g, lam, rngs)
        assert sum(s.y for s in states) == 20 and sum(s.z for s in states) == 4
        assert all(s.z >= 1 for s in states)


def test_sequential_split_pieces_differ_by_at_most_one():
    g = complete(3)
    states = [ConsensusNodeState(10, 4), ConsensusNodeState(0, 1), ConsensusNodeState(0, 1)]
    report = consensus_round(states, g, 1, node_streams(3, 3), record=True)
    masses = [c for i, _, c in report.pieces if i == 0]
    assert masses == [2, 2, 3]  # 10//4, 8//3, 6//2; the retained token keeps 3


def test_determinism_replay():
    g = Digraph.from_links(3, [(0, 1), (1, 2), (2, 0), (0, 2)])
    runs = []
    for _ in range(2):
        rows = []
        run_fitquac([0.013, 0.2, 0.05], g, MILLI, node_streams(11, 3), observer=trace_recorder(rows))
        runs.append(rows)
    assert runs[0] == runs[1] and runs[0]


def test_two_node_example():
    for seed in range(50):
        res = run_fitquac([0.004, 0.006], complete(2), MILLI, node_streams(seed, 2))
        assert [o.exact for o in res.outputs] == [Fraction(5, 1000)] * 2


def test_equal_inputs_halt_at_first_window():
    g = ring(5)
    res = run_fitquac([Fraction(3, 1000)] * 5, g, MILLI, node_streams(0, 5))
    assert res.rounds == g.diameter
    assert all(o.m == 3 for o in res.outputs)


def test_budget_error_carries_state():
    g = ring(6)
    with pytest.raises(ConsensusBudgetError) as exc:
        run_fitquac([0.0, 1.0, 0.0, 1.0, 0.0, 1.0], g, MILLI, node_streams(0, 6), round_budget=3)
    assert len(exc.value.states) == 6 and "y=" in str(exc.value)


@pytest.mark.parametrize("seed", range(100))
def test_accuracy_n20(seed):
    g = generate_random(20, 0.3, seed=1000 + seed)
    xs = list(np.random.default_rng(seed).uniform(1, 5, 20))
    res = run_fitquac(xs, g, MILLI, node_streams(seed, 20))
    rho = exact_mean_of_quantized(xs, MILLI)
    assert len({o.m for o in res.outputs}) == 1
    assert abs(res.outputs[0].m - rho) <= 1
    assert res.rounds % g.diameter == 0


def test_negative_inputs_conserve_mass():
    g = generate_random(6, 0.5, seed=5)
    xs = [-0.5, 0.25, -1.75, 2.0, 0.0, -0.001]
    res = run_fitquac(xs, g, MILLI, node_streams(5, 6))
    assert abs(res.outputs[0].m - exact_mean_of_quantized(xs, MILLI)) <= 1


def test_bits_only_for_links():
    g = complete(3)
    counter = BitCounter()
    rows = []
    run_fitquac([0.1, 0.2, 0.3], g, MILLI, node_streams(0, 3), counter=counter, observer=trace_recorder(rows))
    sent = [v for _, i, cat, v, dst in rows if cat == "piece" and i != dst]
    assert counter.messages[PIECES] == len(sent)
    assert "round,node,category,value,destination" in protocol_trace_csv(rows)


def test_max_consensus_examples():
    cyc = Digraph.from_links(3, [(0, 1), (1, 2), (2, 0)])
    assert max_consensus([0, 1, 0], cyc, 2) == [1, 1, 1]
    assert max_consensus([0, 0, 0], cyc) == [0, 0, 0]
    r = ring(5)
    assert max_consensus([0, 0, 0, 0, 9], r) == [9] * 5
    assert max_consensus([0, 0, 0, 0, 9], r, 3) != [9] * 5
    assert min_consensus([4, 2, 7], cyc) == [2, 2, 2]


def test_max_consensus_counts_vote_bits():
    g = ring(4)
    c = BitCounter()
    max_consensus([0, 1, 0, 0], g, counter=c)
    assert c.bits["votes"] == 4 * 3


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.floats(0.2, 1.0), st.integers(0, 10**6),
       st.lists(st.integers(-1000, 1000), min_size=12, max_size=12))
def test_max_consensus_reaches_max_within_diameter(n, p, seed, values):
    g = generate_random(n, p, seed=seed)
    vals = values[:n]
    assert max_consensus(vals, g) == [max(vals)] * n
