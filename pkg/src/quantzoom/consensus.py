"""Finite-time quantized average consensus with a max/min stopping rule.

Every node holds an integer mass ``y`` spread over ``z`` tokens.  In each
synchronous round a node keeps one token and sends every other token, with
its share of the mass, to itself or to a uniformly chosen out-neighbour.
In parallel, nodes run max- and min-consensus on ``ceil(y/z)`` and
``floor(y/z)`` over windows of ``D`` rounds; when the two agree to within one
at the end of a window, all nodes stop and output ``m * delta``.

Round semantics: all nodes split and send, then all nodes receive.  Sums of
``y`` and ``z`` are therefore conserved at every round boundary.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .digraph import Digraph
from .metrics import BOUNDS, BOUNDS_DEDUP, PIECES, VOTES, BitCounter
from .quantize import GridValue, QuantizationLevel, quantize

__all__ = [
    "ConsensusNodeState",
    "ConsensusBudgetError",
    "FitquacResult",
    "RoundReport",
    "init_consensus",
    "routing_probabilities",
    "node_streams",
    "consensus_round",
    "run_fitquac",
    "max_consensus",
    "max_consensus_round",
    "min_consensus",
    "protocol_trace_csv",
    "trace_recorder",
]

DEFAULT_ROUND_BUDGET = 200_000


class ConsensusBudgetError(RuntimeError):
    """Raised when the averaging protocol has not stopped within its round budget."""

    def __init__(self, message: str, states: Sequence["ConsensusNodeState"] = ()):
        super().__init__(message)
        self.states = list(states)


@dataclass
class ConsensusNodeState:
    y: int
    z: int
    M: int | None = None
    m: int | None = None
    halted: bool = False
    output: GridValue | None = None
    # Bounds last put on the wire, for the duplicate-suppression tally.
    sent_M: int | None = field(default=None, repr=False)
    sent_m: int | None = field(default=None, repr=False)

    def ratio_bounds(self) -> tuple[int, int]:
        return -(-self.y // self.z), self.y // self.z


@dataclass
class RoundReport:
    pieces: list  # (sender, receiver, mass)
    bounds: list  # (sender, receiver, M, m)
    bits: dict


@dataclass
class FitquacResult:
    outputs: list[GridValue]
    rounds: int
    bits: dict
    halt_round: int


def init_consensus(x_half, level: QuantizationLevel) -> ConsensusNodeState:
    return ConsensusNodeState(y=2 * quantize(x_half, level), z=2)


def routing_probabilities(g: Digraph, i: int) -> dict[int, float]:
    """Uniform probabilities over node ``i`` itself and its out-neighbours."""
    outs = g.out_neighbors[i]
    if not outs:
        raise ValueError(f"node {i} has no out-neighbours; the digraph cannot be strongly connected")
    p = 1.0 / (1 + len(outs))
    return {l: p for l in (i, *outs)}


def node_streams(seed: int | np.random.SeedSequence, n: int) -> list[random.Random]:
    """One independent generator per node, derived from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # Children are built explicitly; SeedSequence.spawn would advance ``ss``.
    children = (np.random.SeedSequence(ss.entropy, spawn_key=(*ss.spawn_key, i)) for i in range(n))
    return [random.Random(int.from_bytes(c.generate_state(4, np.uint32).tobytes(), "little")) for c in children]


def consensus_round(
    states: list[ConsensusNodeState],
    g: Digraph,
    lam: int,
    rngs: Sequence[random.Random],
    D: int | None = None,
    counter: BitCounter | None = None,
    record: bool = False,
) -> RoundReport:
    """Execute round ``lam`` (1-based) for all nodes, updating ``states`` in place.

    Windows of ``D`` rounds start at rounds with ``(lam - 1) % D == 0``, where
    each node resets its bounds to ``ceil(y/z)`` and ``floor(y/z)``.  Every
    round each node then folds the bounds of its in-neighbours, splits off
    ``z - 1`` pieces and routes them.  The stopping test is left to the caller.
    """
    if D is None:
        D = g.diameter
    local = BitCounter(sign_bit=counter.sign_bit if counter else False)

    if (lam - 1) % D == 0:
        for s in states:
            s.M, s.m = s.ratio_bounds()

    bounds_msgs = []
    for i, s in enumerate(states):
        outs = g.out_neighbors[i]
        if not outs:
            continue
        local.charge(BOUNDS, s.M, len(outs))
        local.charge(BOUNDS, s.m, len(outs))
        if s.M != s.sent_M:
            local.charge(BOUNDS_DEDUP, s.M, len(outs))
        if s.m != s.sent_m:
            local.charge(BOUNDS_DEDUP, s.m, len(outs))
        s.sent_M, s.sent_m = s.M, s.m
        if record:
            bounds_msgs.extend((i, l, s.M, s.m) for l in outs)
    new_bounds = []
    for i, s in enumerate(states):
        M, m = s.M, s.m
        for j in g.in_neighbors[i]:
            M = max(M, states[j].M)
            m = min(m, states[j].m)
        new_bounds.append((M, m))
    for s, (M, m) in zip(states, new_bounds):
        s.M, s.m = M, m

    pieces = []
    for i, s in enumerate(states):
        assert s.z >= 1, f"node {i} holds no token"
        candidates = (i, *g.out_neighbors[i])
        rng = rngs[i]
        while s.z > 1:
            c = s.y // s.z
            s.y -= c
            s.z -= 1
            pieces.append((i, candidates[rng.randrange(len(candidates))], c))
    for i, l, c in pieces:
        if l != i:
            local.charge(PIECES, c)
        states[l].y += c
        states[l].z += 1

    if counter is not None:
        counter.merge(local)
    return RoundReport(pieces if record else [], bounds_msgs, local.snapshot())


def run_fitquac(
    x_half: Sequence,
    g: Digraph,
    level: QuantizationLevel,
    rngs: Sequence[random.Random],
    D: int | None = None,
    counter: BitCounter | None = None,
    round_budget: int = DEFAULT_ROUND_BUDGET,
    observer: Callable[[int, list[ConsensusNodeState], RoundReport], None] | None = None,
    check: bool = True,
) -> FitquacResult:
    """Run the averaging protocol to completion.

    Parameters
    ----------
    x_half : sequence of real or rational
        Per-node input values.
    g : Digraph
        Strongly connected topology.
    level : QuantizationLevel
        Grid on which the inputs are quantized and the output is expressed.
    rngs : sequence of random.Random
        Per-node routing streams, see :func:`node_streams`.
    D : int, optional
        Diameter or an upper bound on it; defaults to ``g.diameter``.
    counter : BitCounter, optional
        Accumulates transmitted bits.
    observer : callable, optional
        Called as ``observer(lam, states, report)`` after every round.
    check : bool
        Assert conservation of total mass and tokens after every round.

    Returns
    -------
    FitquacResult
        Identical :class:`GridValue` outputs for every node, the number of
        rounds used and the bits spent.
    """
    if len(x_half) != g.n:
        raise ValueError(f"expected {g.n} inputs, got {len(x_half)}")
    if D is None:
        D = g.diameter
    states = [init_consensus(x, level) for x in x_half]
    total_y = sum(s.y for s in states)
    total_z = 2 * g.n
    spent = BitCounter(sign_bit=counter.sign_bit if counter else False)
    record = observer is not None

    for lam in range(1, round_budget + 1):
        report = consensus_round(states, g, lam, rngs, D, spent, record)
        if check:
            assert sum(s.y for s in states) == total_y, f"mass not conserved at round {lam}"
            assert sum(s.z for s in states) == total_z, f"tokens not conserved at round {lam}"
        if lam % D == 0:
            for s in states:
                if s.M - s.m <= 1:
                    s.halted = True
                    s.output = GridValue(s.m, level)
        if observer is not None:
            observer(lam, states, report)
        halted = [s.halted for s in states]
        if any(halted):
            assert all(halted), f"nodes disagree on halting at round {lam}"
            outputs = [s.output for s in states]
            assert len({o.m for o in outputs}) == 1, "nodes halted with different outputs"
            if counter is not None:
                counter.merge(spent)
            return FitquacResult(outputs, lam, spent.snapshot(), lam)

    dump = "; ".join(f"{i}: y={s.y} z={s.z} M={s.M} m={s.m}" for i, s in enumerate(states))
    raise ConsensusBudgetError(f"averaging did not stop within {round_budget} rounds ({dump})", states)


def max_consensus_round(values: Sequence[int], g: Digraph) -> list[int]:
    """One synchronous broadcast-and-fold step."""
    return [max([values[i], *(values[j] for j in g.in_neighbors[i])]) for i in range(g.n)]


def max_consensus(
    values: Sequence[int],
    g: Digraph,
    D: int | None = None,
    counter: BitCounter | None = None,
    category: str = VOTES,
) -> list[int]:
    """Run ``D`` rounds of max-consensus; every node ends with the global maximum."""
    if D is None:
        D = g.diameter
    current = list(values)
    for _ in range(D):
        if counter is not None:
            for i, v in enumerate(current):
                counter.charge(category, v, g.out_degree(i))
        current = max_consensus_round(current, g)
    return current


def min_consensus(values: Sequence[int], g: Digraph, D: int | None = None, counter: BitCounter | None = None,
                  category: str = VOTES) -> list[int]:
    return [-v for v in max_consensus([-v for v in values], g, D, counter, category)]


def protocol_trace_csv(rows: Sequence[tuple], with_step: bool = False) -> str:
    """CSV with columns ``round,node,category,value,destination``, led by ``k`` if ``with_step``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["k"] if with_step else []) + ["round", "node", "category", "value", "destination"])
    w.writerows(rows)
    return buf.getvalue()


def trace_recorder(rows: list) -> Callable[[int, list[ConsensusNodeState], RoundReport], None]:
    """Observer that appends one row per transmitted value to ``rows``."""

    def observe(lam, states, report):
        for i, l, M, m in report.bounds:
            rows.append((lam, i, "bound_max", M, l))
            rows.append((lam, i, "bound_min", m, l))
        for i, l, c in report.pieces:
            rows.append((lam, i, "piece", c, l))

    return observe
