"""Distributed gradient descent with event-triggered refinement of the grid.

Each outer step every node takes a local gradient step and the network
averages the results with :func:`~quantzoom.consensus.run_fitquac`.  When the
common estimate stops moving (a *convergence point*) each node compares its
local cost against the previous convergence point and votes; a max-consensus
on the votes decides between stopping and refining the grid by ``c_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .consensus import DEFAULT_ROUND_BUDGET, max_consensus, node_streams, run_fitquac, trace_recorder
from .costs import CostEnsemble, is_finite, optimal_point
from .digraph import Digraph
from .metrics import BOUNDS, BOUNDS_DEDUP, PIECES, VOTES, BitCounter, TraceRecord, error
from .quantize import GridValue, QuantizationLevel, as_fraction, quantize, refine

__all__ = [
    "ZOOM",
    "STATIC",
    "RunConfig",
    "OptimizerNodeState",
    "ZoomEvent",
    "ConvergencePoint",
    "RunResult",
    "DivergenceError",
    "local_gradient_step",
    "optimization_step",
    "detect_convergence_point",
    "vote_and_decide",
    "run",
    "initial_states",
]

ZOOM = "zoom"
STATIC = "static"

VOTED_STOP = "voted-stop"
CONVERGED = "converged"
FINEST_LEVEL = "finest-level"
BUDGET = "budget"


class DivergenceError(ArithmeticError):
    pass


@dataclass
class RunConfig:
    alpha: Fraction | float
    level: QuantizationLevel
    eps_stop: Fraction | float = Fraction(3, 1000)
    mode: str = ZOOM
    max_outer_steps: int = 200
    seed: int = 0
    # Stop at a convergence point once this many refinements have happened.
    max_refinements: int | None = None
    round_budget: int = DEFAULT_ROUND_BUDGET
    suppress_duplicate_bounds: bool = False
    sign_bit: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.alpha, str):
            self.alpha = as_fraction(self.alpha)
        if isinstance(self.eps_stop, str):
            self.eps_stop = math.inf if self.eps_stop.strip() in ("inf", "+inf") else as_fraction(self.eps_stop)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.eps_stop >= 0:
            raise ValueError(f"eps_stop must be nonnegative, got {self.eps_stop}")
        if self.max_outer_steps < 1:
            raise ValueError(f"max_outer_steps must be >= 1, got {self.max_outer_steps}")
        if self.mode not in (ZOOM, STATIC):
            raise ValueError(f"mode must be {ZOOM!r} or {STATIC!r}, got {self.mode!r}")


@dataclass
class OptimizerNodeState:
    x: GridValue
    S: list[int] = field(default_factory=lambda: [0])
    f_at_gamma: list = field(default_factory=list)
    vote: int = 1
    flag: int = 1

    @property
    def ind(self) -> int:
        return len(self.S) - 1


@dataclass(frozen=True)
class ZoomEvent:
    k: int
    old_delta: Fraction
    new_delta: Fraction


@dataclass(frozen=True)
class ConvergencePoint:
    k: int
    j: int
    x: GridValue


@dataclass
class RunResult:
    trace: list[TraceRecord]
    history: list[tuple[GridValue, ...]]
    zoom_events: list[ZoomEvent]
    convergence_points: list[ConvergencePoint]
    termination_step: int
    final_x: list[GridValue]
    reason: str
    counter: BitCounter
    x_star: Fraction | float
    mode: str = ZOOM
    suppress_duplicate_bounds: bool = False

    @property
    def steps(self) -> int:
        return self.termination_step


def local_gradient_step(x: GridValue, f, alpha):
    """``x - alpha * grad f(x)``, exact when ``alpha`` and the cost are rational."""
    xr = x.exact
    if isinstance(alpha, float) or not all(isinstance(getattr(f, a, 0), (int, Fraction)) for a in ("beta", "x0")):
        xr = float(xr)
    out = xr - alpha * f.grad(xr)
    if not is_finite(out):
        raise DivergenceError(f"gradient step produced {out}; the step size is too large")
    return out


def initial_states(x0s: Sequence, level: QuantizationLevel) -> list[OptimizerNodeState]:
    return [OptimizerNodeState(GridValue(quantize(x, level), level)) for x in x0s]


def optimization_step(states, ensemble, g: Digraph, cfg: RunConfig, rngs, counter=None, observer=None):
    """One gradient step plus one averaging run.

    Returns the common new estimate per node (not yet stored in ``states``) and
    the number of averaging rounds used.
    """
    level = states[0].x.level
    half = [local_gradient_step(s.x, f, cfg.alpha) for s, f in zip(states, ensemble)]
    res = run_fitquac(half, g, level, rngs, counter=counter, round_budget=cfg.round_budget, observer=observer)
    return res.outputs, res.rounds


def detect_convergence_point(state: OptimizerNodeState, x_new: GridValue, k: int, f) -> bool:
    """Record ``k`` as a convergence point when ``x_new`` equals the current estimate."""
    if x_new.level != state.x.level:
        raise ValueError("estimates on different grids")
    hit = x_new.m == state.x.m
    if hit:
        state.S.append(k)
        state.f_at_gamma.append(f.eval(state.x.exact))
    state.x = x_new
    return hit


def vote_and_decide(states, ensemble, g: Digraph, D: int, eps_stop, counter=None) -> list[int]:
    """Set each node's vote from its last cost improvement and max-combine them.

    A node votes 0 when ``|f(x at previous point) - f(x at latest point)|``
    is at most ``eps_stop``, else 1.  Returns the flag held by each node.
    """
    for s in states:
        s.vote = 0 if abs(s.f_at_gamma[-2] - s.f_at_gamma[-1]) <= eps_stop else 1
    flags = max_consensus([s.vote for s in states], g, D, counter, VOTES)
    for s, fl in zip(states, flags):
        s.flag = fl
    return flags


def run(
    cfg: RunConfig,
    ensemble: CostEnsemble,
    g: Digraph,
    x0s: Sequence,
    rngs=None,
    x_star=None,
    protocol_rows: list | None = None,
) -> RunResult:
    """Run the outer loop from initial values ``x0s`` until it stops.

    ``x0s`` are snapped onto ``cfg.level``.  In static mode the loop stops at
    the first convergence point; in zoom mode the nodes vote and either stop
    or refine the grid.  ``rngs`` defaults to per-node streams from ``cfg.seed``.
    When ``protocol_rows`` is a list, every transmitted value is appended to
    it as ``(k, round, node, category, value, destination)``.
    """
    if len(ensemble) != g.n or len(x0s) != g.n:
        raise ValueError("graph, costs and initial values must agree on n")
    D = g.diameter
    if rngs is None:
        rngs = node_streams(cfg.seed, g.n)
    if x_star is None:
        x_star = optimal_point(ensemble)
    level = cfg.level
    states = initial_states(x0s, level)
    for s, f in zip(states, ensemble):
        s.f_at_gamma.append(f.eval(s.x.exact))
    x_init = [s.x.exact for s in states]
    counter = BitCounter(sign_bit=cfg.sign_bit)
    bounds_key = BOUNDS_DEDUP if cfg.suppress_duplicate_bounds else BOUNDS

    def record(k, rounds, event=""):
        try:
            e = error([s.x.exact for s in states], x_init, x_star)
        except ValueError:
            e = math.nan  # some node started exactly at the optimum
        trace.append(
            TraceRecord(k, e, level.delta, rounds,
                        counter.bits[PIECES], counter.bits[bounds_key], counter.bits[VOTES], event)
        )
        history.append(tuple(s.x for s in states))

    trace: list[TraceRecord] = []
    history: list[tuple[GridValue, ...]] = []
    zooms: list[ZoomEvent] = []
    points: list[ConvergencePoint] = []
    record(0, 0)
    reason = BUDGET
    k = 0
    while k < cfg.max_outer_steps:
        observer = None
        if protocol_rows is not None:
            step_rows: list = []
            observer = trace_recorder(step_rows)
        outputs, rounds = optimization_step(states, ensemble, g, cfg, rngs, counter, observer)
        if protocol_rows is not None:
            protocol_rows.extend((k, *row) for row in step_rows)
        same = [o.m == s.x.m for o, s in zip(outputs, states)]
        event = ""
        if all(same):
            for s, o, f in zip(states, outputs, ensemble):
                detect_convergence_point(s, o, k, f)
            points.append(ConvergencePoint(k, level.j, outputs[0]))
            event = "converge-point"
            if cfg.mode == STATIC:
                reason = CONVERGED
            else:
                flags = vote_and_decide(states, ensemble, g, D, cfg.eps_stop, counter)
                if flags[0] == 0:
                    reason = VOTED_STOP
                elif cfg.max_refinements is not None and level.j >= cfg.max_refinements:
                    reason = FINEST_LEVEL
                else:
                    new_level = refine(level)
                    zooms.append(ZoomEvent(k + 1, level.delta, new_level.delta))
                    level = new_level
                    for s in states:
                        s.x = s.x.rescale(level)
                    event = "zoom"
        else:
            # Estimates agree from k >= 1 on; a partial match can only happen
            # against the distinct initial values and is not a convergence point.
            assert k == 0 or not any(same), f"estimates disagree at step {k + 1}"
            for s, o in zip(states, outputs):
                s.x = o
        k += 1
        if reason != BUDGET:
            record(k, rounds, "terminate")
            break
        record(k, rounds, event)

    return RunResult(
        trace=trace,
        history=history,
        zoom_events=zooms,
        convergence_points=points,
        termination_step=k,
        final_x=[s.x for s in states],
        reason=reason,
        counter=counter,
        x_star=x_star,
        mode=cfg.mode,
        suppress_duplicate_bounds=cfg.suppress_duplicate_bounds,
    )
