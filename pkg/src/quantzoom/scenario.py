"""Scenario files, seeded trial construction and experiment drivers.

A scenario is a flat text file of ``key = value`` lines; ``#`` starts a
comment.  All randomness of a trial derives from the scenario seed: the
generator for purpose ``tag`` in trial ``t`` is seeded with
``SeedSequence([seed, t, tag])`` where the tags are

    graph = 1, costs = 2, init = 3, protocol = 4
"""

from __future__ import annotations

import json
import math
import statistics
import warnings
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .consensus import ConsensusBudgetError, node_streams, protocol_trace_csv
from .costs import CostEnsemble, QuadraticCost, optimal_point, random_quadratics, step_size_range
from .digraph import Digraph, GraphError, complete, generate_random, read_edge_list, ring
from .metrics import saving_percent, summarize, trace_csv
from .optimizer import BUDGET, STATIC, ZOOM, DivergenceError, RunConfig, RunResult, run
from .quantize import QuantizationLevel, as_fraction, quantize

__all__ = [
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "parse_scenario_text",
    "build_trial",
    "run_trial",
    "run_scenario",
    "compare_modes",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_ENGINE",
    "EXIT_BUDGET",
]

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_BUDGET = 0, 1, 2, 3

TAG_GRAPH, TAG_COSTS, TAG_INIT, TAG_PROTOCOL = 1, 2, 3, 4


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    alpha: Fraction
    delta0: Fraction
    graph: str = "random"
    n: int | None = None
    edge_prob: float = 0.3
    graph_file: str | None = None
    beta: list | None = None
    x0: list | None = None
    x_init: list | None = None
    cost_low: int = 1
    cost_high: int = 5
    init_low: float = 1.0
    init_high: float = 5.0
    c_r: int = 10
    eps_stop: Fraction | float = Fraction(3, 1000)
    mode: str = ZOOM
    max_outer_steps: int = 200
    max_refinements: int | None = None
    finest_refinements: int = 2
    seed: int = 0
    trials: int = 1
    out_dir: str = "out"
    round_budget: int = 200_000
    retry_budget: int = 10_000
    suppress_duplicate_bounds: bool = False
    sign_bit: bool = False
    protocol_trace: bool = False
    defaults_applied: list = field(default_factory=list, compare=False)

    def level(self, j: int = 0) -> QuantizationLevel:
        return QuantizationLevel(self.delta0, self.c_r, j)

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "defaults_applied":
                continue
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, list):
                v = [str(x) if isinstance(x, Fraction) else x for x in v]
            elif isinstance(v, float) and math.isinf(v):
                v = "inf"
            out[f.name] = v
        return out


def _int(v: str) -> int:
    return int(v)


def _positive_fraction(v: str) -> Fraction:
    x = as_fraction(v)
    if x <= 0:
        raise ValueError("must be positive")
    return x


def _prob(v: str) -> float:
    p = float(v)
    if not 0 < p <= 1:
        raise ValueError("must lie in (0, 1]")
    return p


def _at_least(k: int):
    def conv(v: str) -> int:
        x = int(v)
        if x < k:
            raise ValueError(f"must be >= {k}")
        return x
    return conv


def _eps(v: str):
    if v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    x = as_fraction(v)
    if x < 0:
        raise ValueError("must be nonnegative")
    return x


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _choice(*options):
    def conv(v: str) -> str:
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return conv


def _fraction_list(v: str) -> list:
    return [as_fraction(p) for p in v.replace(",", " ").split()]


_PARSERS = {
    "alpha": _positive_fraction,
    "delta0": _positive_fraction,
    "graph": _choice("random", "ring", "complete", "file"),
    "n": _at_least(2),
    "edge_prob": _prob,
    "graph_file": str,
    "beta": _fraction_list,
    "x0": _fraction_list,
    "x_init": _fraction_list,
    "cost_low": _int,
    "cost_high": _int,
    "init_low": float,
    "init_high": float,
    "c_r": _at_least(2),
    "eps_stop": _eps,
    "mode": _choice(ZOOM, STATIC),
    "max_outer_steps": _at_least(1),
    "max_refinements": _at_least(0),
    "finest_refinements": _at_least(0),
    "seed": _at_least(0),
    "trials": _at_least(1),
    "out_dir": str,
    "round_budget": _at_least(1),
    "retry_budget": _at_least(1),
    "suppress_duplicate_bounds": _bool,
    "sign_bit": _bool,
    "protocol_trace": _bool,
}
_REQUIRED = ("alpha", "delta0")


def parse_scenario_text(text: str, source: str = "<scenario>", base_dir: Path | None = None) -> Scenario:
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _PARSERS:
            raise ScenarioError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"{source}:{lineno}: invalid value for {key!r}: {value!r} ({exc})") from None
        lines[key] = lineno

    for key in _REQUIRED:
        if key not in values:
            raise ScenarioError(f"{source}: missing required key {key!r}")
    if values.get("graph") == "file" or ("graph_file" in values and "graph" not in values):
        values["graph"] = "file"
        if "graph_file" not in values:
            raise ScenarioError(f"{source}: graph = file requires 'graph_file'")
        path = Path(values["graph_file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ScenarioError(f"{source}:{lines['graph_file']}: graph file {str(path)!r} does not exist")
        values["graph_file"] = str(path)
    elif "n" not in values:
        raise ScenarioError(f"{source}: missing required key 'n'")

    n = values.get("n")
    for key in ("beta", "x0", "x_init"):
        if key in values and n is not None and len(values[key]) != n:
            raise ScenarioError(f"{source}:{lines[key]}: {key} lists {len(values[key])} values, expected n={n}")
    if "beta" in values and any(b <= 0 for b in values["beta"]):
        raise ScenarioError(f"{source}:{lines['beta']}: every beta must be positive")
    if ("beta" in values) != ("x0" in values):
        raise ScenarioError(f"{source}: 'beta' and 'x0' must be given together")

    s = Scenario(**values)
    s.defaults_applied = sorted(set(_PARSERS) - set(values))
    try:
        s.level(0)
    except (ValueError, OverflowError) as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    return s


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {str(path)!r}: {exc}") from None
    return parse_scenario_text(text, str(path), path.parent)


def _stream(s: Scenario, trial: int, tag: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([s.seed, trial, tag])


@dataclass
class Trial:
    graph: Digraph
    ensemble: CostEnsemble
    x_init: list
    x_star: Any
    protocol_seed: np.random.SeedSequence


def build_trial(s: Scenario, trial: int = 0, levels: tuple[int, ...] = (0,)) -> Trial:
    """Graph, costs and initial values for one trial.

    Random initial values are redrawn (from the same stream) while any of
    them, snapped to one of ``levels``, coincides with the optimum.
    """
    if s.graph == "random":
        g = generate_random(s.n, s.edge_prob, np.random.default_rng(_stream(s, trial, TAG_GRAPH)), s.retry_budget)
    elif s.graph == "ring":
        g = ring(s.n)
    elif s.graph == "complete":
        g = complete(s.n)
    else:
        g = read_edge_list(s.graph_file, s.n)
        if not g.strongly_connected:
            raise GraphError(f"graph in {s.graph_file} is not strongly connected")
    n = g.n
    if s.beta is not None:
        ensemble = CostEnsemble([QuadraticCost(_num(b), _num(c)) for b, c in zip(s.beta, s.x0)])
    else:
        ensemble = random_quadratics(n, np.random.default_rng(_stream(s, trial, TAG_COSTS)), s.cost_low, s.cost_high)
    if len(ensemble) != n:
        raise ScenarioError(f"{len(ensemble)} costs for a graph of {n} nodes")
    x_star = optimal_point(ensemble)
    qlevels = [s.level(j) for j in levels]
    if s.x_init is not None:
        x_init = list(s.x_init)
        if len(x_init) != n:
            raise ScenarioError(f"x_init lists {len(x_init)} values for a graph of {n} nodes")
    else:
        rng = np.random.default_rng(_stream(s, trial, TAG_INIT))
        while True:
            x_init = [float(v) for v in rng.uniform(s.init_low, s.init_high, n)]
            if not any(quantize(x, q) * q.delta == x_star for x in x_init for q in qlevels):
                break
    return Trial(g, ensemble, x_init, x_star, _stream(s, trial, TAG_PROTOCOL))


def _num(v: Fraction):
    return int(v) if v.denominator == 1 else v


def run_config(s: Scenario, mode: str | None = None, level_j: int = 0, max_refinements=None) -> RunConfig:
    return RunConfig(
        alpha=s.alpha,
        level=s.level(level_j),
        eps_stop=s.eps_stop,
        mode=mode or s.mode,
        max_outer_steps=s.max_outer_steps,
        seed=s.seed,
        max_refinements=s.max_refinements if max_refinements is None else max_refinements,
        round_budget=s.round_budget,
        suppress_duplicate_bounds=s.suppress_duplicate_bounds,
        sign_bit=s.sign_bit,
    )


def run_trial(s: Scenario, trial: int = 0, mode: str | None = None, level_j: int = 0, max_refinements=None,
              protocol_rows: list | None = None, built: Trial | None = None) -> tuple[RunResult, Trial]:
    t = built or build_trial(s, trial, (level_j,))
    cfg = run_config(s, mode, level_j, max_refinements)
    _check_step_size(s, t)
    res = run(cfg, t.ensemble, t.graph, t.x_init, node_streams(t.protocol_seed, t.graph.n), t.x_star, protocol_rows)
    return res, t


def _check_step_size(s: Scenario, t: Trial) -> None:
    L, mu = t.ensemble.L, t.ensemble.mu
    lo, hi = step_size_range(t.graph.n, float(L), float(mu))
    if not lo < float(s.alpha) < hi:
        warnings.warn(
            f"alpha={float(s.alpha)} lies outside the certified interval ({lo:.4g}, {hi:.4g}); "
            "running anyway",
            stacklevel=3,
        )


def _summary(s: Scenario, trial: int, res: RunResult, t: Trial) -> dict:
    out = summarize(res, t.graph.n)
    out.update(
        trial=trial,
        seed=s.seed,
        mode=res.mode,
        n=t.graph.n,
        diameter=t.graph.diameter,
        edges=len(t.graph.edges),
        x_star=float(t.x_star),
        x_final=float(res.final_x[0].exact),
        delta_final=str(res.final_x[0].level.delta),
        zoom_events=[{"k": z.k, "old_delta": str(z.old_delta), "new_delta": str(z.new_delta)} for z in res.zoom_events],
        convergence_points=[p.k for p in res.convergence_points],
        config=s.echo(),
        defaults_applied=s.defaults_applied,
    )
    return out


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _trial_ok(res: RunResult) -> bool:
    return res.reason != BUDGET


def run_scenario(s: Scenario, out_dir: str | Path | None = None) -> int:
    """Run every trial, writing ``trace_TTT.csv`` and ``summary_TTT.json`` per trial and ``aggregate.json``."""
    out = Path(out_dir or s.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    for trial in range(s.trials):
        rows: list | None = [] if s.protocol_trace else None
        res, t = run_trial(s, trial, protocol_rows=rows)
        (out / f"trace_{trial:03d}.csv").write_text(trace_csv(res.trace))
        if rows is not None:
            (out / f"protocol_{trial:03d}.csv").write_text(protocol_trace_csv(rows, with_step=True))
        summary = _summary(s, trial, res, t)
        _dump(out / f"summary_{trial:03d}.json", summary)
        summaries.append(summary)
    aggregate = {
        "trials": s.trials,
        "seed": s.seed,
        "mode": s.mode,
        "all_terminated": all(x["termination_reason"] != BUDGET for x in summaries),
        "median_total_bits": statistics.median(x["total_bits"] for x in summaries),
        "median_total_bits_pieces_only": statistics.median(x["total_bits_pieces_only"] for x in summaries),
        "median_steps": statistics.median(x["steps"] for x in summaries),
        "median_final_error": statistics.median(x["final_error"] for x in summaries),
        "median_zoom_count": statistics.median(x["zoom_count"] for x in summaries),
        "reasons": [x["termination_reason"] for x in summaries],
        "config": s.echo(),
    }
    _dump(out / "aggregate.json", aggregate)
    return EXIT_OK if aggregate["all_terminated"] else EXIT_BUDGET


def compare_modes(s: Scenario, out_dir: str | Path | None = None, modes: tuple[str, str] = (ZOOM, STATIC)) -> dict:
    """Zoom mode against a fixed grid at the finest level, on matched trials.

    A zoom run starts on ``delta0`` and refines at most ``finest_refinements``
    times; a static run uses ``delta0 / c_r**finest_refinements`` throughout.
    ``modes`` names the (candidate, baseline) pair, so ``(STATIC, STATIC)``
    gives the degenerate comparison.
    """
    J = s.finest_refinements
    rows = []

    def one(mode, trial, built):
        if mode == ZOOM:
            return run_trial(s, trial, ZOOM, 0, J, built=built)[0]
        return run_trial(s, trial, STATIC, J, built=built)[0]

    for trial in range(s.trials):
        built = build_trial(s, trial, (0, J))
        z = one(modes[0], trial, built)
        b = one(modes[1], trial, built)
        zs, bs = summarize(z, built.graph.n), summarize(b, built.graph.n)
        rows.append({
            "trial": trial,
            "zoom_total_bits": zs["total_bits"],
            "static_total_bits": bs["total_bits"],
            "zoom_pieces_bits": zs["total_bits_pieces_only"],
            "static_pieces_bits": bs["total_bits_pieces_only"],
            "zoom_bits_per_node_per_step": zs["bits_per_node_per_step"],
            "static_bits_per_node_per_step": bs["bits_per_node_per_step"],
            "zoom_steps": zs["steps"],
            "static_steps": bs["steps"],
            "zoom_final_error": zs["final_error"],
            "static_final_error": bs["final_error"],
            "zoom_reason": z.reason,
            "static_reason": b.reason,
            "saving_percent": saving_percent(zs["total_bits"], bs["total_bits"]),
            "saving_percent_pieces_only": saving_percent(zs["total_bits_pieces_only"], bs["total_bits_pieces_only"]),
        })
    med = lambda key: statistics.median(r[key] for r in rows)  # noqa: E731
    report = {
        "trials": rows,
        "finest_delta": str(s.level(J).delta),
        "median_zoom_total_bits": med("zoom_total_bits"),
        "median_static_total_bits": med("static_total_bits"),
        "median_zoom_bits_per_node_per_step": med("zoom_bits_per_node_per_step"),
        "median_static_bits_per_node_per_step": med("static_bits_per_node_per_step"),
        "median_saving_percent": med("saving_percent"),
        "median_saving_percent_pieces_only": med("saving_percent_pieces_only"),
        "zoom_wins": sum(r["zoom_total_bits"] < r["static_total_bits"] for r in rows),
        "all_terminated": all(r["zoom_reason"] != BUDGET and r["static_reason"] != BUDGET for r in rows),
        "config": s.echo(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump(out / "compare.json", report)
    return report


ENGINE_ERRORS = (ConsensusBudgetError, DivergenceError, GraphError, ArithmeticError)
