"""Distributed gradient descent over quantized directed networks with event-triggered grid zooming."""

from .consensus import max_consensus, min_consensus, run_fitquac
from .costs import CostEnsemble, QuadraticCost, contraction_constants, optimal_point, step_size_range
from .digraph import Digraph, complete, generate_random, ring
from .metrics import bits_for_value, error, summarize
from .optimizer import RunConfig, RunResult, run
from .quantize import GridValue, QuantizationLevel, quantize, refine, to_real

__version__ = "0.1.0"

__all__ = [
    "Digraph",
    "complete",
    "generate_random",
    "ring",
    "QuantizationLevel",
    "GridValue",
    "quantize",
    "refine",
    "to_real",
    "QuadraticCost",
    "CostEnsemble",
    "optimal_point",
    "step_size_range",
    "contraction_constants",
    "run_fitquac",
    "max_consensus",
    "min_consensus",
    "RunConfig",
    "RunResult",
    "run",
    "error",
    "bits_for_value",
    "summarize",
]
