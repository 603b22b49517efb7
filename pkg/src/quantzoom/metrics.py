"""Error metric, communication-bit accounting and run summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

__all__ = [
    "PIECES",
    "BOUNDS",
    "BOUNDS_DEDUP",
    "VOTES",
    "BitCounter",
    "TraceRecord",
    "error",
    "bits_for_value",
    "summarize",
    "trace_csv",
    "TRACE_HEADER",
    "bits_per_node_per_step",
    "saving_percent",
]

PIECES = "pieces"
BOUNDS = "bounds"
# Bounds traffic when a node skips values identical to what it sent last round.
BOUNDS_DEDUP = "bounds_dedup"
VOTES = "votes"
CATEGORIES = (PIECES, BOUNDS, BOUNDS_DEDUP, VOTES)

TRACE_HEADER = ["k", "e", "delta", "inner_rounds", "bits_pieces", "bits_bounds", "bits_votes", "event"]


def bits_for_value(v: int, sign_bit: bool = False) -> int:
    """Bits charged for transmitting the integer ``v``.

    ``ceil(log2 |v|)`` for ``|v| >= 2`` and 1 for ``|v|`` in ``{0, 1}``.  With
    ``sign_bit`` one extra bit is added to every value.
    """
    a = abs(int(v))
    bits = (a - 1).bit_length() if a >= 2 else 1
    return bits + 1 if sign_bit else bits


@dataclass
class BitCounter:
    """Cumulative bit and message totals per category."""

    sign_bit: bool = False
    bits: dict = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 0))
    messages: dict = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 0))

    def charge(self, category: str, value: int, copies: int = 1) -> None:
        self.bits[category] += copies * bits_for_value(value, self.sign_bit)
        self.messages[category] += copies

    def merge(self, other: "BitCounter") -> None:
        for c in CATEGORIES:
            self.bits[c] += other.bits[c]
            self.messages[c] += other.messages[c]

    def snapshot(self) -> dict:
        return dict(self.bits)


def error(xs: Sequence, x0s: Sequence, x_star) -> float:
    """Normalized distance ``sqrt(sum((x_j - x*)^2 / (x0_j - x*)^2))``.

    Raises ``ValueError`` if some ``x0_j`` equals ``x*`` (the ratio is undefined).
    """
    if len(xs) != len(x0s):
        raise ValueError("xs and x0s differ in length")
    total = 0.0
    for j, (x, x0) in enumerate(zip(xs, x0s)):
        num, den = x - x_star, x0 - x_star
        if den == 0:
            raise ValueError(f"node {j} starts at the optimum; error metric undefined")
        if _exact(num, den):
            total += float(Fraction(num, den) ** 2)
        else:
            total += (num / den) ** 2
    return math.sqrt(total)


def _exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


@dataclass
class TraceRecord:
    k: int
    e: float
    delta: Fraction
    inner_rounds: int
    bits_pieces: int
    bits_bounds: int
    bits_votes: int
    event: str = ""

    def row(self) -> list[str]:
        return [
            str(self.k),
            repr(self.e),
            repr(float(self.delta)),
            str(self.inner_rounds),
            str(self.bits_pieces),
            str(self.bits_bounds),
            str(self.bits_votes),
            self.event,
        ]


def trace_csv(records: Sequence[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def summarize(result, n: int, steps: int | None = None) -> dict:
    """Totals per category, grand totals and bits per node per outer step.

    ``result`` is a run result exposing ``counter``, ``trace``, ``zoom_events``
    and ``reason``.  Two totals are reported: ``total_bits`` counts every
    category (bounds per ``result.suppress_duplicate_bounds``) and
    ``total_bits_pieces_only`` counts only the averaging pieces.
    """
    if steps is None:
        steps = result.steps
    bits = dict(result.counter.bits)
    bounds_key = BOUNDS_DEDUP if getattr(result, "suppress_duplicate_bounds", False) else BOUNDS
    total = bits[PIECES] + bits[bounds_key] + bits[VOTES]
    per_step = total / (n * steps) if steps else 0.0
    final_error = result.trace[-1].e if result.trace else None
    return {
        "bits_pieces": bits[PIECES],
        "bits_bounds": bits[BOUNDS],
        "bits_bounds_dedup": bits[BOUNDS_DEDUP],
        "bits_votes": bits[VOTES],
        "total_bits": total,
        "total_bits_all_bounds": bits[PIECES] + bits[BOUNDS] + bits[VOTES],
        "total_bits_pieces_only": bits[PIECES],
        "bits_per_node_per_step": per_step,
        "bits_per_node_per_step_pieces_only": bits[PIECES] / (n * steps) if steps else 0.0,
        "steps": steps,
        "zoom_count": len(result.zoom_events),
        "final_error": final_error,
        "termination_reason": result.reason,
    }


def bits_per_node_per_step(total_bits: int, n: int, steps: int) -> float:
    return total_bits / (n * steps) if steps else 0.0


def saving_percent(zoom_bits: float, static_bits: float) -> float:
    """Relative saving of ``zoom_bits`` against ``static_bits`` in percent."""
    if static_bits == 0:
        return 0.0
    return 100.0 * (static_bits - zoom_bits) / static_bits
