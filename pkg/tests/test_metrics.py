import math
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, strategies as st

from quantzoom.metrics import (
    BitCounter,
    TRACE_HEADER,
    TraceRecord,
    bits_for_value,
    bits_per_node_per_step,
    error,
    saving_percent,
    summarize,
    trace_csv,
)


def test_error_at_start_is_sqrt_n():
    xs = [1.5 + 0.1 * i for i in range(20)]
    assert error(xs, xs, 0.7) == pytest.approx(4.4721, abs=1e-4)
    assert abs(error(xs, xs, 0.7) - math.sqrt(20)) <= 1e-12


def test_error_examples():
    assert error([1.0, 1.0], [2.0, 3.0], 1.0) == 0
    assert error([1.5], [2], 1) == 0.5
    assert error([Fraction(3, 2)], [Fraction(2)], Fraction(1)) == 0.5


def test_error_undefined_at_optimum():
    with pytest.raises(ValueError):
        error([1.0, 2.0], [1.0, 3.0], 1.0)


@pytest.mark.parametrize("v, bits", [(5, 3), (1024, 10), (1, 1), (0, 1), (2, 1), (3, 2), (-5, 3), (1025, 11)])
def test_bits_for_value(v, bits):
    assert bits_for_value(v) == bits


def test_sign_bit_policy():
    assert bits_for_value(-5, sign_bit=True) == 4


@given(st.integers(0, 10**12))
def test_bits_oracle_and_monotone(v):
    expected = 1 if v <= 1 else math.ceil(math.log2(v))
    # log2 in floating point is exact enough away from the huge-power edge
    if v <= 2**40:
        assert bits_for_value(v) == expected
    assert bits_for_value(v) <= bits_for_value(v + 1)


def test_paper_bit_arithmetic():
    assert bits_per_node_per_step(800754, 20, 21) == pytest.approx(1906.557, abs=1e-3)
    assert 195607 + 215635 + 201044 == 612286
    assert bits_per_node_per_step(612286, 20, 27) == pytest.approx(1133.86, abs=1e-2)
    assert saving_percent(612286, 800754) == pytest.approx(23.54, abs=1e-2)
    assert saving_percent(800754, 800754) == 0


def fake_result(steps, pieces=0, bounds=0, votes=0):
    c = BitCounter()
    c.bits.update(pieces=pieces, bounds=bounds, bounds_dedup=bounds // 2, votes=votes)
    return SimpleNamespace(counter=c, trace=[], zoom_events=[], reason="voted-stop", steps=steps)


def test_summarize():
    s = summarize(fake_result(21, pieces=800754), 20)
    assert s["total_bits_pieces_only"] == 800754
    assert s["bits_per_node_per_step_pieces_only"] == pytest.approx(1906.557, abs=1e-3)
    s = summarize(fake_result(10, 100, 60, 5), 2)
    assert s["total_bits"] == 165 and s["total_bits_all_bounds"] == 165
    assert s["bits_per_node_per_step"] == 8.25


def test_summarize_zero_steps():
    s = summarize(fake_result(0), 5)
    assert s["total_bits"] == 0 and s["bits_per_node_per_step"] == 0


def test_trace_csv_header():
    text = trace_csv([TraceRecord(0, 1.0, Fraction(1, 1000), 0, 0, 0, 0)])
    assert text.splitlines()[0] == ",".join(TRACE_HEADER)
    assert text.splitlines()[1] == "0,1.0,0.001,0,0,0,0,"
