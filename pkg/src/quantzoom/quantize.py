"""Asymmetric (floor) quantization on an exact rational grid.

A quantization level is kept as the triple ``(delta0, c_r, j)`` so that the
effective spacing ``delta0 / c_r**j`` is always an exact :class:`Fraction`.
Values that live on the grid are :class:`GridValue` objects: an integer index
plus the level it refers to.  Comparing two grid values at the same level is
an integer comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

__all__ = [
    "QuantizationLevel",
    "GridValue",
    "quantize",
    "refine",
    "to_real",
    "as_fraction",
]

Number = Union[int, float, Fraction]

# Largest denominator the level may carry; mirrors a signed 64-bit word.
MAX_DENOMINATOR = 2**63 - 1

# A float within this many ulps of a grid point is taken to denote that point.
_SNAP_ULPS = 4


def as_fraction(value: Number | str) -> Fraction:
    """Convert ``value`` to an exact :class:`Fraction`.

    Strings are parsed in decimal (``"0.001"`` becomes ``1/1000``), which is
    how configuration values should reach this module.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Fraction")


@dataclass(frozen=True)
class QuantizationLevel:
    """Grid spacing ``delta0 / c_r**j``."""

    delta0: Fraction
    c_r: int = 10
    j: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta0", as_fraction(self.delta0))
        if self.delta0 <= 0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if int(self.c_r) != self.c_r or self.c_r < 2:
            raise ValueError(f"c_r must be an integer >= 2, got {self.c_r}")
        if int(self.j) != self.j or self.j < 0:
            raise ValueError(f"j must be a nonnegative integer, got {self.j}")
        if self.delta0.numerator > MAX_DENOMINATOR:
            raise OverflowError(f"delta0 numerator {self.delta0.numerator} exceeds a machine word")
        if self.delta.denominator > MAX_DENOMINATOR:
            raise OverflowError(
                f"quantization level {self.delta0}/{self.c_r}^{self.j} "
                "no longer fits a machine-word denominator"
            )

    @property
    def delta(self) -> Fraction:
        return self.delta0 / Fraction(self.c_r) ** self.j

    def __float__(self) -> float:
        return float(self.delta)

    def __str__(self) -> str:
        return str(self.delta)


def refine(level: QuantizationLevel) -> QuantizationLevel:
    """Divide the level by ``c_r``; raises ``OverflowError`` past a machine word."""
    return QuantizationLevel(level.delta0, level.c_r, level.j + 1)


def quantize(xi: Number, level: QuantizationLevel) -> int:
    """Return ``floor(xi / delta)``.

    Rational inputs are handled exactly.  A float input that lies within a
    few ulps of a grid point is treated as that grid point, so that
    ``quantize(to_real(GridValue(m, level)), level) == m`` for every ``m``.

    Raises
    ------
    ValueError
        If ``xi`` is NaN or infinite.
    """
    delta = level.delta
    if isinstance(xi, float):
        if not math.isfinite(xi):
            raise ValueError(f"cannot quantize non-finite value {xi!r}")
        ratio = Fraction(xi) / delta
        nearest = round(ratio)
        if nearest > ratio and (nearest * delta - Fraction(xi)) <= _SNAP_ULPS * Fraction(math.ulp(xi)):
            return int(nearest)
        return math.floor(ratio)
    return math.floor(as_fraction(xi) / delta)


@dataclass(frozen=True)
class GridValue:
    """The real number ``m * level.delta``."""

    m: int
    level: QuantizationLevel

    @property
    def exact(self) -> Fraction:
        return self.m * self.level.delta

    def __float__(self) -> float:
        return to_real(self)

    def rescale(self, level: QuantizationLevel) -> "GridValue":
        """Re-index onto ``level``, which must be this level refined some number of times."""
        if level.delta0 != self.level.delta0 or level.c_r != self.level.c_r or level.j < self.level.j:
            raise ValueError(f"cannot re-index from {self.level} onto {level}")
        return GridValue(self.m * self.level.c_r ** (level.j - self.level.j), level)


def to_real(v: GridValue) -> float:
    """Nearest float to ``m * delta``."""
    return float(v.exact)
