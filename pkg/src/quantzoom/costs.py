"""Local cost functions and the convergence constants derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

import numpy as np

__all__ = [
    "Cost",
    "QuadraticCost",
    "CostEnsemble",
    "ConvergenceConstants",
    "global_constants",
    "optimal_point",
    "step_size_range",
    "delta_range",
    "contraction_constants",
    "random_quadratics",
]


class Cost(Protocol):
    mu: float
    L: float

    def eval(self, x): ...

    def grad(self, x): ...


@dataclass(frozen=True)
class QuadraticCost:
    """``f(x) = beta/2 * (x - x0)**2``.

    Arithmetic follows the argument type, so rational ``beta``, ``x0`` and
    ``x`` give exact results.
    """

    beta: int | Fraction | float
    x0: int | Fraction | float

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def mu(self):
        return self.beta

    @property
    def L(self):
        return self.beta

    def eval(self, x):
        d = x - self.x0
        return self.beta * d * d / 2

    def grad(self, x):
        return self.beta * (x - self.x0)


@dataclass
class CostEnsemble:
    costs: list
    L: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self) -> None:
        self.L, self.mu = global_constants(self)

    def __len__(self) -> int:
        return len(self.costs)

    def __iter__(self):
        return iter(self.costs)

    def __getitem__(self, i):
        return self.costs[i]

    def total_grad(self, x):
        return sum(f.grad(x) for f in self.costs)


def global_constants(ensemble) -> tuple:
    """``(max L_i, min mu_i)`` over the ensemble."""
    costs = list(ensemble)
    if not costs:
        raise ValueError("empty cost ensemble")
    for i, f in enumerate(costs):
        if not f.mu > 0:
            raise ValueError(f"cost {i} is not strongly convex (mu={f.mu})")
    return max(f.L for f in costs), min(f.mu for f in costs)


def optimal_point(ensemble, tol: float = 1e-12, max_iter: int = 10_000):
    """Minimizer of the summed cost.

    Quadratics use the closed form ``sum(beta*x0) / sum(beta)`` (exact for
    rational parameters).  Anything else is bisected on the summed gradient.
    """
    costs = list(ensemble)
    if costs and all(isinstance(f, QuadraticCost) for f in costs):
        return sum(f.beta * f.x0 for f in costs) / sum(f.beta for f in costs)
    return _bisect_root(lambda x: sum(float(f.grad(x)) for f in costs), tol, max_iter)


def _bisect_root(g, tol: float, max_iter: int) -> float:
    lo, hi = -1.0, 1.0
    # g is increasing for a strongly convex sum; widen until it changes sign.
    for _ in range(2000):
        if g(lo) <= 0 <= g(hi):
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise ArithmeticError("could not bracket the minimizer")
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        if hi - lo <= tol or mid in (lo, hi):
            return mid
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    raise ArithmeticError(f"bisection did not reach tol={tol} in {max_iter} iterations")


def step_size_range(n: int, L: float, mu: float) -> tuple[float, float]:
    """Admissible open step-size interval; empty when ``lower >= upper``."""
    if not 0 < mu <= L:
        raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    return n * (mu + L) / (4 * mu * L), 2 * n / (mu + L)


def delta_range(n: int, alpha: float, L: float, mu: float) -> tuple[float, float]:
    """Open interval of the auxiliary parameter ``delta`` for a given step size."""
    num = n * (4 * alpha * mu * L - n * (mu + L))
    den = 2 * alpha * (n * (mu + L) - 2 * alpha * mu * L)
    return 0.0, num / den


@dataclass(frozen=True)
class ConvergenceConstants:
    alpha: float
    delta: float
    theta: float
    floor_term: float
    certified: bool
    # The floor expression uses an undefined step-size symbol; it is evaluated
    # with that symbol equal to alpha.
    floor_interpretation: str = "alpha_hat = alpha"


def contraction_constants(n: int, alpha: float, delta: float, L: float, mu: float, Delta) -> ConvergenceConstants:
    """Contraction factor and additive floor of the squared-error recursion.

    ``theta = 2 (1 + alpha*delta/n) (1 - 2 alpha mu L / (n (mu + L)))`` and
    ``floor = (8 + 32 n^2 alpha^2 L^2 + 32 n^2 alpha L^2 / delta) Delta^2``.
    ``certified`` is False when ``alpha`` or ``delta`` falls outside its
    admissible interval; the constants are still returned.
    """
    Delta = float(Delta)
    theta = 2 * (1 + alpha * delta / n) * (1 - 2 * alpha * mu * L / (n * (mu + L)))
    floor_term = (8 + 32 * n**2 * alpha**2 * L**2 + 32 * n**2 * alpha * L**2 / delta) * Delta**2
    a_lo, a_hi = step_size_range(n, L, mu)
    certified = a_lo < alpha < a_hi
    if certified:
        d_lo, d_hi = delta_range(n, alpha, L, mu)
        certified = d_lo < delta < d_hi
    if certified and not 0 < theta < 1:
        raise ArithmeticError(f"theta={theta} outside (0, 1) for admissible parameters")
    return ConvergenceConstants(alpha, delta, theta, floor_term, certified)


def random_quadratics(n: int, rng: np.random.Generator, low: int = 1, high: int = 5) -> CostEnsemble:
    """Integer ``beta_i`` and ``x0_i`` drawn uniformly from ``low..high``."""
    betas = rng.integers(low, high + 1, size=n)
    x0s = rng.integers(low, high + 1, size=n)
    return CostEnsemble([QuadraticCost(int(b), int(c)) for b, c in zip(betas, x0s)])


def is_finite(value) -> bool:
    if isinstance(value, (int, Fraction)):
        return True
    return math.isfinite(value)
