"""Riccati comparison: ``f' <= -a f^2 + b`` with ``f(0) < -sqrt(b/a)`` blows up.

``riccati_bound`` is the closed-form upper bound on the blow-up time;
``riccati_integrate`` integrates the equality case numerically and serves as
its independent check (the two coincide for the equality case).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


class RiccatiHypothesisError(ValueError):
    """``a``, ``b`` not positive or ``f0`` not below ``-sqrt(b/a)``."""


def _check(a: float, b: float, f0: float) -> float:
    if not (a > 0 and b > 0):
        raise RiccatiHypothesisError(f"need a > 0 and b > 0, got a={a}, b={b}")
    k = math.sqrt(b / a)
    if not f0 < -k:
        raise RiccatiHypothesisError(f"need f0 < -sqrt(b/a) = {-k}, got f0={f0}")
    return k


def riccati_bound(a: float, b: float, f0: float) -> float:
    k = _check(a, b, f0)
    return math.log((f0 - k) / (f0 + k)) / (2.0 * math.sqrt(a * b))


def riccati_integrate(a: float, b: float, f0: float, slope_cap: float = 1e6) -> float:
    """Numerical blow-up time of ``f' = -a f^2 + b``.

    Integrated in the reciprocal ``y = -1/f``, which obeys ``y' = -a + b y^2``
    and stays smooth through the singularity; ``f < -slope_cap`` is the event
    ``y < 1/slope_cap``.  Past the event the asymptotics ``f ~ -1/(a (t* - t))``
    give the remaining time ``y / a``.
    """
    _check(a, b, f0)
    y0 = -1.0 / f0
    y_cap = 1.0 / slope_cap

    def rhs(t, y):
        return [-a + b * y[0] ** 2]

    def crossed(t, y):
        return y[0] - y_cap

    crossed.terminal = True
    crossed.direction = -1
    # y decreases at rate >= a - b y0^2 > 0, so t* < y0 / (a - b y0^2)
    horizon = 2.0 * y0 / (a - b * y0**2)
    sol = solve_ivp(
        rhs, (0.0, horizon), [y0], method="DOP853", events=crossed, rtol=1e-13, atol=1e-16
    )
    if sol.t_events[0].size == 0:
        raise RuntimeError("slope cap not reached within the integration horizon")
    t_hit = float(sol.t_events[0][0])
    y_hit = float(sol.y_events[0][0][0])
    return t_hit + y_hit / a


def riccati_solution(a: float, b: float, f0: float, t):
    """Exact solution of the equality case, ``-k coth(sqrt(ab) (t* - t))``."""
    k = _check(a, b, f0)
    t_star = riccati_bound(a, b, f0)
    return -k / np.tanh(math.sqrt(a * b) * (t_star - np.asarray(t, dtype=float)))
