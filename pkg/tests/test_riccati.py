import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gengxue.riccati import (
    RiccatiHypothesisError,
    riccati_bound,
    riccati_integrate,
    riccati_solution,
)


@pytest.mark.parametrize(
    "a, b, f0, expected",
    [
        (1.0, 1.0, -2.0, 0.5 * math.log(3.0)),
        (4.0, 1.0, -1.0, 0.25 * math.log(3.0)),  # k = 1/2, sqrt(ab) = 2
        (2.0, 8.0, -4.0, math.log(3.0) / 8.0),  # k = 2, sqrt(ab) = 4
    ],
)
def test_closed_form_examples(a, b, f0, expected):
    assert riccati_bound(a, b, f0) == pytest.approx(expected, rel=1e-14)
    assert riccati_integrate(a, b, f0) == pytest.approx(expected, abs=1e-6)


def test_small_b_limit():
    # b -> 0 recovers f' = -a f^2, blow-up at -1/(a f0)
    assert riccati_bound(1.0, 1e-12, -2.0) == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize(
    "a, b, f0", [(0.0, 1.0, -2.0), (1.0, -1.0, -2.0), (1.0, 1.0, -1.0), (1.0, 1.0, 0.5)]
)
def test_hypotheses(a, b, f0):
    with pytest.raises(RiccatiHypothesisError):
        riccati_bound(a, b, f0)
    with pytest.raises(RiccatiHypothesisError):
        riccati_integrate(a, b, f0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(1.05, 50.0))
def test_numeric_matches_bound(a, b, ratio):
    f0 = -math.sqrt(b / a) * ratio
    assert riccati_integrate(a, b, f0) <= riccati_bound(a, b, f0) + 1e-6
    assert riccati_integrate(a, b, f0) == pytest.approx(riccati_bound(a, b, f0), abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(1.1, 10.0), st.floats(0.1, 10.0))
def test_bound_scaling(a, b, ratio, lam):
    # f -> lam f, t -> t / lam maps (a, b) to (a, lam^2 b)
    f0 = -math.sqrt(b / a) * ratio
    assert riccati_bound(a, lam**2 * b, lam * f0) == pytest.approx(riccati_bound(a, b, f0) / lam, rel=1e-10)


def test_solution_satisfies_ode():
    a, b, f0 = 1.5, 2.0, -3.0
    T = riccati_bound(a, b, f0)
    t = np.linspace(0, 0.9 * T, 400)
    f = riccati_solution(a, b, f0, t)
    assert f[0] == pytest.approx(f0, rel=1e-12)
    h = 1e-6
    df = (riccati_solution(a, b, f0, t + h) - riccati_solution(a, b, f0, t - h)) / (2 * h)
    assert np.max(np.abs(df - (-a * f**2 + b)) / (1 + f**2)) < 1e-6
    assert riccati_solution(a, b, f0, 0.999999 * T) < -1e5
