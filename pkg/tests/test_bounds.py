import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from steiner_forge.bounds import (
    NOMINAL, completions_log_bound, integral_identity, latin_transversal_log_bound, pm_gap, pm_log_bound,
)

mpmath.mp.dps = 40


def mp_integral(C):
    return mpmath.quad(lambda t: t**2 * mpmath.log(1 + C * t**6), [0, 0.5, 1])


@pytest.mark.parametrize("C", [0, 0.5, 1, 10, 100, 1e3, 1e6])
def test_identity_and_high_precision_oracle(C):
    r = integral_identity(C)
    assert r["diff"] <= 1e-9
    assert r["lhs"] == pytest.approx(float(mp_integral(C)), abs=1e-12)
    assert r["rhs"] == pytest.approx(float(mp_integral(C)), abs=1e-12)


def test_integral_examples():
    assert integral_identity(0)["lhs"] == 0 and integral_identity(0)["rhs"] == 0
    v = integral_identity(1)["rhs"]
    assert v == pytest.approx(0.0879810, abs=1e-6)
    assert v == pytest.approx((math.log(2) - 2 + math.pi / 2) / 3, abs=1e-15)


@given(st.floats(0, 1e-3))
def test_small_c_series_branch(C):
    r = integral_identity(C)
    assert r["diff"] <= 1e-12


def test_negative_c_rejected():
    with pytest.raises(ValueError):
        integral_identity(-1)


def test_pm_bound_examples():
    assert pm_log_bound(2 * math.e**2) == pytest.approx(0, abs=1e-12)
    assert pm_log_bound(9) == pytest.approx(float(3 * (mpmath.log(4.5) - 2)), abs=1e-12)
    assert pm_log_bound(9) == pytest.approx(-1.48777, abs=1e-5)
    # direct evaluation gives 2.459627, not the 2.45864 quoted alongside the formula
    assert pm_log_bound(21) == pytest.approx(float(7 * (mpmath.log(10.5) - 2)), abs=1e-12)
    assert pm_log_bound(21) == pytest.approx(2.459627, abs=1e-6)


@given(st.floats(2 * math.e, 1e5), st.floats(1e-3, 10))
def test_pm_bound_increasing_past_2e(n, dn):
    assert pm_log_bound(n + dn) > pm_log_bound(n)


def test_pm_bound_dips_below_2e():
    # d/dn = (log(n/2) - 1)/3 is negative on (2, 2e)
    assert pm_log_bound(3) > pm_log_bound(5) and pm_log_bound(5) < pm_log_bound(6)


def test_completions_bound_examples():
    b = completions_log_bound(7, 0.0)
    assert b["upper"] == b["lower"] == pytest.approx(7 * (math.log(7) - 2))
    assert b["upper"] == pytest.approx(-0.378629, abs=1e-6)
    assert b["flag"] == NOMINAL
    assert completions_log_bound(9, 0.0)["upper"] == pytest.approx(2.3667, abs=1e-4)
    assert completions_log_bound(9, 1.0)["upper"] == 0.0
    assert abs(completions_log_bound(99, 1 - 1e-9)["upper"]) < 1e-3
    o = completions_log_bound(9, 0.5, ordered=True)
    assert o["upper"] == pytest.approx(completions_log_bound(9, 0.5)["upper"] + math.lgamma(7))


def test_latin_bound_examples():
    assert latin_transversal_log_bound(math.e**2) == pytest.approx(0, abs=1e-12)
    assert latin_transversal_log_bound(5) == pytest.approx(-1.95281, abs=1e-5)
    assert latin_transversal_log_bound(7) == pytest.approx(float(7 * (mpmath.log(7) - 2)), abs=1e-12)


def test_pm_gap():
    n = 15
    assert pm_gap([math.e**5] * 3, n) == pytest.approx(5 / 5 - (math.log(7.5) - 2))
    assert pm_gap([0, 0, 0], n) == -math.inf
