import math
from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from ssmcert.certify import dh_closed_form
from ssmcert.errors import InvalidParameterError
from ssmcert.surd import Surd, rational_sqrt

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=50)
radicands = st.fractions(min_value=Fr(1, 10), max_value=50, max_denominator=20)


def test_rational_sqrt():
    assert rational_sqrt(Fr(9, 4)) == Fr(3, 2)
    assert rational_sqrt(2) is None
    assert rational_sqrt(-1) is None


def test_perfect_square_radicand_collapses():
    s = Surd(1, 2, 9)
    assert s.b == 0 and s.a == 7


def test_bad_radicand():
    with pytest.raises(InvalidParameterError):
        Surd(0, 1, 0)
    with pytest.raises(InvalidParameterError):
        Surd.sqrt(2) + Surd.sqrt(3)


@given(rationals, rationals, rationals, rationals, radicands)
def test_field_operations_match_floats(a, b, c, d, r):
    x, y = Surd(a, b, r), Surd(c, d, r)
    for exact, approx in ((x + y, float(x) + float(y)), (x - y, float(x) - float(y)),
                          (x * y, float(x) * float(y))):
        assert math.isclose(float(exact), approx, rel_tol=1e-9, abs_tol=1e-9)
    if y.norm() != 0:
        assert (x / y) * y == x


@given(rationals, rationals, radicands)
def test_sign_and_enclosure(a, b, r):
    x = Surd(a, b, r)
    lo, hi = x.enclosure(30)
    assert lo <= hi and hi - lo <= abs(x.b) * Fr(1, 10**30)
    assert (lo > 0) <= (x.sign() > 0)
    assert (hi < 0) <= (x.sign() < 0)
    f = float(x)
    if abs(f) > 1e-9:
        assert x.sign() == (1 if f > 0 else -1)


@given(st.fractions(min_value=Fr(101, 100), max_value=10, max_denominator=100))
def test_closed_form_is_a_fixed_point(lam):
    cf = dh_closed_form(lam)
    x0, y0 = cf.x0, cf.y0
    assert x0 * (1 + lam * x0 * y0 * y0) == 1
    assert y0 * (1 + lam * x0 * y0) == 1
    # the same identity on rational enclosures of width 1e-30
    (xl, xh), (yl, yh) = x0.enclosure(30), y0.enclosure(30)
    assert 1 / (1 + lam * xh * yh * yh) <= xh and xl <= 1 / (1 + lam * xl * yl * yl)
    expected = "below_1" if lam < 3 else ("equal_1" if lam == 3 else "above_1")
    assert cf.classification == expected
