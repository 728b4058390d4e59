import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fermisect import boxes as fb
from fermisect import harness as fh
from fermisect.harness import ScanRow

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
widths = st.floats(min_value=0, max_value=10, allow_nan=False)


@st.composite
def box(draw):
    n0 = draw(finite)
    t0 = draw(finite)
    return np.array([n0, n0 + draw(widths), t0, t0 + draw(widths)])


@given(box(), box())
def test_box_sum_commutes(a, b):
    assert np.allclose(fb.add_boxes(a, b), fb.add_boxes(b, a))


@given(box())
def test_box_double_negation(a):
    assert np.allclose(fb.neg_box(fb.neg_box(a)), a)


@given(box())
def test_box_difference_contains_zero(a):
    # X - X always reaches zero
    assert fb.contains_zero(fb.add_boxes(a, fb.neg_box(a)))


@given(box(), box())
def test_box_sum_monotone(a, b):
    grown = a + np.array([-0.5, 0.5, -0.5, 0.5])
    s1 = fb.add_boxes(a, b)
    s2 = fb.add_boxes(grown, b)
    assert s2[0] <= s1[0] and s2[1] >= s1[1]
    assert s2[2] <= s1[2] and s2[3] >= s1[3]
    if fb.contains_zero(s1):
        assert fb.contains_zero(s2)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-2, max_value=2),
       st.floats(min_value=0.1, max_value=20))
def test_fit_exponent_recovers_power_law(slope, scale):
    rows = [ScanRow(j, 1.0 / 2 ** j, 0.0, scale * (2.0 ** j) ** slope, 1.0, 1.0)
            for j in range(3, 9)]
    got, err = fh.fit_exponent(rows)
    assert abs(got - slope) < 1e-9
    assert err < 1e-7


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.data())
def test_polynomial_sublevel_bound_property(n, data):
    coeffs = [data.draw(st.floats(min_value=-1, max_value=1))
              for _ in range(n + 1)]
    if abs(coeffs[0]) < 1e-2:
        coeffs[0] = 1e-2
    lo = data.draw(st.floats(min_value=-3, max_value=2))
    hi = lo + data.draw(st.floats(min_value=0.1, max_value=2))
    y0 = data.draw(st.floats(min_value=-2, max_value=2))
    eps = data.draw(st.floats(min_value=1e-6, max_value=0.1))
    b = math.factorial(n) * abs(coeffs[0])
    measure = fh.polynomial_sublevel_measure(coeffs, lo, hi, y0 - eps, y0 + eps)
    assert measure <= min(hi - lo, 2.0 ** (n + 1) * (eps / b) ** (1.0 / n)) \
        + 1e-9
