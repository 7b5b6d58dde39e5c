import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrrw.weights import (
    WeightError,
    homogeneous,
    linear_weight,
    make_custom_weight,
    make_power_weight,
    make_site_env,
    make_table_weight,
    shifted_weight,
    weight_at,
    weight_exact,
    weight_from_dict,
    weight_table,
)


def test_power_examples():
    assert weight_at(make_power_weight(0), 7) == 1
    assert weight_at(make_power_weight(1), 3) == 4
    assert weight_at(make_power_weight(2), 3) == 16
    getcontext().prec = 40
    ref = Decimal(5) ** Decimal("0.4")
    assert abs(weight_at(make_power_weight(0.4), 4) - float(ref)) < 1e-15
    assert round(weight_at(make_power_weight(0.4), 4), 6) == 1.903654


def test_linear_and_table_examples():
    assert weight_at(linear_weight(), 0) == 1
    assert weight_at(make_table_weight([2, 5, 5], "constant"), 9) == 5


def test_table_without_tail_is_error_past_end():
    t = make_table_weight([2, 5], None)
    assert weight_at(t, 1) == 5
    with pytest.raises(WeightError):
        weight_at(t, 2)


def test_power_tail_extends_table():
    t = make_table_weight([1], "power", 2)
    for k in range(50):
        assert weight_at(t, k) == (k + 1) ** 2
        assert weight_exact(t, k) == (k + 1) ** 2


@pytest.mark.parametrize("alpha", [-0.1, math.inf, math.nan])
def test_power_rejects_bad_alpha(alpha):
    with pytest.raises(WeightError):
        make_power_weight(alpha)


def test_power_one_equals_linear_exhaustively():
    n = 10**6 + 1
    assert np.array_equal(weight_table(make_power_weight(1), n), weight_table(linear_weight(), n))
    p1 = make_power_weight(1)
    assert all(weight_at(p1, k) == k + 1 for k in range(0, n, 997))


def test_table_matches_scalar_lookups():
    for spec in (make_power_weight(0.3), make_power_weight(Fraction(1, 3)), shifted_weight(linear_weight(), 1),
                 make_custom_weight("log")):
        tab = weight_table(spec, 5000)
        assert all(tab[k] == weight_at(spec, k) for k in range(5000))


def test_exactness_flags():
    assert make_power_weight(2).is_exact
    assert not make_power_weight(0.5).is_exact
    assert make_table_weight([1, Fraction(3, 2)], "constant").is_exact
    assert not make_table_weight([1.5], "constant").is_exact
    assert weight_exact(make_power_weight(0.5), 3) is None
    assert weight_exact(shifted_weight(linear_weight()), 0) == 2


def test_site_env_examples():
    base = make_power_weight(0.3)
    env = make_site_env(base, {})
    assert env.is_homogeneous
    for x in range(-5, 6):
        for k in range(20):
            assert env.weight(x, k) == weight_at(base, k)
    shifted = make_site_env(base, left=shifted_weight(base, 1))
    assert shifted.weight(-3, 4) == weight_at(base, 5)
    assert shifted.weight(0, 4) == weight_at(base, 4)
    bump = make_site_env(linear_weight(), {-1: make_table_weight([100], "constant")})
    assert bump.weight(-1, 0) == 100 * bump.weight(1, 0)


def test_site_env_rejects_non_positive_override():
    make_custom_weight("affine", slope=-1, intercept=3)  # constructing is fine
    with pytest.raises(WeightError):
        make_site_env(linear_weight(), {2: make_custom_weight("affine", slope=-1, intercept=3)})


def test_dict_round_trip():
    for spec in (make_power_weight(0.4), linear_weight(), make_table_weight([2, 5], "constant"),
                 make_table_weight([1, 2], "power", 0.5), make_custom_weight("offset_power", alpha=2.0),
                 shifted_weight(make_power_weight(Fraction(1, 3)), 2)):
        assert weight_from_dict(spec.to_dict()) == spec


specs = st.one_of(
    st.floats(min_value=0, max_value=3).map(make_power_weight),
    st.just(linear_weight()),
    st.lists(st.integers(1, 1000), min_size=1, max_size=6).map(lambda v: make_table_weight(v, "constant")),
    st.tuples(st.lists(st.floats(0.01, 100), min_size=1, max_size=4), st.floats(-2, 2)).map(
        lambda t: make_table_weight(t[0], "power", t[1])),
)


@settings(max_examples=200, deadline=None)
@given(spec=specs, k=st.integers(0, 10**6))
def test_weights_positive_and_finite(spec, k):
    w = weight_at(spec, k)
    assert w > 0 and math.isfinite(w)
    assert weight_at(spec, k) == w


@settings(max_examples=50, deadline=None)
@given(spec=specs, x=st.integers(-50, 50), k=st.integers(0, 1000))
def test_homogeneous_env_uses_default(spec, x, k):
    assert homogeneous(spec).weight(x, k) == weight_at(spec, k)
