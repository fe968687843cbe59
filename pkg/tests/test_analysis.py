import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fqcp.analysis import EffExpSeries, bootstrap_se, crossing_estimate, effective_exponent
from fqcp.errors import NoCrossing, NonpositiveValue, TooFewSamples


def test_power_law_exact():
    series = {t: 2 * t**0.5 for t in range(0, 200)}
    for dt in (1, 7, 60):
        e = effective_exponent(series, dt)
        assert max(abs(v - 0.5) for v in e.values.values()) < 1e-12
        assert 0 not in e.values


def test_constant_is_zero():
    e = effective_exponent({t: 3.3 for t in range(1, 20)}, 2)
    assert all(abs(v) < 1e-15 for v in e.values.values())


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(1, 5))
def test_scale_invariance(c, dt):
    base = {t: 1.0 + 0.3 * t + 0.01 * t * t for t in range(1, 30)}
    a = effective_exponent(base, dt)
    b = effective_exponent({t: c * v for t, v in base.items()}, dt)
    for t in a.times():
        assert a.at(t) == pytest.approx(b.at(t), abs=1e-12)


def test_nonpositive():
    with pytest.raises(NonpositiveValue) as exc:
        effective_exponent({1: 1.0, 2: 0.0, 3: 1.0}, 1)
    assert exc.value.t == 2
    with pytest.raises(ValueError):
        effective_exponent({1: 1.0}, 0)


def _synthetic(theta=0.31, pstar=0.2, ts=(2, 4, 8, 16)):
    curves = {}
    for p in (0.15, 0.18, 0.22, 0.25):
        curves[p] = EffExpSeries(1, {t: theta + (p - pstar) * np.log(t) for t in ts}, p)
    return curves


def test_constructed_crossing():
    cr = crossing_estimate(_synthetic(), [2, 4, 8, 16])
    assert cr.p_c == pytest.approx(0.2, abs=1e-12)
    assert cr.delta_c == pytest.approx(0.31, abs=1e-12)
    assert cr.p_scatter == pytest.approx(0.0, abs=1e-12)
    assert cr.to_json()


def test_time_labels_only_matter_through_values():
    curves = _synthetic()
    relabeled = {p: EffExpSeries(1, {10 * t + 1: v for t, v in s.values.items()}, p)
                 for p, s in curves.items()}
    a = crossing_estimate(curves, [2, 4, 8, 16])
    b = crossing_estimate(relabeled, [21, 41, 81, 161])
    assert a.p_c == b.p_c and a.delta_c == b.delta_c


def test_no_crossing():
    curves = {p: EffExpSeries(1, {1: 0.1 + p, 2: 0.2 + p}, p) for p in (0.1, 0.2)}
    with pytest.raises(NoCrossing):
        crossing_estimate(curves, [1, 2])


def test_bootstrap():
    assert bootstrap_se(np.ones(50)) == 0.0
    x = np.random.default_rng(1).normal(size=10000)
    se = bootstrap_se(x, seed=3)
    assert abs(se - 0.01) < 0.002
    assert bootstrap_se(x, seed=3) == se
    assert bootstrap_se(x, seed=3, weights=np.ones_like(x)) == se
    with pytest.raises(TooFewSamples):
        bootstrap_se([1.0])
