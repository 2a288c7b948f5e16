"""Hypothesis property tests for invariants that hold for every input."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from loclab.harness import sharpness_lower_bound
from loclab.ladder import LadderDepthError, build_ladder
from loclab.measures import MeasureModel, parse_model_spec, tilted_moments
from loclab.numerics import ExtReal, SymMatrix, jacobi_spectrum
from loclab.potentials import build_potential, eval_F, gronwall_log_factor

finite = st.floats(-1e6, 1e6, allow_nan=False).filter(lambda x: x == 0 or abs(x) > 1e-300)
times = st.floats(0.01, 5.0)

_POT = build_potential(5.0, 2.5, 2000)
_UNIF = parse_model_spec("product(uniform*2)")
_DEXP = parse_model_spec("product(dexp*1)")


@given(finite, finite)
def test_extreal_order_matches_float(a, b):
    x, y = ExtReal.from_float(a), ExtReal.from_float(b)
    assert (x < y) == (a < b)
    assert (x == y) == (a == b)


@given(finite, finite)
def test_extreal_arithmetic_matches_float(a, b):
    s = float(ExtReal.from_float(a) + ExtReal.from_float(b))
    assert s == pytest.approx(a + b, rel=1e-12, abs=1e-12 * (abs(a) + abs(b)))
    assert float(ExtReal.from_float(a) * ExtReal.from_float(b)) == pytest.approx(a * b, rel=1e-12)


@given(st.floats(-1e12, 1e12), st.floats(-1e12, 1e12))
def test_extreal_log_product_is_exact(la, lb):
    prod = ExtReal.from_log(la) * ExtReal.from_log(lb)
    assert prod.log_value() == ExtReal.from_log(la).log_value() + ExtReal.from_log(lb).log_value()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_jacobi_trace_and_spectrum(n, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(n, n))
    a = a + a.T
    ev = jacobi_spectrum(SymMatrix(a), with_basis=False).eigenvalues
    assert math.fsum(ev) == pytest.approx(np.trace(a), abs=1e-10 * (1 + np.abs(a).sum()))
    np.testing.assert_allclose(np.sort(ev), np.linalg.eigvalsh(a), atol=1e-10 * (1 + np.abs(a).max()))


@given(st.lists(st.floats(0.0, 20.0), max_size=20), st.lists(st.floats(0.0, 20.0), max_size=20))
def test_eval_F_is_additive(a, b):
    total = eval_F(_POT, np.array(a + b))
    assert total == pytest.approx(eval_F(_POT, np.array(a)) + eval_F(_POT, np.array(b)), rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_potential_is_monotone(x, y):
    assume(x < y)
    vx, vy = _POT(np.array([x, y]))
    assert vx <= vy


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), times)
def test_tilt_symmetry(u, v, t):
    # symmetric model: mean is odd in theta, covariance even
    m1 = tilted_moments(_UNIF, np.array([u, v]), t)
    m2 = tilted_moments(_UNIF, np.array([-u, -v]), t)
    np.testing.assert_allclose(m1.a, -m2.a, atol=1e-12)
    np.testing.assert_allclose(m1.A.entries, m2.A.entries, rtol=1e-10, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5.0, 5.0), times)
def test_tilted_variance_below_one_over_t(u, t):
    m = tilted_moments(_DEXP, np.array([u]), t)
    assert 0 < m.A.entries[0, 0] <= 1.0 / t + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.floats(-4.0, 4.0), times)
def test_gaussian_tilt_closed_form(n, u, t):
    m = tilted_moments(MeasureModel.gaussian(n), np.full(n, u), t)
    np.testing.assert_allclose(m.a, u / (1 + t), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(np.diag(m.A.entries), 1 / (1 + t), rtol=1e-12)


@given(st.floats(0.001, 1.0), st.floats(0.001, 1.0), st.floats(0.001, 1.0), st.floats(4.5, 1e4))
def test_gronwall_log_factor_composes(a, b, c, d0):
    t1, t2, t3 = sorted((a, b, c))
    whole = gronwall_log_factor(d0, t1, t3)
    parts = gronwall_log_factor(d0, t1, t2) + gronwall_log_factor(d0, t2, t3)
    assert float(abs(whole - parts)) <= 1e-14 * (1 + float(abs(whole)))
    assert whole >= 0


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.floats(15.0, 500.0), st.floats(2.0, 700.0))
def test_every_ladder_is_exact_and_capped(log_p, log_log_n):
    try:
        lad = build_ladder(log_p=log_p, log_log_n=log_log_n)
    except (LadderDepthError, ValueError):
        return
    if lad.branch != "multi_stage":
        return
    assert all(r == 0 for r in lad.forward_check())
    assert all(b > a for a, b in zip(lad.s, lad.s[1:]))
    assert lad.s[-1] <= 15 / 6
    assert all(a < b for a, b in zip(lad.t, lad.t[1:]))


@given(st.floats(0.1, 50.0), st.floats(0.1, 10.0), st.floats(1.0, 1e12), st.floats(1.0, 1e6))
def test_sharpness_log_linear_in_n(r, c, n, k):
    a = sharpness_lower_bound(r, c, n)
    b = sharpness_lower_bound(r, c, n * k)
    assert float(b.log_value() - a.log_value()) == pytest.approx(math.log(n * k) - math.log(n), abs=1e-9)
