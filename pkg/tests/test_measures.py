import math

import numpy as np
import pytest
from scipy import integrate

from loclab.measures import (
    Component1D,
    DivergentTiltError,
    LichnerowiczViolation,
    MeasureModel,
    Moments,
    parse_model_spec,
    poincare_gaussian_check,
    tilted_moments,
    tilted_moments_batch,
    verify_isotropic,
)
from loclab.numerics import SymMatrix

S3 = math.sqrt(3.0)
R2 = math.sqrt(2.0)


def _quad_oracle(logdens, lo, hi, theta, t, split=None):
    """scipy moments of exp(logdens(x) + theta x - t x^2/2)."""
    def w(x):
        return math.exp(logdens(x) + theta * x - 0.5 * t * x * x)
    pieces = [(lo, hi)] if split is None else [(lo, split), (split, hi)]
    kw = dict(epsabs=0, epsrel=1e-13, limit=500)
    m = [math.fsum(integrate.quad(lambda x, k=k: x ** k * w(x), a, b, **kw)[0] for a, b in pieces)
         for k in (0, 1, 2)]
    mean = m[1] / m[0]
    return math.log(m[0]), mean, m[2] / m[0] - mean * mean


def test_gaussian_untilted_is_isotropic():
    m = tilted_moments(MeasureModel.gaussian(2), np.zeros(2), 0.0)
    assert np.array_equal(m.a, [0.0, 0.0])
    assert np.array_equal(m.A.entries, np.eye(2))


def test_gaussian_conjugacy():
    m = tilted_moments(MeasureModel.gaussian(2), np.array([1.0, 0.0]), 1.0)
    assert np.array_equal(m.a, [0.5, 0.0])
    assert np.array_equal(m.A.entries, np.eye(2) / 2)


def test_uniform_product_isotropic():
    m = tilted_moments(parse_model_spec("product(uniform*3)"), np.zeros(3), 0.0)
    assert np.abs(m.a).max() <= 1e-12
    assert np.abs(m.A.entries - np.eye(3)).max() <= 1e-12


def test_verify_isotropic_cases():
    assert verify_isotropic(MeasureModel.gaussian(5)).passed
    raw = MeasureModel.product([(Component1D.uniform(0.0, 1.0, standardize=False), 1)])
    rep = verify_isotropic(raw)
    assert not rep.passed and rep.failing == (0,)
    assert rep.max_mean_error == pytest.approx(0.5, abs=1e-12)
    assert verify_isotropic(parse_model_spec("product(dexp*4)"), 1e-8).passed
    with pytest.raises(ValueError):
        verify_isotropic(MeasureModel.gaussian(1), 1e-11)


def test_standardization_records_affine_map():
    c = Component1D.uniform(0.0, 1.0)
    assert c.shift == pytest.approx(0.5, abs=1e-13)
    assert c.scale == pytest.approx(1 / math.sqrt(12), rel=1e-12)
    d = Component1D.two_sided_exponential(3.0)
    assert d.scale == pytest.approx(math.sqrt(2) / 3, rel=1e-12)


@pytest.mark.parametrize("theta,t", [(0.0, 0.0), (0.7, 0.0), (-1.3, 0.2), (5.0, 1.0), (40.0, 3.0), (-200.0, 4.0)])
def test_uniform_tilt_vs_scipy(theta, t):
    lz, mean, var = _quad_oracle(lambda x: -math.log(2 * S3), -S3, S3, theta, t)
    a, v, l = tilted_moments_batch(parse_model_spec("product(uniform*1)"), np.array([theta]), t)
    assert a[0] == pytest.approx(mean, abs=1e-11 * max(1, abs(mean)))
    assert v[0] == pytest.approx(var, rel=1e-9)
    assert l == pytest.approx(lz, rel=1e-11, abs=1e-11)


@pytest.mark.parametrize("theta,t", [(0.0, 0.0), (1.0, 0.0), (-1.2, 0.0), (3.0, 0.1), (-8.0, 0.5), (20.0, 2.0)])
def test_dexp_tilt_vs_scipy(theta, t):
    lz, mean, var = _quad_oracle(lambda x: math.log(R2 / 2) - R2 * abs(x), -math.inf, math.inf, theta, t, split=0.0)
    a, v, l = tilted_moments_batch(parse_model_spec("product(dexp*1)"), np.array([theta]), t)
    assert a[0] == pytest.approx(mean, abs=1e-10 * max(1, abs(mean)))
    assert v[0] == pytest.approx(var, rel=1e-9)
    assert l == pytest.approx(lz, rel=1e-10, abs=1e-10)


def test_dexp_hand_formula():
    # rate sqrt 2, tilt theta < sqrt 2: mean = 2 theta / (2 - theta^2)
    m = tilted_moments(parse_model_spec("product(dexp*1)"), np.array([1.0]), 0.0)
    assert m.a[0] == pytest.approx(2.0, rel=1e-12)


def test_divergent_tilt():
    with pytest.raises(DivergentTiltError, match="divergent tilt"):
        tilted_moments(parse_model_spec("product(dexp*1)"), np.array([2.0]), 0.0)


def test_product_covariance_exactly_diagonal():
    m = tilted_moments(parse_model_spec("product(uniform*2,dexp*2)"), np.array([0.3, -1.0, 0.5, 2.0]), 0.4)
    off = m.A.entries - np.diag(np.diag(m.A.entries))
    assert np.count_nonzero(off) == 0


def test_lichnerowicz_guard():
    with pytest.raises(LichnerowiczViolation):
        Moments(np.zeros(1), SymMatrix(np.array([[2.0]])), 0.0, 1.0)
    Moments(np.zeros(1), SymMatrix(np.array([[1.0 + 5e-9]])), 0.0, 1.0)


def test_poincare_gaussian():
    g = MeasureModel.gaussian(3)
    assert poincare_gaussian_check(1.0, tilted_moments(g, np.zeros(3), 1.0))
    assert poincare_gaussian_check(0.1, tilted_moments(g, np.zeros(3), 0.1))
    assert poincare_gaussian_check(1e-12, tilted_moments(g, np.zeros(3), 0.0))


def test_log_partition_gradient_is_barycenter():
    model = parse_model_spec("product(uniform*1,dexp*1)")
    theta = np.array([0.8, -0.6])
    t, eps = 0.3, 1e-5
    m = tilted_moments(model, theta, t)
    for i in range(2):
        e = np.zeros(2)
        e[i] = eps
        g = (tilted_moments(model, theta + e, t).log_Z - tilted_moments(model, theta - e, t).log_Z) / (2 * eps)
        assert g == pytest.approx(m.a[i], abs=1e-5)


def test_grid_component(tmp_path):
    xs = np.linspace(-2.0, 2.0, 41)
    f = tmp_path / "tri.txt"
    np.savetxt(f, np.column_stack([xs, -np.abs(xs)]))
    model = parse_model_spec(f"product(grid:{f.name}*2)", base_dir=tmp_path)
    assert model.dim == 2
    assert verify_isotropic(model).passed
    with pytest.raises(ValueError, match="not concave"):
        Component1D.grid_logdensity(xs, xs ** 2)


@pytest.mark.parametrize("bad", ["gaussian(0)", "product()", "product(foo*2)", "product(uniform*0)", "gauss(3)"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_model_spec(bad)


def test_parse_round_trip():
    m = parse_model_spec("product( uniform*4 , dexp*4 )")
    assert m.spec == "product(uniform*4,dexp*4)"
    assert m.dim == 8
    assert parse_model_spec(m.spec).spec == m.spec
