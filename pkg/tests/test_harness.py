import math

import numpy as np
import pytest

from loclab import harness
from loclab.harness import (
    HarnessConfig,
    McEstimate,
    dumps,
    estimate_EF,
    estimate_tail,
    estimate_trace_moment,
    fit_tail_constant,
    kls_gronwall_log_factor,
    reference_bounds,
    sharpness_lower_bound,
    verify_suite,
)
from loclab.numerics import ExtReal
from loclab.potentials import build_potential

LOG_HALF = math.log1p(-math.exp(-0.5))


# -- McEstimate -----------------------------------------------------------------

def test_mc_estimate_from_samples():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    est = McEstimate.from_samples(x, seed=7)
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(np.std(x, ddof=1) / 2.0, rel=1e-15)
    assert est.upper == pytest.approx(2.5 + 3 * est.stderr)
    assert (est.n_paths, est.seed) == (4, 7)


def test_mc_estimate_constant_samples_have_zero_stderr():
    est = McEstimate.from_samples(np.full(10, 0.3), seed=0)
    assert est.stderr == 0.0 and est.lower == est.upper == est.mean


def test_mc_estimate_rejects_negative_stderr():
    with pytest.raises(ValueError):
        McEstimate(1.0, -1.0, 10, 0)


def test_log_ci_needs_positive_mean():
    with pytest.raises(ValueError):
        McEstimate(0.0, 0.0, 10, 0).log_ci()


# -- estimators -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 4])
@pytest.mark.parametrize("t", [0.1, 1.0])
def test_gaussian_estimators_are_deterministic(n, t):
    model = f"gaussian({n})"
    tail = estimate_tail(model, t, 8 / 3, 16)
    assert tail.mean == 0.0 and tail.stderr == 0.0
    for p in (1.0, 2.5):
        m = estimate_trace_moment(model, t, p, 16)
        assert m.stderr == 0.0
        assert m.mean == pytest.approx(n * (1 + t) ** -p, rel=1e-12, abs=0)


@pytest.mark.parametrize("model", ["gaussian(3)", "product(uniform*3)", "product(dexp*2,uniform*1)"])
def test_trace_moment_at_zero_is_dimension(model):
    assert estimate_trace_moment(model, 0.0, 1.0, 100).mean == 3.0


def test_estimator_preconditions():
    with pytest.raises(ValueError):
        estimate_tail("gaussian(1)", 0.0, 8 / 3, 10)
    with pytest.raises(ValueError):
        estimate_tail("gaussian(1)", 0.1, 0.0, 10)
    with pytest.raises(ValueError):
        estimate_trace_moment("gaussian(1)", 0.1, 0.5, 10)


def test_gaussian_EF_matches_closed_form():
    pot = build_potential(5.0, 7 / 3, 2000)
    times = (0.1, 0.2, 0.4)
    curve = estimate_EF("gaussian(4)", pot, times, 8)
    for t, est in zip(times, curve.estimates):
        assert est.stderr == 0.0
        assert est.mean == pytest.approx(4 * float(pot(np.array([1 / (1 + t)]))[0]), rel=1e-12)
    assert curve.passed


def test_EF_equal_times_is_equality():
    pot = build_potential(5.0, 7 / 3, 2000)
    curve = estimate_EF("gaussian(2)", pot, (0.2, 0.2), 8)
    assert curve.checks[0].log_envelope == 0.0 and curve.checks[0].log_margin == 0.0


def test_EF_rejects_bad_times():
    pot = build_potential(5.0, 7 / 3, 2000)
    with pytest.raises(ValueError):
        estimate_EF("gaussian(1)", pot, (0.0, 0.1), 4)
    with pytest.raises(ValueError):
        estimate_EF("gaussian(1)", pot, (0.2, 0.1), 4)


def test_product_tail_against_per_coordinate_oracle(default_matrix):
    # product spectra are per-coordinate tilted variances, so the 8-dim tail
    # count has mean 8 times the 1-dim exceedance probability
    full = estimate_tail("product(dexp*8)", 0.05, 8 / 3, default_matrix.n_paths, default_matrix.h, 0)
    one = estimate_tail("product(dexp*1)", 0.05, 8 / 3, 80_000, default_matrix.h, 1)
    assert full.mean > 0
    assert abs(full.mean - 8 * one.mean) <= 3 * math.hypot(full.stderr, 8 * one.stderr)


def test_kls_gronwall_factor():
    assert kls_gronwall_log_factor(5.0, 1.0, 0.1, 0.1) == 0
    v = kls_gronwall_log_factor(2.0, 0.5, 0.1, 0.2)
    assert float(v) == pytest.approx(500 * math.log(2) + 0.5 * 4 * 0.1, rel=1e-14)
    with pytest.raises(ValueError):
        kls_gronwall_log_factor(2.0, 0.0, 0.1, 0.2)


# -- reference curves ---------------------------------------------------------------

def test_only_explicit_constant_curve_without_constants():
    assert set(reference_bounds(0.1, 8, 1.0)) == {"moment_6p"}


def test_operator_norm_curve_at_endpoint():
    n = 1e6
    t = 1 / math.log(n) ** 2
    row = reference_bounds(t, n, 1.0, {"C1": 1.0})["operator_norm"]
    assert row["in_domain"]
    assert float(row["value"].log_value()) == pytest.approx(-math.log(n) ** 2, rel=1e-13)
    assert not reference_bounds(2 * t, n, 1.0, {"C1": 1.0})["operator_norm"]["in_domain"]


def test_tail_curve_vacuous_at_large_t():
    row = reference_bounds(1e30, 8, 1.0, {"c": 1.0})["tail_8_3"]
    assert float(row["value"]) == pytest.approx(16.0, rel=1e-12)
    assert float(row["value"]) > 8


def test_moment_curves_at_p_one():
    tab = reference_bounds(0.1, 5, 1.0, {"C": 6.0, "beta": 2.0})
    assert float(tab["moment_conjecture"]["value"]) == pytest.approx(36 * 5, rel=1e-14)
    assert float(tab["moment_6p"]["value"]) == pytest.approx(36 * 5, rel=1e-14)


def test_prior_tail_domain():
    tab = reference_bounds(0.01, 100, 1.0, {"C": 1.0})
    assert tab["prior_tail"]["in_domain"]
    assert float(tab["prior_tail"]["value"].log_value()) == pytest.approx(math.log(4) - 100, rel=1e-14)
    assert not reference_bounds(0.1, 100, 1.0, {"C": 1.0})["prior_tail"]["in_domain"]


def test_moment_split_curve():
    # (3p)^p n + e^{-c t^{-1/2}} t^{-p} n at p = 1, t = 1, c = 1
    v = reference_bounds(1.0, 2, 1.0, {"c": 1.0})["moment_split"]["value"]
    assert float(v) == pytest.approx(2 * (3 + math.exp(-1)), rel=1e-14)


# -- sharpness ----------------------------------------------------------------------

def test_sharpness_unit_point():
    v = sharpness_lower_bound(1, 1, 1)
    assert float(v.log_value()) == pytest.approx(LOG_HALF - 1, abs=1e-12)
    assert float(v) == pytest.approx(0.144749281, abs=1e-9)


def test_sharpness_display_at_p4_c1():
    p, c, n = 4.0, 1.0, 10.0
    r = p ** 1.5
    v = sharpness_lower_bound(r, c, n, q=p)
    hand = LOG_HALF - r / c + p * math.log(r) + math.log(n)
    assert abs(float(v.log_value()) - hand) <= 1e-12


def test_sharpness_linear_in_n():
    a = sharpness_lower_bound(2.5, 0.5, 1.0)
    b = sharpness_lower_bound(2.5, 0.5, ExtReal.from_log(1000))
    assert float(b.log_value() - a.log_value()) == pytest.approx(1000, abs=1e-12)


def test_sharpness_preconditions():
    with pytest.raises(ValueError):
        sharpness_lower_bound(0, 1, 1)
    with pytest.raises(ValueError):
        sharpness_lower_bound(1, -1, 1)


def test_fit_tail_constant():
    tails = {0.05: McEstimate(0.001, 0.0, 10, 0), 1.0: McEstimate(0.0, 0.0, 10, 0)}
    c = fit_tail_constant(tails, 8.0)
    assert c == pytest.approx(math.log(16 / 0.001) * math.sqrt(0.05), rel=1e-14)
    assert fit_tail_constant({1.0: McEstimate(0.0, 0.0, 10, 0)}, 8.0) == math.inf


# -- config and suites ----------------------------------------------------------------

def test_config_parsing():
    cfg = HarnessConfig.from_text("""
        # comment
        seed = 3
        n_paths = 100
        models = gaussian(2); product(uniform*2)
        times = 0.1, 0.2
        c = 0.5
    """)
    assert cfg.seed == 3 and cfg.n_paths == 100
    assert cfg.models == ("gaussian(2)", "product(uniform*2)")
    assert cfg.times == (0.1, 0.2)
    assert cfg.constants == {"c": 0.5}


@pytest.mark.parametrize("text, exc", [("bogus = 1", KeyError), ("seed = x", ValueError), ("seed", ValueError)])
def test_config_errors(text, exc):
    with pytest.raises(exc):
        HarnessConfig.from_text(text)


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify_suite("nope", HarnessConfig())


def test_gaussian_suite_passes():
    assert verify_suite("gaussian-oracle", HarnessConfig())["passed"]


def test_ladder_suite_flags_regime():
    res = verify_suite("ladder", HarnessConfig())
    assert res["passed"]
    regime = res["suites"]["ladder"]["regime"][0]
    assert regime["flag"] == "regime" and "absorption" in regime["failing"]


def test_potential_suite_reports_b():
    cfg = HarnessConfig(potential_d0=(5.0,), potential_r0=(2.5,), grid_points=2000)
    res = verify_suite("potential", cfg)["suites"]["potential"]
    assert res["passed"] and 0.05 <= res["checks"][0]["b"] <= 0.2


def test_dumps_is_canonical():
    doc = {"b": 1.0, "a": [np.float64(0.1), ExtReal.from_log(-1e6)]}
    assert dumps(doc) == dumps(dict(reversed(list(doc.items()))))
    assert dumps(doc).endswith("\n")


def test_runs_cache_reuses_superset(monkeypatch):
    # private cache so the shared default matrix survives
    monkeypatch.setattr(harness, "_RUNS", {})
    model = harness._model("product(uniform*2)")
    a = harness._spectra(model, (0.1, 0.2), 1e-3, 50, 5)
    b = harness._spectra(model, (0.2,), 1e-3, 50, 5)
    assert len(harness._RUNS) == 1
    harness.clear_cache()
    c = harness._spectra(model, (0.2,), 1e-3, 50, 5)
    assert np.array_equal(a[:, 1], b[:, 0]) and np.array_equal(b, c)
