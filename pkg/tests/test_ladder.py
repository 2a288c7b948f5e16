import math

import mpmath
import numpy as np
import pytest

from loclab.ladder import (
    LadderDepthError,
    absorption_log_margin,
    absorption_threshold,
    build_ladder,
    check_constants,
    final_rung_identity,
    induction_targets,
    ladder_potentials,
    rung_zero_check,
    window_log_log_n_threshold,
)
from loclab.numerics import ExtReal
from loclab.numerics.extreal import MP, mpf


@pytest.fixture(scope="module")
def default_ladder():
    return build_ladder(log_p=125, log_log_n=1e27)


def test_default_ladder_shape(default_ladder):
    lad = default_ladder
    assert lad.branch == "multi_stage"
    assert lad.k0 == 3
    assert len(lad.s) == lad.k0 - 1
    # t_k0 = t_1* = p^-8
    assert lad.rungs[-1].log == -1000
    assert lad.t1_star == ExtReal.from_log(-1000)


def test_second_backward_rung_is_exact(default_ladder):
    # one step of t* -> exp(-(t*)^(-1/16)) from e^-1000
    r2 = default_ladder.backward[1]
    assert r2.loglog == mpf("62.5")
    assert r2.log == -MP.exp(mpf("62.5"))


def test_rungs_strictly_increasing(default_ladder):
    t = default_ladder.t
    assert all(a < b for a, b in zip(t, t[1:]))
    assert t[0] <= default_ladder.t_star


def test_forward_residuals_zero(default_ladder):
    assert default_ladder.forward_check() == [0.0] * (default_ladder.k0 - 1)


def test_s_sequence(default_ladder):
    s = default_ladder.s
    assert s[0] == pytest.approx(7 / 3, abs=0)
    assert all(b > a for a, b in zip(s, s[1:]))
    assert s[-1] <= 15 / 6


def test_final_identity_exact(default_ladder):
    ident = final_rung_identity(default_ladder)
    assert ident["final"] and ident["final_residual"] == 0.0
    assert ident["k0_minus_1"] and ident["k0_minus_1_residual"] == 0.0


def test_single_stage_branch():
    # p^-8 = e^-80 far below t* = (log n)^-2 for n = 1e6
    lad = build_ladder(log_p=10, n=1e6)
    assert lad.branch == "single_stage"
    assert lad.k0 is None and lad.rungs == ()


def test_sup_reading_is_unbounded():
    with pytest.raises(ValueError, match="unbounded"):
        build_ladder(log_p=125, log_log_n=1e27, reading="sup")
    # the single-stage branch never needs k0
    assert build_ladder(log_p=10, n=1e6, reading="sup").branch == "single_stage"


def test_depth_error_for_huge_n():
    with pytest.raises(LadderDepthError):
        build_ladder(log_p=20, log_log_n="1e5000")


@pytest.mark.parametrize("kw", [dict(log_p=1.0, n=100), dict(log_p=10, n=1.5), dict(log_p=10, n=100, C1=0.0)])
def test_preconditions(kw):
    with pytest.raises(ValueError):
        build_ladder(**kw)


def test_exactly_one_input_form():
    with pytest.raises(ValueError):
        build_ladder(p=1e60, log_p=125, n=100)


def test_every_ladder_respects_s_cap():
    for lp in (20.0, 60.0, 125.0, 400.0):
        for lln in (5.0, 50.0, 1e3, 1e27):
            try:
                lad = build_ladder(log_p=lp, log_log_n=lln)
            except (LadderDepthError, ValueError):
                continue
            if lad.branch == "multi_stage":
                assert max(lad.s) <= 15 / 6
                assert all(r == 0 for r in lad.forward_check())


# -- constants ---------------------------------------------------------------

def test_start_time_boundary():
    rep = check_constants(log_p=125, log_log_n=1e27, thresholds=False)
    assert rep.entries["start_time"]["passed"]
    assert rep.entries["start_time"]["log_margin"] == 0.0
    rep = check_constants(log_p=124.9, log_log_n=1e27, thresholds=False)
    assert not rep.entries["start_time"]["passed"]


def test_absorption_fails_at_1000():
    lp = math.log(1000.0)
    m = absorption_log_margin(lp)
    # hand value: -50 - (1e4 log 1000 + 11000/18 - 2000/3), the e^{-p^8} term is negligible
    hand = -50 - (1e4 * lp + 11000 / 18 - 2000 / 3)
    assert float(m) == pytest.approx(hand, rel=1e-12)
    assert not check_constants(p=1000, n=100, thresholds=False).entries["absorption"]["passed"]


def test_absorption_threshold_bisection():
    th = absorption_threshold(1.0)
    # frozen from the bisection; the margin changes sign there
    assert th == pytest.approx(17.25117763256825, rel=1e-12)
    assert absorption_log_margin(th) >= 0
    assert absorption_log_margin(th - 1e-9) < 0


def test_absorption_monotone_in_p():
    grid = np.linspace(2.0, 200.0, 400)
    ok = [bool(absorption_log_margin(lp) >= 0) for lp in grid]
    first = ok.index(True)
    assert all(ok[first:])


def test_window_threshold():
    th = window_log_log_n_threshold(1.0)
    assert th == pytest.approx(4.605746100809097, rel=1e-10)
    assert check_constants(log_p=125, log_log_n=th + 0.01, thresholds=False).entries["window"]["passed"]
    assert not check_constants(log_p=125, log_log_n=th - 0.01, thresholds=False).entries["window"]["passed"]


def test_constants_report_thresholds():
    rep = check_constants(log_p=125, log_log_n=1e27)
    assert rep.passed
    assert set(rep.thresholds) == {"absorption_log_p", "window_log_log_n", "start_time_log_p"}
    assert rep.thresholds["start_time_log_p"] == 125.0


# -- rung zero and induction targets ------------------------------------------

def test_rung_zero_at_boundary():
    assert rung_zero_check(ExtReal.from_log(-1000)).passed


def test_rung_zero_regime():
    with pytest.raises(ValueError, match="regime"):
        rung_zero_check(ExtReal.from_log(-10))


def test_rung_zero_deeper():
    rep = rung_zero_check(ExtReal.from_log(-1e4))
    assert rep.passed
    rhs = ExtReal.from_json(rep.terms["rhs"]) if hasattr(ExtReal, "from_json") else None
    if rhs is not None:
        assert rhs == ExtReal.from_log(-1e8)


def test_induction_target_for_e_minus_1000(default_ladder):
    # the first forward rungs are towers; the last one before t_k0 carries the
    # exact bound e^{-p}; a direct rung e^-1000 gives e^{-1e6}
    x = mpf(1000)
    b = ExtReal.from_loglog(2 * MP.log(x), -1)
    assert abs(b.log_value() + mpf(10) ** 6) <= mpf(10) ** 6 * mpf(2) ** -100
    targets = induction_targets(None, default_ladder)
    assert len(targets) == default_ladder.k0
    p_bound = ExtReal.from_loglog(mpf(125), -1)
    assert targets[-1] == p_bound * ExtReal.from_log(default_ladder.log_n)
    assert targets[-2] == targets[-1]


def test_induction_targets_need_multistage():
    with pytest.raises(ValueError):
        induction_targets(None, build_ladder(log_p=10, n=1e6))


def test_ladder_potentials(default_ladder):
    pots = ladder_potentials(default_ladder, 2000)
    assert len(pots) == default_ladder.k0
    assert pots[-1].r0 == pytest.approx(8 / 3)
    assert all(p.grid_cert["passed"] for p in pots)
