import json
import math

import numpy as np
import pytest

from loclab.localization import (
    TiltState,
    barycenter_martingale_check,
    em_step,
    martingale_check,
    replay,
    simulate_ensemble,
    simulate_trajectory,
)
from loclab.measures import MeasureModel, parse_model_spec
from loclab.numerics import RngStream


def test_em_step_zero_drift_at_origin():
    s = em_step(TiltState.initial(1), MeasureModel.gaussian(1), 0.01, [0.0])
    assert s.theta.tolist() == [0.0] and s.t == pytest.approx(0.01)


def test_em_step_gaussian_drift():
    s = em_step(TiltState(np.array([1.0]), 0.0), MeasureModel.gaussian(1), 0.01, [0.0])
    assert s.theta[0] == pytest.approx(1.01, abs=1e-15)


def test_em_step_symmetric_uniform_zero_drift():
    model = parse_model_spec("product(uniform*3)")
    s = em_step(TiltState(np.zeros(3), 0.7), model, 0.01, np.zeros(3))
    assert np.abs(s.theta).max() <= 1e-15


def test_em_step_validates():
    with pytest.raises(ValueError):
        em_step(TiltState.initial(2), MeasureModel.gaussian(2), 0.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        em_step(TiltState.initial(2), MeasureModel.gaussian(2), 0.1, [0.0])
    with pytest.raises(ValueError):
        TiltState(np.array([np.inf]), 0.0)


def test_gaussian_spectra_exact():
    traj = simulate_trajectory(MeasureModel.gaussian(3), [0.1, 0.5, 1.0], 1e-3, RngStream(11, 0))
    for k, t in enumerate([0.1, 0.5, 1.0]):
        assert np.abs(traj.spectra[0, k] - 1 / (1 + t)).max() <= 1e-12


def test_t_zero_record_is_identity():
    traj = simulate_ensemble(parse_model_spec("product(uniform*2,dexp*2)"), [0.0, 0.1], 1e-3, 0, 4)
    assert np.abs(traj.spectra[:, 0, :] - 1.0).max() <= 1e-10


def test_same_seed_bit_identical():
    model = parse_model_spec("product(dexp*3)")
    a = simulate_ensemble(model, [0.05, 0.1], 1e-3, 99, 5)
    b = simulate_ensemble(model, [0.05, 0.1], 1e-3, 99, 5)
    assert a.to_csv() == b.to_csv()
    assert np.array_equal(a.theta, b.theta)


def test_path_independent_of_blocking():
    model = parse_model_spec("product(uniform*2)")
    whole = simulate_ensemble(model, [0.2], 1e-3, 3, 300)
    single = simulate_trajectory(model, [0.2], 1e-3, RngStream(3, 257))
    assert np.array_equal(whole.theta[257], single.theta[0])
    tail = simulate_ensemble(model, [0.2], 1e-3, 3, 10, first_path=290)
    assert np.array_equal(whole.theta[290:], tail.theta)


def test_record_subset_does_not_change_paths():
    model = parse_model_spec("product(dexp*2)")
    a = simulate_ensemble(model, [0.1, 0.2, 0.3], 1e-3, 4, 6)
    b = simulate_ensemble(model, [0.2], 1e-3, 4, 6)
    assert np.array_equal(a.spectra[:, 1], b.spectra[:, 0])


@pytest.mark.parametrize("sched", [[0.1005], [0.2, 0.1], [5.0], [-0.1]])
def test_schedule_refused(sched):
    with pytest.raises(ValueError):
        simulate_ensemble(MeasureModel.gaussian(1), sched, 1e-3, 0, 1)


def test_csv_schema_and_replay():
    model = parse_model_spec("product(uniform*2)")
    traj = simulate_ensemble(model, [0.1, 0.2], 1e-3, 5, 2)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "path,t,lambda_1,lambda_2"
    assert len(lines) == 1 + 2 * 2
    row = lines[1].split(",")
    assert float(row[2]) == traj.spectra[0, 0, 0]
    doc = json.dumps(traj.replay_document())
    again = replay(doc)
    assert np.array_equal(again.spectra, traj.spectra)


def test_arrays_read_only():
    traj = simulate_ensemble(MeasureModel.gaussian(1), [0.1], 1e-3, 0, 2)
    with pytest.raises(ValueError):
        traj.theta[0, 0, 0] = 1.0


def test_lichnerowicz_on_heavy_model():
    traj = simulate_ensemble(parse_model_spec("product(dexp*4)"), [0.05, 0.2, 1.0], 1e-3, 1, 200)
    for k, t in enumerate(traj.schedule):
        assert traj.spectra[:, k, -1].max() <= 1 / t + 1e-8


def test_martingale_horizon_zero_exact():
    rep = martingale_check(MeasureModel.gaussian(2), [[0.0, 0.0], [1.0, -1.0]], 100, 0.0)
    assert rep.passed and all(e["mean"] == 1.0 for e in rep.entries)
    rep = barycenter_martingale_check(MeasureModel.gaussian(2), 100, 0.0)
    assert rep.passed and all(e["mean"] == 0.0 for e in rep.entries)


def test_martingale_gaussian_oracle():
    # Gaussian localization density has a closed form, so the ratio's law is known:
    # theta_t ~ N(0, t (1 + t)) and the ratio has mean exactly 1.
    rep = martingale_check(MeasureModel.gaussian(1), [[0.0], [1.0]], 4000, 0.25, seed=2)
    assert rep.passed


def test_barycenter_martingale_small():
    assert barycenter_martingale_check(MeasureModel.gaussian(2), 2000, 0.5, seed=3).passed
    assert barycenter_martingale_check(parse_model_spec("product(dexp*2)"), 2000, 0.2, seed=3).passed


def test_martingale_needs_paths():
    with pytest.raises(ValueError):
        martingale_check(MeasureModel.gaussian(1), [[0.0]], 50, 0.1)


def test_gaussian_theta_variance():
    # theta_t = int (a_s ds + dB_s) with a = theta/(1+s): Var theta_t = t (1 + t)
    traj = simulate_ensemble(MeasureModel.gaussian(1), [0.5], 1e-3, 8, 8000)
    v = float(np.var(traj.theta[:, 0, 0], ddof=1))
    se = v * math.sqrt(2 / 7999)
    assert abs(v - 0.75) <= 4 * se + 2e-3
