"""Euler-Maruyama driver for the localization process in tilt form.

The state is (theta, t) with p_t(x) proportional to rho(x) exp(<theta, x> - t|x|^2/2).
One step is theta' = theta + a(theta, t) h + sqrt(h) xi, t' = t + h, where
a is the tilted barycenter.  Path i always reads RNG stream i, so ensembles
can be split into blocks (or run concurrently) without changing any path.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from loclab import kernels
from loclab._segments import GL_NODES, GL_WEIGHTS, DivergentTiltError
from loclab.measures import (
    LICHNEROWICZ_TOL,
    LichnerowiczViolation,
    MeasureModel,
    parse_model_spec,
    tilted_moments,
    tilted_moments_batch,
)
from loclab.numerics import RNG_ALGORITHM, RngStream, Spectrum, path_noise

__all__ = [
    "TiltState",
    "Trajectory",
    "MartingaleReport",
    "em_step",
    "simulate_trajectory",
    "simulate_ensemble",
    "martingale_check",
    "barycenter_martingale_check",
    "replay",
]

DEFAULT_H = 1e-3
MAX_HORIZON = 4.0
BLOCK_PATHS = 256
# Documented Euler bias allowance for the martingale checks: C_bias * h.
C_BIAS = 1.0


@dataclass(frozen=True)
class TiltState:
    theta: np.ndarray
    t: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise ValueError("t must be finite and >= 0")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def initial(cls, dim: int) -> TiltState:
        return cls(np.zeros(dim), 0.0)


def em_step(state: TiltState, model: MeasureModel, h: float, xi) -> TiltState:
    """One Euler-Maruyama step, drift from :func:`tilted_moments`."""
    if not h > 0:
        raise ValueError("h must be positive")
    xi = np.asarray(xi, dtype=float)
    if xi.shape != state.theta.shape:
        raise ValueError("noise has the wrong shape")
    if state.t == 0.0 and not np.any(state.theta):
        a = np.zeros_like(state.theta)
    else:
        a = tilted_moments(model, state.theta, state.t).a
    return TiltState(state.theta + a * h + math.sqrt(h) * xi, state.t + h)


def _record_steps(schedule, h, max_horizon):
    if not h > 0:
        raise ValueError("h must be positive")
    times = [float(x) for x in schedule]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("record times must be strictly increasing")
    steps = []
    for t in times:
        if t < 0 or t > max_horizon:
            raise ValueError(f"record time {t} outside [0, {max_horizon}]")
        k = round(t / h)
        if abs(k * h - t) > 1e-9 * max(t, h):
            raise ValueError(f"record time {t} is not a multiple of h = {h}")
        steps.append(k)
    return tuple(times), np.asarray(steps, dtype=np.intp)


@dataclass(frozen=True)
class Trajectory:
    """Recorded tilts and spectra for paths first_path .. first_path + n_paths - 1.

    ``theta``, ``barycenter`` and ``spectra`` have shape (paths, records, n);
    spectra rows are ascending.
    """

    model_spec: str
    schedule: tuple
    h: float
    master_seed: int
    first_path: int
    theta: np.ndarray
    barycenter: np.ndarray
    spectra: np.ndarray
    log_z: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.theta.shape[0]

    @property
    def noise_log(self) -> tuple:
        return tuple(RngStream(self.master_seed, self.first_path + i) for i in range(self.n_paths))

    def states(self, path: int = 0) -> list:
        return [TiltState(self.theta[path, k], t) for k, t in enumerate(self.schedule)]

    def spectrum(self, path: int, k: int) -> Spectrum:
        return Spectrum(self.spectra[path, k].copy())

    def replay_document(self) -> dict:
        return {
            "master_seed": int(self.master_seed),
            "h": self.h,
            "schedule": list(self.schedule),
            "model_spec": self.model_spec,
            "first_path": int(self.first_path),
            "n_paths": int(self.n_paths),
            "rng": RNG_ALGORITHM,
        }

    def to_csv(self, fh=None) -> str:
        """``path,t,lambda_1..lambda_n`` rows, floats written round-trip exact."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.spectra.shape[2]
        w.writerow(["path", "t"] + [f"lambda_{i + 1}" for i in range(n)])
        for p in range(self.n_paths):
            for k, t in enumerate(self.schedule):
                w.writerow([self.first_path + p, repr(float(t))] + [repr(float(x)) for x in self.spectra[p, k]])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _simulate_block(model, steps, h, master_seed, first, count, seg, offsets, comp):
    n_steps = int(steps.max()) if steps.size else 0
    if n_steps == 0:
        return np.zeros((count, steps.size, model.dim))
    noise = path_noise(master_seed, first, count, n_steps, model.dim)
    theta, bad = kernels.drift_paths(noise, comp, seg, offsets, float(h), steps, GL_NODES, GL_WEIGHTS)
    if bad >= 0:
        raise DivergentTiltError(f"divergent tilt on path {first + bad}")
    return theta


def simulate_ensemble(model: MeasureModel, schedule, h: float = DEFAULT_H, master_seed: int = 0,
                      n_paths: int = 1, first_path: int = 0,
                      max_horizon: float = MAX_HORIZON) -> Trajectory:
    """Simulate ``n_paths`` independent paths from theta = 0, t = 0.

    Raises :class:`LichnerowiczViolation` if any recorded spectrum has
    lambda_max > 1/t + 1e-8.
    """
    RngStream(master_seed, first_path)  # validates the seed
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    times, steps = _record_steps(schedule, h, max_horizon)
    seg, offsets = model.segment_table()
    comp = model.coord_components()
    blocks = []
    for lo in range(0, n_paths, BLOCK_PATHS):
        cnt = min(BLOCK_PATHS, n_paths - lo)
        blocks.append(_simulate_block(model, steps, h, master_seed, first_path + lo, cnt, seg, offsets, comp))
    theta = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, len(times), model.dim))
    bary = np.empty_like(theta)
    spectra = np.empty_like(theta)
    log_z = np.empty(theta.shape[:2])
    for k, t in enumerate(times):
        a, var, lz = tilted_moments_batch(model, theta[:, k, :], t)
        bary[:, k, :] = a
        log_z[:, k] = lz
        spectra[:, k, :] = np.sort(var, axis=1)
        if t > 0:
            worst = spectra[:, k, -1].max()
            if worst > 1.0 / t + LICHNEROWICZ_TOL:
                raise LichnerowiczViolation(f"lambda_max {worst!r} exceeds 1/t at t = {t}")
    for arr in (theta, bary, spectra, log_z):
        arr.setflags(write=False)
    return Trajectory(model.spec, times, float(h), int(master_seed), int(first_path),
                      theta, bary, spectra, log_z)


def simulate_trajectory(model: MeasureModel, schedule, h: float, stream: RngStream) -> Trajectory:
    """A single path driven by ``stream``; equals path ``stream.stream_index`` of an ensemble."""
    return simulate_ensemble(model, schedule, h, stream.master_seed, 1, stream.stream_index)


def replay(doc, base_dir=None) -> Trajectory:
    """Rebuild a trajectory from its replay document (dict or JSON text)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    model = parse_model_spec(doc["model_spec"], base_dir)
    return simulate_ensemble(model, doc["schedule"], doc["h"], doc["master_seed"],
                             doc.get("n_paths", 1), doc.get("first_path", 0))


@dataclass(frozen=True)
class MartingaleReport:
    passed: bool
    entries: tuple  # dicts with target, mean, stderr, allowance, passed

    def to_json(self) -> dict:
        return {"passed": self.passed, "entries": list(self.entries)}


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    m = math.fsum(x) / x.size
    if x.size < 2 or np.all(x == x[0]):
        return m, 0.0
    return m, float(np.std(x, ddof=1)) / math.sqrt(x.size)


def martingale_check(model: MeasureModel, x_points, n_paths: int, horizon: float,
                     h: float = DEFAULT_H, seed: int = 0, c_bias: float = C_BIAS) -> MartingaleReport:
    """Monte Carlo check of E[p_t(x)/p_0(x)] = 1 at each x.

    p_t(x)/p_0(x) = exp(<theta, x> - t|x|^2/2 - log Z_t + log Z_0), which
    does not depend on rho(x).  Passes when |mean - 1| <= 3 stderr + c_bias h.
    """
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    xs = np.atleast_2d(np.asarray(x_points, dtype=float))
    if xs.shape[1] != model.dim:
        raise ValueError("x_points must be n-vectors")
    log_z0 = float(tilted_moments(model, np.zeros(model.dim), 0.0).log_Z)
    entries = []
    if horizon == 0:
        for x in xs:
            entries.append({"target": 1.0, "x": x.tolist(), "mean": 1.0, "stderr": 0.0,
                            "allowance": 0.0, "passed": True})
        return MartingaleReport(True, tuple(entries))
    traj = simulate_ensemble(model, [horizon], h, seed, n_paths)
    theta = traj.theta[:, 0, :]
    lz = traj.log_z[:, 0]
    for x in xs:
        ratio = np.exp(theta @ x - 0.5 * horizon * float(x @ x) - lz + log_z0)
        m, se = _mean_se(ratio)
        allow = 3.0 * se + c_bias * h
        entries.append({"target": 1.0, "x": x.tolist(), "mean": m, "stderr": se,
                        "allowance": allow, "passed": bool(abs(m - 1.0) <= allow)})
    return MartingaleReport(all(e["passed"] for e in entries), tuple(entries))


def barycenter_martingale_check(model: MeasureModel, n_paths: int, horizon: float,
                                h: float = DEFAULT_H, seed: int = 0,
                                c_bias: float = C_BIAS) -> MartingaleReport:
    """Per-coordinate check of E[a_t] = 0 within 3 stderr (+ c_bias h)."""
    if horizon == 0:
        entries = tuple({"target": 0.0, "coord": i, "mean": 0.0, "stderr": 0.0,
                         "allowance": 0.0, "passed": True} for i in range(model.dim))
        return MartingaleReport(True, entries)
    traj = simulate_ensemble(model, [horizon], h, seed, n_paths)
    entries = []
    for i in range(model.dim):
        m, se = _mean_se(traj.barycenter[:, 0, i])
        allow = 3.0 * se + c_bias * h
        entries.append({"target": 0.0, "coord": i, "mean": m, "stderr": se,
                        "allowance": allow, "passed": bool(abs(m) <= allow)})
    return MartingaleReport(all(e["passed"] for e in entries), tuple(entries))
