"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--paths N] [--steps S]``.
Prints wall time per kernel and backend plus the max abs difference.
"""
import argparse
import time

import numpy as np

from loclab import _fallback
from loclab._segments import GL_NODES, GL_WEIGHTS
from loclab.measures import parse_model_spec

try:
    from loclab import _kernels
except ImportError:  # extension not built
    _kernels = None


def _timed(fn, *args, repeat=3):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_drift(model_spec, paths, steps, seed=0):
    model = parse_model_spec(model_spec)
    seg, off = model.segment_table()
    comp = model.coord_components()
    noise = np.random.default_rng(seed).standard_normal((paths, steps, model.dim))
    rec = np.array([steps // 4, steps // 2, steps], dtype=np.intp)
    rows = []
    t_f, (o_f, _) = _timed(_fallback.drift_paths, noise, comp, seg, off, 1e-3, rec, GL_NODES, GL_WEIGHTS)
    rows.append(("drift_paths", model_spec, "fallback", t_f, 0.0))
    if _kernels is not None:
        t_c, (o_c, _) = _timed(_kernels.drift_paths, noise, comp, seg, off, 1e-3, rec, GL_NODES, GL_WEIGHTS)
        rows.append(("drift_paths", model_spec, "compiled", t_c, float(np.abs(o_c - o_f).max())))
    return rows


def bench_means(model_spec, size, seed=0):
    model = parse_model_spec(model_spec)
    seg, off = model.segment_table()
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, 5.0, size)
    comp = rng.integers(0, len(model.factors), size).astype(np.intp)
    rows = []
    t_f, m_f = _timed(_fallback.component_means, theta, comp, 0.3, seg, off, GL_NODES, GL_WEIGHTS)
    rows.append(("component_means", model_spec, "fallback", t_f, 0.0))
    if _kernels is not None:
        t_c, m_c = _timed(_kernels.component_means, theta, comp, 0.3, seg, off, GL_NODES, GL_WEIGHTS)
        rows.append(("component_means", model_spec, "compiled", t_c, float(np.abs(m_c - m_f).max())))
    return rows


def bench_jacobi(n, seed=0):
    a = np.random.default_rng(seed).normal(size=(n, n))
    a = a + a.T
    rows = []
    ref = None
    for name, mod in (("fallback", _fallback), ("compiled", _kernels)):
        if mod is None:
            continue
        def run():
            w, v = a.copy(), np.eye(n)
            mod.jacobi_sweeps(w, v, 1e-14)
            return np.sort(np.diag(w))
        t, ev = _timed(run)
        ref = ev if ref is None else ref
        rows.append(("jacobi_sweeps", f"n={n}", name, t, float(np.abs(ev - ref).max())))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=256)
    ap.add_argument("--steps", type=int, default=400)
    args = ap.parse_args(argv)
    rows = []
    for spec in ("product(uniform*8)", "product(dexp*8)", "product(uniform*4,dexp*4)"):
        rows += bench_drift(spec, args.paths, args.steps)
    rows += bench_means("product(uniform*1,dexp*1)", 100_000)
    rows += bench_jacobi(40)
    print(f"{'kernel':<16} {'case':<28} {'backend':<9} {'seconds':>9} {'max|diff|':>10}")
    for k, case, b, t, d in rows:
        print(f"{k:<16} {case:<28} {b:<9} {t:9.4f} {d:10.2e}")


if __name__ == "__main__":
    main()
