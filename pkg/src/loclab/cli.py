"""``loclab`` command line.

Exit codes: 0 pass, 1 check failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from loclab import __version__
from loclab.harness import (
    SUITES,
    TAIL_THRESHOLD,
    HarnessConfig,
    dumps,
    estimate_tail,
    estimate_trace_moment,
    reference_bounds,
    verify_suite,
)
from loclab.ladder import LadderDepthError, build_ladder, check_constants
from loclab.localization import simulate_ensemble
from loclab.measures import DivergentTiltError, parse_model_spec, tilted_moments
from loclab.potentials import ConstructionInfeasible, build_potential

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _times(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time list {text!r}") from None


def _load_config(args) -> HarnessConfig:
    if args.config:
        try:
            cfg = HarnessConfig.from_text(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise UsageError(f"config error: {exc}") from None
    else:
        cfg = HarnessConfig()
    # explicit flags win over the file
    if args.seed is not None:
        cfg.seed = args.seed
    if args.n_paths is not None:
        cfg.n_paths = args.n_paths
    if args.h is not None:
        cfg.h = args.h
    if getattr(args, "model", None):
        cfg.models = (args.model,)
    if getattr(args, "t", None):
        cfg.times = args.t
    return cfg


def _write(out, name, text):
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)


def _emit(args, doc, report_lines=None):
    text = dumps(doc)
    if args.out:
        _write(args.out, "summary.json", text)
        if report_lines is not None:
            _write(args.out, "report.txt", "\n".join(report_lines) + "\n")
    else:
        sys.stdout.write(text)


def _model(spec):
    try:
        return parse_model_spec(spec)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    model = _model(args.model or cfg.models[0])
    traj = simulate_ensemble(model, cfg.times, cfg.h, cfg.seed, cfg.n_paths)
    _write(args.out, "spectra.csv", traj.to_csv())
    doc = {"config": cfg.to_json(), "replay": traj.replay_document(),
           "lambda_max": {repr(t): float(traj.spectra[:, k, -1].max()) for k, t in enumerate(traj.schedule)}}
    lines = [f"simulate {model.spec}: {traj.n_paths} paths, h = {cfg.h}, seed = {cfg.seed}"]
    lines += [f"  t = {t}: max lambda = {v!r}" for t, v in doc["lambda_max"].items()]
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_moments(args) -> int:
    model = _model(args.model or "gaussian(1)")
    theta = np.zeros(model.dim) if args.theta is None else np.asarray(_times(args.theta))
    t = args.t[0] if args.t else 0.0
    try:
        m = tilted_moments(model, theta, t)
    except (ValueError, DivergentTiltError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(args, {"model": model.spec, "t": t, "theta": theta.tolist(), "barycenter": m.a.tolist(),
                 "covariance_diagonal": np.diag(m.A.entries).tolist(), "log_Z": m.log_Z})
    return EXIT_OK


def cmd_potential(args) -> int:
    if args.d0 is None or args.r0 is None:
        raise UsageError("potential needs --d0 and --r0")
    try:
        pot = build_potential(args.d0, args.r0, args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except ConstructionInfeasible as exc:
        _emit(args, {"D0": args.d0, "r0": args.r0, "passed": False, "error": str(exc)})
        return EXIT_FAIL
    cert = pot.certificate()
    if args.out:
        # a single certificate file rather than an output directory
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(dumps(cert))
        print(f"potential D0 = {args.d0}, r0 = {args.r0}: b = {pot.b!r} ({pot.kind}), "
              f"certified = {cert['passed']}", file=sys.stderr)
    else:
        sys.stdout.write(dumps(cert))
    return EXIT_OK if cert["passed"] else EXIT_FAIL


def _log_inputs(args):
    if (args.p is None) == (args.log_p is None):
        raise UsageError("give exactly one of --p, --log-p")
    if (args.log_n is None) == (args.log_log_n is None):
        raise UsageError("give exactly one of --log-n, --log-log-n")
    kw = {"p": args.p} if args.p is not None else {"log_p": args.log_p}
    kw.update({"log_n": args.log_n} if args.log_n is not None else {"log_log_n": args.log_log_n})
    return kw


def cmd_ladder(args) -> int:
    kw = _log_inputs(args)
    try:
        consts = check_constants(C1=args.c1, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = {"constants": consts.to_json()}
    try:
        lad = build_ladder(C1=args.c1, reading=args.reading, **kw)
        doc.update(lad.to_json())
        doc["forward_residuals"] = lad.forward_check()
    except LadderDepthError as exc:
        doc["error"] = str(exc)
    except ValueError as exc:
        doc["error"] = str(exc)
    _emit(args, doc)
    return EXIT_OK if consts.passed and "error" not in doc else EXIT_FAIL


def _report_lines(name, res):
    lines = [f"{name}: {'PASS' if res['passed'] else 'FAIL'}"]
    for c in res.get("checks", []):
        keys = [k for k in ("model", "n", "t", "D0", "r0", "k", "log_p") if k in c]
        label = ", ".join(f"{k}={c[k]}" for k in keys)
        lines.append(f"  [{'ok' if c.get('passed') else 'FAIL'}] {label}")
    for r in res.get("regime", []):
        lines.append(f"  [regime] log_p={r['log_p']}: expected failures {r.get('failing')}")
    return lines


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    name = args.suite
    if name != "all" and name not in SUITES:
        raise UsageError(f"unknown suite {name!r}")
    try:
        res = verify_suite(name, cfg)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    lines = []
    for n, r in res["suites"].items():
        lines += _report_lines(n, r)
    lines.append(f"overall: {'PASS' if res['passed'] else 'FAIL'}")
    _emit(args, {"config": cfg.to_json(), "suite": name, **res}, lines)
    if not args.out:
        print("\n".join(lines), file=sys.stderr)
    return EXIT_OK if res["passed"] else EXIT_FAIL


def cmd_report(args) -> int:
    cfg = _load_config(args)
    estimates, bounds, lines = [], {}, []
    for spec in cfg.models:
        model = _model(spec)
        traj = simulate_ensemble(model, cfg.times, cfg.h, cfg.seed, cfg.n_paths)
        if len(cfg.models) == 1:
            _write(args.out, "spectra.csv", traj.to_csv())
        lines.append(f"{model.spec} ({cfg.n_paths} paths, h = {cfg.h}, seed = {cfg.seed})")
        for t in cfg.times:
            tail = estimate_tail(model, t, TAIL_THRESHOLD, cfg.n_paths, cfg.h, cfg.seed)
            row = {"model": model.spec, "t": t, "tail_8_3": tail.to_json(), "trace_moments": {}}
            for p in cfg.moment_p:
                m = estimate_trace_moment(model, t, p, cfg.n_paths, cfg.h, cfg.seed)
                row["trace_moments"][repr(p)] = {**m.to_json(), "envelope_6p": (6 * p) ** (2 * p) * model.dim}
            estimates.append(row)
            lines.append(f"  t = {t}: tail(8/3) = {tail.mean:.6g} +- {tail.stderr:.2g}; "
                         + "; ".join(f"Tr A^{p:g} = {v['mean']:.6g} +- {v['stderr']:.2g}"
                                     for p, v in zip(cfg.moment_p, row["trace_moments"].values())))
            tab = reference_bounds(t, model.dim, 1.0, cfg.constants)
            bounds[f"{model.spec}@{t!r}"] = {k: {"log10": v["log10"], "in_domain": v["in_domain"]}
                                             for k, v in tab.items()}
    _emit(args, {"config": cfg.to_json(), "estimates": estimates, "bound_curves_log10": bounds}, lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="loclab", description="Stochastic localization covariance experiments.")
    ap.add_argument("--version", action="version", version=f"loclab {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p, sim=True):
        p.add_argument("--model", help="gaussian(N) or product(ITEM,...)")
        p.add_argument("--t", type=_times, help="comma-separated times")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="key=value config file")
        if sim:
            p.add_argument("--n-paths", type=int)
            p.add_argument("--h", type=float)
            p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="simulate spectra and write spectra.csv")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("moments", help="tilted moments at one (theta, t)")
    common(p, sim=False)
    p.add_argument("--theta", help="comma-separated tilt vector (default 0)")
    p.set_defaults(func=cmd_moments)
    p = sub.add_parser("potential", help="build and certify a test potential")
    p.add_argument("--d0", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--out", help="certificate JSON file")
    p.set_defaults(func=cmd_potential)
    p = sub.add_parser("ladder", help="time ladder and constant checks")
    p.add_argument("--p", type=float)
    p.add_argument("--log-p", type=float)
    p.add_argument("--log-n", type=float)
    p.add_argument("--log-log-n", type=float)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--reading", choices=("first-entry", "sup"), default="first-entry")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ladder)
    p = sub.add_parser("verify", help="run a verification suite")
    common(p)
    p.add_argument("--suite", default="all")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("report", help="estimates and reference bound table")
    common(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"loclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
