"""Command-line entry point.

Subcommands: fit, simulate, moments, vis, split, verify. Exit codes: 0 on
success, 1 on invalid input (or a failed oracle check in ``verify``), 2 when a
numeric series fails to converge. Every file is written through a temp file
and a rename, and identical arguments give byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import defaults
from .fitting import fit_orientation_model, fit_position_model
from .flights import (DEFAULT_MIN_FLIGHT_LENGTH, DEFAULT_PAUSE_MIN, DEFAULT_PAUSE_SPEED,
                      DEFAULT_TURN_THRESHOLD, extract_flights)
from .mobility import DEFAULT_POSITION_MODEL
from .modelio import dumps_model, load_model
from .moments import VARIANTS, MomentConvergenceWarning, moments
from .oracle import run_suite
from .splitter import PoseModels, SplitConfig, auto_reference_interval, baseline_fixed, plan, split_frame
from .synth import synthesize_trace
from .traces import atomic_write_text, dumps_trace, load_trace
from .vis import ViSConfig, vis_curve

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2
OUTPUT_SCHEMA_VERSION = 1
DEFAULT_LAGS = "1,5,10,15,20,25,30,60,100,200,300,500,800,1200,1600,2000"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for numeric failures
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included when on the grid) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise UsageError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9))
        return start + step * np.arange(n + 1)
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot read {text!r} as numbers") from None
    if not vals:
        raise UsageError("empty grid")
    return np.array(vals)


def _positive_int(text: str) -> int:
    v = int(float(text))
    if v < 1 or v != float(text):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _load_models(path) -> PoseModels:
    if path is None:
        return PoseModels(defaults.desktop_orientation_model(), DEFAULT_POSITION_MODEL)
    return load_model(path)


def _vis_config(args) -> ViSConfig:
    return ViSConfig(w_fv=math.radians(args.aov), d_fp=args.d_fp, variant=args.variant)


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _map(fn, items, threads: int) -> list:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_fit(args) -> int:
    traj = load_trace(args.trace)
    step = float(np.median(np.diff(traj.t)))
    lags = [int(v) for v in parse_grid(args.lags)]
    ex = extract_flights(traj, math.radians(args.turn_threshold), args.min_flight_length,
                         args.pause_speed, args.pause_min)
    pos = fit_position_model(ex, seed=args.seed)
    ori = fit_orientation_model(traj, [round(k * step, 9) for k in lags], seed=args.seed, workers=args.threads)
    reports = {
        "theta": ori.theta_report.to_dict(),
        "delta_theta": {repr(dt): r.to_dict() for dt, r in ori.delta_theta_reports.items()},
        "delta_phi": {repr(dt): [r.to_dict() for r in reps] for dt, reps in ori.delta_phi_reports.items()},
        "flight": pos.flight_report.to_dict(),
        "pause": pos.pause_report.to_dict(),
        "position_observed": dict(pos.observed),
        "n_flights": len(ex.flights),
        "skipped_dt": list(ori.skipped),
    }
    _emit(dumps_model(PoseModels(ori.model, pos.model), reports), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    models = _load_models(args.model)
    st = synthesize_trace(models.position, models.orientation, args.duration, args.fps,
                          seed=args.seed, eye_height=args.eye_height)
    _emit(dumps_trace(st.trajectory), args.out)
    return EXIT_OK


def cmd_moments(args) -> int:
    models = _load_models(args.model)
    dts = parse_grid(args.dt)
    tables = _map(lambda dt: moments(models.position, float(dt), args.k_max, args.n_max, args.variant),
                  dts, args.threads)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dt", "k", "m", "m_pause", "m_flight", "p_flight"])
        for t in tables:
            for k in range(t.m.size):
                w.writerow([repr(t.dt), k, repr(float(t.m[k])), repr(float(t.m_case1[k])),
                            repr(float(t.m_case2[k])), repr(t.p_flight)])
        _emit(buf.getvalue(), args.out)
    else:
        doc = {"schema_version": OUTPUT_SCHEMA_VERSION, "variant": args.variant, "tables": [
            {"dt": t.dt, "p_flight": t.p_flight, "n_max": t.n_max, "converged": t.converged,
             "k": list(range(t.m.size)), "m": t.m.tolist(), "m_pause": t.m_case1.tolist(),
             "m_flight": t.m_case2.tolist()}
            for t in tables]}
        _emit(_json(doc), args.out)
    return EXIT_OK


def cmd_vis(args) -> int:
    models = _load_models(args.model)
    cfg = _vis_config(args)
    dts = parse_grid(args.dt)
    d_grid = parse_grid(args.d_grid)
    if np.any(d_grid <= 0):
        raise UsageError("distances must be > 0")
    curves = _map(lambda dt: vis_curve(models.orientation, models.position, float(dt), d_grid, cfg),
                  dts, args.threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dt", "d", "vis_fov", "vis_dst", "vis", "err_bound"])
    for c in curves:
        for p in c.points:
            w.writerow([repr(c.dt), repr(p.d), repr(p.vis_fov), repr(p.vis_dst), repr(p.vis), repr(p.err_bound)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    models = _load_models(args.model)
    scfg = SplitConfig(fps=args.fps, R=None if args.R == "auto" else int(args.R), vis_tr=args.vis_tr,
                       d_step=args.d_step, cfg=_vis_config(args), r_max=args.r_max)
    R = scfg.R if scfg.R is not None else auto_reference_interval(models, scfg)
    if args.baseline_fixed is not None:
        result = baseline_fixed(args.baseline_fixed, args.frames, scfg, R)
    else:
        offsets = range(1, R)
        values = _map(lambda j: split_frame(models, j / scfg.fps, scfg), offsets, args.threads)
        result = plan(models, args.frames, replace(scfg, R=R), table=dict(zip(offsets, values)))
    _emit(result.to_csv(), args.out)
    if args.summary:
        atomic_write_text(args.summary, _json({"schema_version": OUTPUT_SCHEMA_VERSION, **result.summary()}))
    return EXIT_OK


def cmd_verify(args) -> int:
    models = _load_models(args.model)
    reports = run_suite(models.orientation, models.position, seed=args.seed, n_moments=args.n_moments,
                        n_vis=args.n_vis, cfg=_vis_config(args))
    failed = [r for r in reports if not r.verdict]
    doc = {
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "seed": args.seed,
        "n_checks": len(reports),
        "n_failed": len(failed),
        "all_pass": not failed,
        "reports": [r.to_dict() for r in reports],
    }
    _emit(_json(doc), args.out)
    for r in failed:
        print(f"FAIL {r.quantity}: analytic {r.analytic:.6g} vs MC {r.mc_estimate:.6g}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_INVALID


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults, keyed by subcommand")
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker threads (default: available CPUs)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", "-o", default=None, help="output file (default: stdout)")

    model = _Parser(add_help=False)
    model.add_argument("--model", "-m", default=None, help="model JSON (default: built-in desktop model)")

    view = _Parser(add_help=False)
    view.add_argument("--aov", type=float, default=defaults.ANGLE_OF_VIEW_DEG, help="angle of view, degrees")
    view.add_argument("--d-fp", type=float, default=defaults.FAR_PLANE_M, help="far plane, metres")
    view.add_argument("--variant", choices=VARIANTS, default="planar", help="moment weights")

    parser = _Parser(prog="vispose", description="Pose-model ViS analysis")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("fit", parents=[common], help="fit a model to a pose trace CSV")
    p.add_argument("--trace", "-t", required=True)
    p.add_argument("--lags", default=DEFAULT_LAGS, help="time gaps in samples (list or start:stop:step)")
    p.add_argument("--turn-threshold", type=float, default=math.degrees(DEFAULT_TURN_THRESHOLD),
                   help="degrees")
    p.add_argument("--min-flight-length", type=float, default=DEFAULT_MIN_FLIGHT_LENGTH)
    p.add_argument("--pause-speed", type=float, default=DEFAULT_PAUSE_SPEED)
    p.add_argument("--pause-min", type=float, default=DEFAULT_PAUSE_MIN)
    p.set_defaults(func=cmd_fit)
    subs["fit"] = p

    p = sub.add_parser("simulate", parents=[common, model], help="write a synthetic pose trace CSV")
    p.add_argument("--duration", type=float, default=3600.0, help="seconds")
    p.add_argument("--fps", type=float, default=defaults.FPS)
    p.add_argument("--eye-height", type=float, default=defaults.EYE_HEIGHT_M)
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("moments", parents=[common, model], help="displacement moments as JSON or CSV")
    p.add_argument("--dt", default="0.25", help="seconds (list or start:stop:step)")
    p.add_argument("--k-max", type=int, default=31)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--variant", choices=VARIANTS, default="planar")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_moments)
    subs["moments"] = p

    p = sub.add_parser("vis", parents=[common, model, view], help="ViS(d) curves as CSV")
    p.add_argument("--dt", default="0.1", help="seconds (list or start:stop:step)")
    p.add_argument("--d-grid", default="5:50:0.5", help="metres (list or start:stop:step)")
    p.set_defaults(func=cmd_vis)
    subs["vis"] = p

    p = sub.add_parser("split", parents=[common, model, view], help="per-frame foreground split plan")
    p.add_argument("--fps", type=float, default=defaults.FPS)
    p.add_argument("--vis-tr", type=float, default=defaults.VIS_THRESHOLD)
    p.add_argument("--frames", type=_positive_int, default=600)
    p.add_argument("--R", default="auto", help="reference interval in frames, or auto")
    p.add_argument("--r-max", type=_positive_int, default=defaults.R_MAX)
    p.add_argument("--d-step", type=float, default=0.5)
    p.add_argument("--baseline-fixed", type=float, default=None, metavar="D",
                   help="emit the constant-threshold baseline instead")
    p.add_argument("--summary", default=None, help="also write a JSON summary here")
    p.set_defaults(func=cmd_split)
    subs["split"] = p

    p = sub.add_parser("verify", parents=[common, model, view], help="Monte-Carlo cross-check report")
    p.add_argument("--n-moments", type=_positive_int, default=10**6)
    p.add_argument("--n-vis", type=_positive_int, default=10**5)
    p.set_defaults(func=cmd_verify)
    subs["verify"] = p
    return parser, subs


def _apply_config(argv, subs) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        doc = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object keyed by subcommand")
    for name, values in doc.items():
        if name not in subs or not isinstance(values, dict):
            raise UsageError(f"config section {name!r} is not a subcommand")
        dests = {a.dest for a in subs[name]._actions}
        unknown = sorted(set(values) - dests)
        if unknown:
            raise UsageError(f"config section {name!r}: unknown options {', '.join(unknown)}")
        subs[name].set_defaults(**values)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, subs)
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("error", MomentConvergenceWarning)
            return args.func(args)
    except (ArithmeticError, MomentConvergenceWarning) as exc:
        print(f"vispose: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"vispose: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())
