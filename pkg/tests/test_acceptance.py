"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary of the pytest run.
"""
import math
import subprocess
import sys
import time

import numpy as np

from oracles import PARAM_SETS
from vispose.defaults import FRAME, desktop_orientation_model
from vispose.fitting import (
    detect_regimes,
    fit_delta_phi,
    fit_orientation_model,
    fit_position_model,
)
from vispose.flights import extract_flights
from vispose.mobility import PositionModel, displacement_sample, flight_time_fraction
from vispose.moments import moments, p_flight
from vispose.oracle import mc_moments, mc_vis_dst
from vispose.pose_model import pdf_delta_phi
from vispose.special import hyp1f1
from vispose.splitter import SplitConfig, plan, threshold_table
from vispose.synth import regime_samples, synthesize_trace
from vispose.vis import (
    ViSConfig,
    distance_term,
    sqrt_series,
    vis,
    vis_fov,
)

CFG = ViSConfig()


def test_criterion_01_moments_vs_monte_carlo(verdict):
    t0 = time.perf_counter()
    worst, failed = 0.0, []
    for params in PARAM_SETS:
        model = PositionModel(*params)
        for j, dt in enumerate((1 / 6, 0.5, 1.0)):
            for r in mc_moments(model, dt, 4, 10**6, seed=100 + j, rel_tol=0.03):
                worst = max(worst, abs(r.analytic - r.mc_estimate) / r.analytic)
                if not r.verdict:
                    failed.append((params, dt, r.quantity))
    elapsed = time.perf_counter() - t0
    verdict(1, not failed and elapsed <= 120,
            f"36 moments within 3% + 3 sigma of MC(1e6); worst rel gap {worst:.4f}; {elapsed:.1f} s")


def test_criterion_02_flight_probability(verdict):
    gaps = []
    for j, params in enumerate(PARAM_SETS):
        model = PositionModel(*params)
        p = p_flight(model)
        gaps.append(abs(flight_time_fraction(model, 10**6, seed=200 + j) - p) / p)
    exact = p_flight(PositionModel(0.7, 0.7, 0.0, 1.4))
    verdict(2, max(gaps) <= 0.005 and exact == 0.5,
            f"worst rel gap {max(gaps):.5f} (<= 0.005); symmetric case {exact!r}")


def test_criterion_03_special_function(verdict):
    errs = []
    for z in np.linspace(-10, 10, 21):
        errs.append(abs(hyp1f1(3, 3, z) / math.exp(z) - 1))
        if z != 0:
            errs.append(abs(hyp1f1(1, 2, z) / (math.expm1(z) / z) - 1))
    rng = np.random.default_rng(300)
    kummer = []
    for _ in range(100):
        a = int(rng.integers(1, 10))
        b = a + int(rng.integers(1, 15))
        z = float(rng.uniform(0, 20))
        kummer.append(abs(hyp1f1(a, b, -z) * math.exp(z) / hyp1f1(b - a, b, z) - 1))
    verdict(3, max(errs) <= 1e-12 and max(kummer) <= 1e-10,
            f"identities {max(errs):.1e} (<= 1e-12); Kummer on 100 points {max(kummer):.1e} (<= 1e-10)")


def _head_fraction(table) -> np.ndarray:
    pn, p = table.per_n_terms, table.p_flight
    c1 = pn["case1_A"][:, :3].sum(1) + pn["case1_B"][:, :3].sum(1)
    c2 = pn["case2_A"][:, :3].sum(1) + pn["case2_B"][:, :3].sum(1)
    return ((1 - p) * c1 + p * c2) / table.m[1:]


def test_criterion_04_two_flight_truncation(verdict):
    """Asserted for the reference walk; the other criterion-1 sets are reported."""
    grid = np.linspace(0.01, 0.99, 99)
    ref = min(_head_fraction(moments(PositionModel(*PARAM_SETS[0]), dt, k_max=4)).min() for dt in grid)
    other = []
    for params in PARAM_SETS[1:]:
        fr = [(_head_fraction(moments(PositionModel(*params), dt, k_max=4)).min(), dt) for dt in grid]
        below = [dt for f, dt in fr if f < 0.98]
        other.append(f"{params[:3]}: min {min(fr)[0]:.4f}"
                     + (f", below 98% from dt={min(below):.2f} s" if below else ""))
    verdict(4, ref >= 0.98, f"reference walk, dt in (0, 1) s, k <= 4: n <= 2 share >= {ref:.4f} "
                            f"[not asserted: " + "; ".join(other) + "]")


def test_criterion_05_fov_closed_form(verdict, orientation):
    from scipy import integrate
    w = CFG.w_deg
    errs = {}
    for regime, frames in (("laplace", 10), ("laplace", 60), ("mixed", 200), ("mixed", 500), ("uniform", 2000)):
        dt = frames * FRAME
        _, pf_phi, pf_theta = vis_fov(orientation, dt, CFG)
        q_phi = 2 / w * integrate.quad(lambda x: x * pdf_delta_phi(orientation, dt, x), 0, w,
                                       points=[0.0], limit=500, epsabs=1e-14, epsrel=1e-13)[0]
        b = orientation.delta_theta_scale(dt)
        q_theta = 2 / w * integrate.quad(lambda x: x * math.exp(-x / b) / (2 * b), 0, w,
                                         epsabs=1e-14, epsrel=1e-13)[0]
        errs[regime] = max(errs.get(regime, 0.0), abs(pf_phi - q_phi), abs(pf_theta - q_theta))
        if regime == "uniform":
            uniform = pf_phi
    ok = max(errs.values()) <= 1e-8 and uniform == 0.25
    verdict(5, ok, "quadrature gaps " + ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
            + f" (<= 1e-8); uniform p_f_phi = {uniform!r}")


def test_criterion_06_distance_term(verdict, position):
    fails, worst_ext = [], 0.0
    for j, dt in enumerate((1 / 6, 0.25, 0.5)):
        for d in (10.0, 20.0, 50.0):
            r = mc_vis_dst(position, dt, d, n_samples=10**6, seed=600 + j)
            if not r.verdict:
                fails.append((dt, d))
        term = distance_term(position, dt, CFG)
        m40 = moments(position, dt, k_max=40).m
        psi = displacement_sample(position, dt, 200_000, seed=650 + j)
        ext = np.concatenate([m40, [np.mean(psi ** k) for k in range(41, 61)]])
        worst_ext = max(worst_ext, abs(sqrt_series(ext, term.epsilon, 60)[0] - term.series))
    verdict(6, not fails and worst_ext < 1e-9,
            f"9 grid points within max(1%, err_bound) + 3 sigma of MC(1e6); "
            f"60-term extension moves the series by {worst_ext:.1e} (< 1e-9)")


def test_criterion_07_curve_shape(verdict, orientation, position):
    dts = [n * FRAME for n in range(1, 31)]
    ds = np.linspace(5, 50, 91)
    tab = np.array([[vis(orientation, position, dt, d, CFG).vis for d in ds] for dt in dts])
    in_dt = bool(np.all(np.diff(tab, axis=0) <= 0))
    in_d = bool(np.all(np.diff(tab, axis=1) >= 0))
    far = max(abs(vis(orientation, position, dt, 1e4, CFG).vis - vis_fov(orientation, dt, CFG)[0])
              for dt in dts)
    verdict(7, in_dt and in_d and far <= 1e-3,
            f"dt 1..30 frames x d 5..50 m: non-increasing in dt {in_dt}, non-decreasing in d {in_d}; "
            f"|ViS - ViS_fov| at 1e4 m {far:.1e}")


def test_criterion_08_latency(verdict, orientation, position):
    vis(orientation, position, 0.2, 20.0, CFG)
    times = []
    for dt in (0.11, 0.21, 0.31):
        distance_term.cache_clear()
        t0 = time.perf_counter()
        vis(orientation, position, dt, 20.0, CFG)
        times.append(time.perf_counter() - t0)
    verdict(8, max(times) <= 0.05, f"cold vis() call {1e3 * max(times):.1f} ms (<= 50 ms)")


def test_criterion_09_split_plan(verdict, models):
    split = SplitConfig(fps=60.0, vis_tr=0.945, cfg=ViSConfig(d_fp=50.0))
    p = plan(models, 10**3, split)
    grid = split.d_grid()

    def oracle(dt):
        # one independent vis() call per grid point, not the planner's grid helper
        v = np.array([vis(models.orientation, models.position, dt, float(d), split.cfg).vis for d in grid])
        ok = [d for i, d in enumerate(grid) if np.all(v[i:] >= 0.945)]
        return min(ok) if ok else 50.0

    cache = {}
    match = all(r.d_tr == cache.setdefault(r.dt, oracle(r.dt)) for r in p.records if r.role == "novel")
    refs = all(r.d_tr is None for r in p.records if r.role == "reference")
    table = threshold_table(models, p.R, split)
    t0 = time.perf_counter()
    big = plan(models, 10**4, SplitConfig(R=p.R), table=table)
    elapsed = time.perf_counter() - t0
    verdict(9, match and refs and len(big) == 10**4 and elapsed <= 1.0,
            f"R={p.R}; exhaustive scan matches {match}; references all-foreground {refs}; "
            f"1e4 frames in {elapsed * 1e3:.0f} ms")


def test_criterion_10_fit_round_trip(verdict):
    truth = PositionModel(0.5, 1.0, 0.3, 1.4)
    orient = desktop_orientation_model()
    syn = synthesize_trace(truth, orient, 3600.0, seed=2024)
    pos = fit_position_model(extract_flights(syn.trajectory)).model
    lags = [1, 5, 10, 15, 20, 25, 30, 60]
    of = fit_orientation_model(syn.trajectory, [round(n * FRAME, 9) for n in lags], workers=4)
    proc = syn.orientation
    scale_err = {"theta": abs(of.theta_report.params["scale"] / proc.theta_scale - 1)}
    for dt, r in of.delta_theta_reports.items():
        if dt <= 30 * FRAME + 1e-9:
            scale_err[f"dtheta@{round(dt * 60)}"] = abs(r.params["scale"] / proc.delta_theta_scale(dt) - 1)
    for n in (10, 60):
        dt = round(n * FRAME, 9)
        lap = next(r for r in of.delta_phi_reports[dt] if r.family == "laplace")
        declared = orient.azimuth.laplace[n * FRAME].scale
        scale_err[f"dphi@{n}"] = abs(lap.params["scale"] / declared - 1)
    dts = [n * FRAME for n in (10, 60, 100, 200, 300, 500, 1000, 2000)]
    samples = regime_samples(orient, dts, 50_000, seed=7)
    b1, b2 = detect_regimes(dts, {dt: fit_delta_phi(x) for dt, x in samples.items()})
    ok = (abs(pos.mu / truth.mu - 1) <= 0.10 and abs(pos.lam / truth.lam - 1) <= 0.10
          and abs(pos.c - truth.c) <= 0.05 and max(scale_err.values()) <= 0.05
          and b1 is not None and b2 is not None and b1 < b2)
    worst = max(scale_err, key=scale_err.get)
    verdict(10, ok, f"mu {pos.mu:.3f}, lambda {pos.lam:.3f}, c {pos.c:.3f}; worst Laplace scale "
                    f"{worst} {scale_err[worst]:.3f}; beta1 {b1 * 60:.0f} < beta2 {b2 * 60:.0f} frames")


def _cli(*args, cwd):
    res = subprocess.run([sys.executable, "-m", "vispose", *args], cwd=cwd, capture_output=True)
    return res.returncode, res.stdout


def test_criterion_11_cli_determinism(verdict, tmp_path):
    runs = {}
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        out = {}
        out["simulate"] = _cli("simulate", "--duration", "600", "--seed", "11", "-o", "trace.csv", cwd=d)
        out["fit"] = _cli("fit", "--trace", "trace.csv", "--lags", "1,10,60", "--seed", "3",
                          "-o", "model.json", cwd=d)
        out["moments"] = _cli("moments", "--model", "model.json", "--dt", "0.1,0.5", "--k-max", "6", cwd=d)
        out["vis"] = _cli("vis", "--model", "model.json", "--dt", "0.1,0.25", "--d-grid", "5:50:5", cwd=d)
        out["split"] = _cli("split", "--model", "model.json", "--frames", "300", "--summary", "summary.json",
                            "-o", "plan.csv", cwd=d)
        out["verify"] = _cli("verify", "--seed", "4", "--n-moments", "50000", "--n-vis", "50000", cwd=d)
        files = {f: (d / f).read_bytes() for f in ("trace.csv", "model.json", "plan.csv", "summary.json")}
        runs[name] = (out, files)
    codes = {k: v[0] for k, v in runs["a"][0].items()}
    same = runs["a"] == runs["b"]
    verdict(11, same and all(c == 0 for c in codes.values()),
            f"simulate, fit, moments, vis, split, verify: exit codes {sorted(set(codes.values()))}, "
            f"stdout and files byte-identical {same}")
