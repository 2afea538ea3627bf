"""Histogram-SSE distribution fitting for pose traces.

Every fit compares the empirical density of a fixed histogram with the
bin-averaged density of a candidate family (CDF differences over each bin)
and minimizes the sum of squared differences by multi-start Nelder-Mead.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .flights import DEFAULT_TURN_THRESHOLD, FlightExtraction
from .mobility import PositionModel
from .pose_model import (
    HALF_TURN,
    AzimuthRegimes,
    LaplaceParams,
    MixedLogisticLaplaceParams,
    OrientationModel,
    Trajectory,
    delta_phi_wrap,
    laplace_cdf,
    logistic_cdf,
    mixed_cdf,
)

FAMILIES = ("laplace", "logistic", "normal", "uniform", "exponential",
            "mixed_logistic_laplace", "exp_plus_dirac")
N_RESTARTS = 20
DURATION_BIN = 0.25
ANGLE_BIN = 1.0
MAX_ANGLE_SCALE = HALF_TURN
MAX_LOGISTIC_MEAN = 20.0


class InsufficientDataError(ValueError):
    pass


class FitWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# histograms and family CDFs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BinSpec:
    lo: float
    hi: float
    width: float

    @property
    def edges(self) -> np.ndarray:
        n = max(int(round((self.hi - self.lo) / self.width)), 1)
        return self.lo + self.width * np.arange(n + 1)


@dataclass(frozen=True, eq=False)
class Histogram:
    bins: BinSpec
    density: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, x, bins: BinSpec) -> "Histogram":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            raise InsufficientDataError("no samples to histogram")
        edges = bins.edges
        counts, _ = np.histogram(x, bins=edges)
        # right edge of the last bin is closed in numpy; match the half-open
        # [lo, hi) convention used for azimuths by dropping exact hi hits
        if bins.hi == HALF_TURN and bins.lo == -HALF_TURN:
            counts[-1] -= int(np.sum(x == edges[-1]))
        return cls(bins, counts / (x.size * np.diff(edges)), int(x.size))

    @property
    def counts(self) -> np.ndarray:
        return np.rint(self.density * self.n * np.diff(self.bins.edges))


def family_cdf(family: str, params: dict, x):
    x = np.asarray(x, dtype=float)
    if family == "laplace":
        return laplace_cdf(x, params["mean"], params["scale"])
    if family == "uniform":
        lo, hi = params["lo"], params["hi"]
        return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    if family == "exponential":
        return np.where(x <= 0, 0.0, -np.expm1(-params["rate"] * np.maximum(x, 0.0)))
    if family == "exp_plus_dirac":
        c, lam = params["c"], params["rate"]
        return np.where(x < 0, 0.0, c + (1 - c) * -np.expm1(-lam * np.maximum(x, 0.0)))
    if family == "mixed_logistic_laplace":
        return mixed_cdf(x, MixedLogisticLaplaceParams(**params))
    if family == "logistic":
        return logistic_cdf(x, params["mean"], params["scale"])
    if family == "normal":
        from scipy.special import ndtr
        return ndtr((x - params["mean"]) / params["scale"])
    raise ValueError(f"unknown family {family!r}")


def model_density(family: str, params: dict, bins: BinSpec, support=None) -> np.ndarray:
    """Bin-averaged density; ``support`` renormalizes to a truncation interval."""
    edges = bins.edges
    F = family_cdf(family, params, edges)
    mass = np.diff(F)
    if support is not None:
        lo, hi = support
        Fs = family_cdf(family, params, np.array([lo, hi]))
        mass = mass / (Fs[1] - Fs[0])
    return mass / np.diff(edges)


def sse(hist: Histogram, family: str, params: dict, support=None) -> float:
    diff = hist.density - model_density(family, params, hist.bins, support)
    return float(np.dot(diff, diff))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

N_PARAMS = {"laplace": 2, "logistic": 2, "normal": 2, "uniform": 0, "exponential": 1,
            "mixed_logistic_laplace": 5, "exp_plus_dirac": 2}


@dataclass(frozen=True)
class FitReport:
    """One family fitted to one histogram.

    Parameters minimize ``sse``. ``score`` is a BIC on the binned counts,
    -2 log L + free_params * log(n) with L the multinomial likelihood of the
    histogram, maximized by one local search from the SSE optimum. It picks
    the winner among nested families, which raw SSE cannot: the larger
    family never loses on SSE.
    """
    family: str
    params: dict
    sse: float
    bins: BinSpec
    n_params: int = 0
    score: float = math.nan
    support: tuple[float, float] | None = None
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.sse >= 0:
            raise ValueError("sse must be >= 0")

    def to_dict(self) -> dict:
        return {
            "family": self.family, "params": dict(self.params), "sse": self.sse,
            "bins": {"lo": self.bins.lo, "hi": self.bins.hi, "width": self.bins.width},
            "n_params": self.n_params, "score": self.score, "label": self.label,
        }


def _loglik(hist: Histogram, family: str, params: dict, support=None) -> float:
    mass = model_density(family, params, hist.bins, support) * np.diff(hist.bins.edges)
    counts = hist.counts
    used = counts > 0
    # a bin with data but no model mass costs as much as a 1e-300 probability
    return float(np.dot(counts[used], np.log(np.maximum(mass[used], 1e-300))))


def _score(hist: Histogram, family: str, params: dict, k: int, support=None, refine=None) -> float:
    ll = _loglik(hist, family, params, support)
    if refine is not None:
        to_params, u0 = refine
        res = minimize(lambda u: -_loglik(hist, family, to_params(u), support), u0,
                       method="Nelder-Mead", options={"xatol": 1e-7, "fatol": 1e-6, "maxiter": 2000})
        ll = max(ll, -float(res.fun))
    return -2.0 * ll + k * math.log(max(hist.n, 1))


def make_report(hist: Histogram, family: str, params: dict, free: int,
                support=None, label: str = "", refine=None) -> FitReport:
    """``refine`` = (unconstrained -> params map, SSE optimum) for the score's likelihood search."""
    value = sse(hist, family, params, support)
    return FitReport(family, dict(params), value, hist.bins, free,
                     _score(hist, family, params, free, support, refine), support, label)


def recompute_sse(report: FitReport, hist: Histogram) -> float:
    return sse(hist, report.family, report.params, report.support)


def select(reports: list[FitReport]) -> FitReport:
    """Lowest score wins; ties go to the family with fewer parameters."""
    return min(reports, key=lambda r: (r.score, r.n_params))


def _multistart(objective, starts: list[np.ndarray], seed: int = 0, n_restarts: int = N_RESTARTS):
    """Nelder-Mead from the seeded starts plus jittered copies; best result wins."""
    rng = np.random.default_rng(seed)
    best = None
    pool = list(starts)
    while len(pool) < n_restarts:
        base = starts[len(pool) % len(starts)]
        # starts live in unconstrained coordinates, so the jitter is additive
        pool.append(base + rng.normal(0.0, 0.5, base.size))
    for x0 in pool:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-15, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    return best.x


# --------------------------------------------------------------------------
# orientation families
# --------------------------------------------------------------------------

def _log_param(lo: float, hi: float):
    # map an unconstrained value into (lo, hi)
    def to(u):
        return lo + (hi - lo) / (1 + math.exp(-min(max(u, -700.0), 700.0)))

    def back(v):
        v = min(max(v, lo + 1e-12 * (hi - lo)), hi - 1e-12 * (hi - lo))
        return math.log((v - lo) / (hi - v))
    return to, back


_scale_to, _scale_back = _log_param(1e-4, MAX_ANGLE_SCALE)
_p_to, _p_back = _log_param(0.0, 1.0)
_mean_to, _mean_back = _log_param(-MAX_LOGISTIC_MEAN, MAX_LOGISTIC_MEAN)


def fit_laplace(hist: Histogram, x=None, zero_mean: bool = False, support=None,
                seed: int = 0, label: str = "") -> FitReport:
    x = None if x is None else np.asarray(x, dtype=float)
    med = 0.0 if zero_mean or x is None else float(np.median(x))
    b0 = float(np.mean(np.abs(x - med))) if x is not None else hist.bins.width
    b0 = min(max(b0, 1e-3), MAX_ANGLE_SCALE / 2)

    if zero_mean:
        def params(u):
            return {"mean": 0.0, "scale": _scale_to(u[0])}
        starts = [np.array([_scale_back(b0)])]
    else:
        def params(u):
            return {"mean": float(u[0]), "scale": _scale_to(u[1])}
        starts = [np.array([med, _scale_back(b0)])]

    def objective(u):
        return sse(hist, "laplace", params(u), support)

    best = _multistart(objective, starts, seed)
    return make_report(hist, "laplace", params(best), 1 if zero_mean else 2, support, label,
                       refine=(params, best))


def fit_uniform(hist: Histogram, label: str = "") -> FitReport:
    p = {"lo": hist.bins.lo, "hi": hist.bins.hi}
    return make_report(hist, "uniform", p, 0, None, label)


def _mixed_params(u) -> dict:
    return {"mu_lo": _mean_to(u[0]), "b_lo": _scale_to(u[1]), "mu_l": 0.0,
            "b_l": _scale_to(u[2]), "p_l": _p_to(u[3])}


def fit_mixed(hist: Histogram, x=None, seed: int = 0, label: str = "") -> FitReport:
    """Logistic + Laplace on [-180, 180].

    The Laplace mean only rescales the printed component, which is normalized
    away, so it is held at 0 and not counted as a free parameter.
    """
    x = None if x is None else np.abs(np.asarray(x, dtype=float))
    spread = float(np.mean(x)) if x is not None and x.size else 30.0
    narrow = float(np.percentile(x, 10)) if x is not None and x.size else 1.0
    starts = []
    for p_l in (0.1, 0.3, 0.6):
        for b_lo in (max(spread, 1.0) * 0.6, max(spread, 1.0) * 1.5):
            starts.append(np.array([_mean_back(0.0), _scale_back(min(b_lo, 170.0)),
                                    _scale_back(max(narrow, 0.05)), _p_back(p_l)]))

    def objective(u):
        return sse(hist, "mixed_logistic_laplace", _mixed_params(u))

    best = _multistart(objective, starts, seed)
    return make_report(hist, "mixed_logistic_laplace", _mixed_params(best), 4, None, label,
                       refine=(_mixed_params, best))


def fit_exponential(hist: Histogram, x, seed: int = 0, label: str = "",
                    cutoff: float = 0.0) -> FitReport:
    """Rate fit; with ``cutoff`` > 0 only the bins above it are matched.

    The exponential is memoryless, so the excess over the cutoff has the same
    rate and dropping short samples does not bias the estimate.
    """
    x = np.asarray(x, dtype=float)
    # first bin edge at or above the cutoff
    lo = hist.bins.lo + hist.bins.width * max(math.ceil((cutoff - hist.bins.lo) / hist.bins.width - 1e-9), 0)
    edges = hist.bins.edges
    keep = edges[:-1] >= lo - 1e-12
    tail = x[x >= lo]
    if keep.sum() < 2 or tail.size < 10:
        raise InsufficientDataError("too few samples above the cutoff")
    tail_density = np.histogram(tail, edges[np.r_[keep, True]])[0] / (tail.size * hist.bins.width)
    r0 = 1.0 / max(float(np.mean(tail - lo)), 1e-9)
    cut_edges = edges[np.r_[keep, True]] - lo

    def params(u):
        return {"rate": math.exp(u[0])}

    def objective(u):
        F = -np.expm1(-math.exp(u[0]) * cut_edges)
        d = np.diff(F) / hist.bins.width - tail_density
        return float(np.dot(d, d))

    best = _multistart(objective, [np.array([math.log(r0)])], seed)
    return make_report(hist, "exponential", params(best), 1, None, label)


def _duration_bins(x, width: float = DURATION_BIN) -> BinSpec:
    hi = width * math.ceil((float(np.max(x)) + 1e-12) / width)
    return BinSpec(0.0, max(hi, width), width)


# --------------------------------------------------------------------------
# position model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PositionFit:
    model: PositionModel
    flight_report: FitReport
    pause_report: FitReport
    observed: dict = field(default_factory=dict)


def fit_pause_model(pauses, width: float = DURATION_BIN, seed: int = 0) -> FitReport:
    """Exponential plus a point mass at zero.

    The rate comes from the bins beyond the first, where the point mass does
    not reach; the mass is the first bin's excess over the exponential.
    """
    s = np.asarray(pauses, dtype=float)
    bins = _duration_bins(s, width)
    hist = Histogram.from_samples(s, bins)
    tail = s[s >= width]
    if tail.size < 10:
        raise InsufficientDataError("too few non-zero pauses to fit a rate")
    tail_bins = BinSpec(width, bins.hi, width) if bins.hi > width else BinSpec(width, 2 * width, width)
    tail_hist = Histogram.from_samples(tail, tail_bins)
    r0 = 1.0 / max(float(np.mean(tail - width)), 1e-9)

    def objective(u):
        lam = math.exp(u[0])
        # exponential conditioned on exceeding the first bin edge
        F = -np.expm1(-lam * (tail_bins.edges - width))
        d = np.diff(F) / np.diff(tail_bins.edges) - tail_hist.density
        return float(np.dot(d, d))

    lam = math.exp(_multistart(objective, [np.array([math.log(r0)])], seed)[0])
    F1 = -math.expm1(-lam * width)
    m0 = float(np.mean(s < width))
    c = min(max((m0 - F1) / (1 - F1), 0.0), 1.0 - 1e-9)
    return make_report(hist, "exp_plus_dirac", {"c": c, "rate": lam}, 2, None, "pause")


def fit_position_model(flights, pauses=None, turn_threshold: float | None = DEFAULT_TURN_THRESHOLD,
                       seed: int = 0, min_length: float = 0.0) -> PositionFit:
    """Fit (mu, lambda, c, v) from extracted flights and pauses.

    Zero pauses followed by a turn smaller than ``turn_threshold`` are not
    visible as flight boundaries: with uniform headings that happens with
    probability q = threshold / pi per zero pause. The observed zero-pause
    share and flight rate are corrected for that merging; pass
    ``turn_threshold=None`` to skip the correction. Flights shorter than
    ``min_length`` metres (dropped by the extractor) are handled by fitting
    the rate above the matching duration only.
    """
    if isinstance(flights, FlightExtraction):
        min_length = flights.min_flight_length
        pauses, turn_threshold, flights = flights.pauses, flights.turn_threshold, flights.flights
    flights = list(flights)
    if len(flights) < 100:
        raise InsufficientDataError(f"need at least 100 flights, got {len(flights)}")
    dur = np.array([f.duration for f in flights])
    length = np.array([f.length for f in flights])
    v = float(length.sum() / dur.sum())
    hist = Histogram.from_samples(dur, _duration_bins(dur))
    flight_rep = fit_exponential(hist, dur, seed, "flight", cutoff=min_length / v)
    pause_rep = fit_pause_model(pauses, seed=seed)
    mu_obs = flight_rep.params["rate"]
    c_obs = pause_rep.params["c"]
    lam = pause_rep.params["rate"]
    q = 0.0 if turn_threshold is None else turn_threshold / math.pi
    c = c_obs / (1 - q + q * c_obs)
    mu = mu_obs / (1 - c * q)
    model = PositionModel(mu=mu, lam=lam, c=min(c, 1 - 1e-9), v=v)
    return PositionFit(model, flight_rep, pause_rep,
                       {"mu_obs": mu_obs, "c_obs": c_obs, "merge_prob": q})


# --------------------------------------------------------------------------
# orientation model
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrientationFit:
    model: OrientationModel
    theta_report: FitReport
    delta_theta_reports: dict
    delta_phi_reports: dict  # dt -> list of candidate reports, winner first
    skipped: tuple = ()


def _lag_pairs(traj: Trajectory, dt: float, tol: float = 1e-6):
    """Index pairs (i, j) with t_j - t_i == dt, for a uniformly sampled trace."""
    step = float(np.median(np.diff(traj.t)))
    lag = int(round(dt / step))
    if lag < 1 or abs(lag * step - dt) > max(tol, 1e-3 * dt):
        raise ValueError(f"dt={dt} is not a multiple of the sample interval {step}")
    i = np.arange(len(traj) - lag)
    j = i + lag
    ok = np.abs((traj.t[j] - traj.t[i]) - dt) <= max(tol, 1e-3 * dt)
    return i[ok], j[ok]


def delta_theta_bins(d: np.ndarray) -> BinSpec:
    # 1 degree is far wider than the short-gap scales, so the width follows the data
    b0 = max(float(np.mean(np.abs(d))), 1e-4)
    width = min(ANGLE_BIN, b0 / 8)
    half = min(HALF_TURN, 25 * b0)
    n = max(int(math.ceil(half / width)), 1)
    return BinSpec(-n * width, n * width, width)


def fit_delta_phi(dphi_deg, seed: int = 0, label: str = "") -> list[FitReport]:
    """Laplace, mixed and uniform fits on 1-degree bins; winner first."""
    bins = BinSpec(-HALF_TURN, HALF_TURN, ANGLE_BIN)
    hist = Histogram.from_samples(dphi_deg, bins)
    reps = [
        fit_laplace(hist, dphi_deg, zero_mean=True, support=(-HALF_TURN, HALF_TURN),
                    seed=seed, label=label),
        fit_mixed(hist, dphi_deg, seed=seed, label=label),
        fit_uniform(hist, label=label),
    ]
    win = select(reps)
    return [win] + [r for r in reps if r is not win]


def detect_regimes(dts, reports: dict) -> tuple[float | None, float | None]:
    """beta1: first gap where mixed beats Laplace; beta2: first where uniform beats mixed."""
    beta1 = beta2 = None
    for dt in dts:
        by = {r.family: r for r in reports[dt]}
        if beta1 is None and by["mixed_logistic_laplace"].score < by["laplace"].score:
            beta1 = dt
        if beta1 is not None and beta2 is None and dt > beta1 \
                and by["uniform"].score <= by["mixed_logistic_laplace"].score:
            beta2 = dt
    return beta1, beta2


def fit_orientation_model(traj: Trajectory, dt_grid, seed: int = 0,
                          min_pairs: int = 1000, workers: int = 1) -> OrientationFit:
    """Laplace theta, per-gap Laplace polar changes and azimuth families.

    Gaps with fewer than ``min_pairs`` pose pairs are skipped with a warning.
    Per-gap fits run on ``workers`` threads; results do not depend on it.
    """
    theta_deg = np.degrees(traj.theta)
    th_hist = Histogram.from_samples(theta_deg, BinSpec(0.0, HALF_TURN, ANGLE_BIN))
    theta_rep = fit_laplace(th_hist, theta_deg, support=(0.0, HALF_TURN), seed=seed, label="theta")
    dts = sorted(float(d) for d in dt_grid)
    skipped = []
    pairs = {}
    for dt in dts:
        i, j = _lag_pairs(traj, dt)
        if i.size < min_pairs:
            warnings.warn(f"only {i.size} pose pairs at dt={dt}; gap skipped", FitWarning, stacklevel=2)
            skipped.append(dt)
            continue
        pairs[dt] = (i, j)

    def fit_gap(dt):
        i, j = pairs[dt]
        dth = theta_deg[j] - theta_deg[i]
        hist = Histogram.from_samples(dth, delta_theta_bins(dth))
        dth_rep = fit_laplace(hist, dth, zero_mean=True, seed=seed, label=f"dtheta@{dt:g}")
        dph = np.degrees(delta_phi_wrap(traj.phi[i], traj.phi[j]))
        return dth_rep, fit_delta_phi(dph, seed, f"dphi@{dt:g}")

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fit_gap, pairs))
    else:
        results = [fit_gap(dt) for dt in pairs]
    dth_reports: dict[float, FitReport] = {}
    dph_reports: dict[float, list[FitReport]] = {}
    for dt, (dth_rep, dph_reps) in zip(pairs, results):
        dth_reports[dt] = dth_rep
        dph_reports[dt] = dph_reps
    kept = [d for d in dts if d in dph_reports]
    if not kept:
        raise InsufficientDataError("no time gap had enough pose pairs")
    beta1, beta2 = detect_regimes(kept, dph_reports)
    top = kept[-1]
    if beta1 is None:
        beta1, beta2 = 2 * top, 4 * top
    elif beta2 is None:
        beta2 = 2 * top
    lap, mixed = {}, {}
    for dt in kept:
        by = {r.family: r for r in dph_reports[dt]}
        if dt < beta1:
            lap[dt] = LaplaceParams(0.0, by["laplace"].params["scale"])
        elif dt < beta2:
            mixed[dt] = MixedLogisticLaplaceParams(**by["mixed_logistic_laplace"].params)
    if not lap:
        # the switch came at the first gap; its Laplace fit still covers shorter gaps
        lap[kept[0]] = LaplaceParams(0.0, {r.family: r for r in dph_reports[kept[0]]}["laplace"].params["scale"])
    model = OrientationModel(
        theta_dist=LaplaceParams(theta_rep.params["mean"], theta_rep.params["scale"]),
        delta_theta_table={dt: r.params["scale"] for dt, r in dth_reports.items()},
        azimuth=AzimuthRegimes(beta1, beta2, lap, mixed),
    )
    return OrientationFit(model, theta_rep, dth_reports, dph_reports, tuple(skipped))
