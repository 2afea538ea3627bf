"""Visibility similarity between a reference frame and a later novel frame.

ViS(d) = ViS_fov * ViS_dst(d). The FoV factor is the expected overlap of the
polar and azimuth viewing ranges; the distance factor is the expected squared
ratio of novel-to-reference viewing distance for content at distance d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import log_expit

from .mobility import PositionModel
from .moments import MomentTable, mgf_from_table, moments
from .pose_model import HALF_TURN, OrientationModel
from .special import ConvergenceError

SQRT_PI = math.sqrt(math.pi)
MAX_EPS_DOUBLINGS = 8


@dataclass(frozen=True)
class ViSConfig:
    w_fv: float = math.pi / 2
    d_fp: float = 50.0
    epsilon: float | None = None  # None: auto, v * dt
    series_terms: int = 30
    mgf_terms: int = 20
    variant: str = "planar"

    def __post_init__(self):
        if not 0 < self.w_fv < math.pi:
            raise ValueError(f"angle of view must lie in (0, pi), got {self.w_fv!r}")
        if not self.d_fp > 0:
            raise ValueError("far plane must be > 0")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.series_terms < 1 or self.mgf_terms < 1:
            raise ValueError("term counts must be >= 1")

    @property
    def w_deg(self) -> float:
        return math.degrees(self.w_fv)


@dataclass(frozen=True)
class ViSPoint:
    d: float
    vis_fov: float
    vis_dst: float
    vis: float
    err_bound: float


@dataclass(frozen=True)
class ViSCurve:
    dt: float
    points: tuple[ViSPoint, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


# --------------------------------------------------------------------------
# FoV term
# --------------------------------------------------------------------------

def laplace_far_fraction(b: float, w: float) -> float:
    """(2/w) * integral_0^w x Laplace(0, b)(x) dx, in any one angle unit."""
    return (b - math.exp(-w / b) * (b + w)) / w


def _log_softplus(a: float) -> float:
    # log(log(1 + e^a)) without underflow for very negative a
    if a < -30.0:
        return a + math.log1p(-0.5 * math.exp(a))
    return math.log(float(np.logaddexp(0.0, a)))


def _log_softplus_gap(hi: float, lo: float) -> float:
    # log(softplus(hi) - softplus(lo)) for hi > lo
    l_hi, l_lo = _log_softplus(hi), _log_softplus(lo)
    return l_hi + math.log(-math.expm1(l_lo - l_hi))


def _logistic_first_moment_ratio(mean: float, b: float, w: float) -> float:
    """integral_0^w x f(x) dx / integral_0^180 f(x) dx for a logistic density f.

    Both integrals are scaled by the survival value at 0 (mean below the
    interval) or the CDF value at 180 (otherwise) before they are formed, so
    the ratio stays finite when the logistic puts almost no mass on [0, 180].
    """
    if mean < 0.5 * HALF_TURN:
        # integral = int_0^w S(y) dy - w S(w)
        g0 = float(log_expit(mean / b))
        g_w = float(log_expit((mean - w) / b))
        g_end = float(log_expit((mean - HALF_TURN) / b))
        log_int = math.log(b) + _log_softplus_gap(mean / b, (mean - w) / b)
        num = math.exp(log_int - g0) - w * math.exp(g_w - g0)
        den = -math.expm1(g_end - g0)
    else:
        # integral = w F(w) - int_0^w F(y) dy
        g_end = float(log_expit((HALF_TURN - mean) / b))
        g0 = float(log_expit(-mean / b))
        g_w = float(log_expit((w - mean) / b))
        log_int = math.log(b) + _log_softplus_gap((w - mean) / b, -mean / b)
        num = w * math.exp(g_w - g_end) - math.exp(log_int - g_end)
        den = -math.expm1(g0 - g_end)
    return num / den


def p_far_phi(orientation: OrientationModel, dt: float, w_deg: float) -> float:
    """(2/w) * integral_0^w x p(x) dx for the azimuth-change density at ``dt``."""
    regime = orientation.regime(dt)
    if regime == "uniform":
        return w_deg / (2 * HALF_TURN)
    if regime == "laplace":
        b = orientation.azimuth_laplace(dt).scale
        return laplace_far_fraction(b, w_deg) / -math.expm1(-HALF_TURN / b)
    p = orientation.azimuth_mixed(dt)
    lap = laplace_far_fraction(p.b_l, w_deg) / -math.expm1(-HALF_TURN / p.b_l)
    lo = _logistic_first_moment_ratio(p.mu_lo, p.b_lo, w_deg) / w_deg
    return p.p_l * lap + (1.0 - p.p_l) * lo


def vis_fov(orientation: OrientationModel, dt: float, cfg: ViSConfig = ViSConfig()):
    """Return (ViS_fov, p_f_phi, p_f_theta)."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    w = cfg.w_deg
    if orientation.regime(dt) == "uniform":
        # exact in radians: w / (2 pi)
        pf_phi = cfg.w_fv / (2 * math.pi)
    else:
        pf_phi = p_far_phi(orientation, dt, w)
    pf_theta = laplace_far_fraction(orientation.delta_theta_scale(dt), w)
    value = (1.0 - pf_theta) * (1.0 - pf_phi)
    return value, pf_phi, pf_theta


# --------------------------------------------------------------------------
# distance term
# --------------------------------------------------------------------------

def auto_epsilon(position: PositionModel, dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    return position.v * dt


def sqrt_series(m: np.ndarray, eps: float, terms: int) -> tuple[float, float, float]:
    """sum_{i<terms} (-1)^i eps^-(2i+1) m(i+1) / ((i + 1/2) i!).

    Returns (sum, last term magnitude, largest term magnitude). Terms are
    formed in log magnitude and added with an exactly rounded sum.
    """
    if m.size < terms + 1:
        raise ValueError(f"need moments up to k={terms}")
    i = np.arange(terms)
    mi = m[1: terms + 1]
    if np.all(mi == 0):
        return 0.0, 0.0, 0.0
    with np.errstate(divide="ignore"):
        logmag = (np.log(mi) - (2 * i + 1) * math.log(eps)
                  - np.log(i + 0.5) - np.array([math.lgamma(j + 1) for j in i]))
    mags = np.exp(logmag)
    signs = np.where(i % 2 == 1, -1.0, 1.0)
    return math.fsum(signs * mags), float(mags[-1]), float(mags.max())


@dataclass(frozen=True)
class DistanceTerm:
    """d-independent pieces of ViS_dst for one (position model, dt, config)."""
    dt: float
    m1: float
    series: float
    epsilon: float
    mgf_value: float
    table: MomentTable

    def _kappa(self, d: float, w: float) -> float:
        return 4.0 * math.sin(w / 2) / (w * d * SQRT_PI)

    def at(self, d: float, w: float) -> tuple[float, float]:
        if not (math.isfinite(d) and d > 0):
            raise ValueError(f"distance must be finite and > 0, got {d!r}")
        kappa = self._kappa(d, w)
        value = 1.0 + self.m1 / d ** 2 - kappa * self.series
        err = min(kappa * self.epsilon * self.mgf_value, kappa * self.epsilon)
        return value, err


@lru_cache(maxsize=1024)
def distance_term(position: PositionModel, dt: float, cfg: ViSConfig = ViSConfig()) -> DistanceTerm:
    """Moments, series and MGF bound for the distance factor.

    If the alternating series has not settled by ``series_terms`` the split
    point is doubled and the series recomputed; the bound grows but stays valid.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    k_max = max(cfg.series_terms + 1, cfg.mgf_terms)
    if k_max > 40:
        raise ValueError("series_terms + 1 and mgf_terms must not exceed 40")
    table = moments(position, dt, k_max=k_max, variant=cfg.variant)
    eps = cfg.epsilon if cfg.epsilon is not None else auto_epsilon(position, dt)
    for _ in range(MAX_EPS_DOUBLINGS + 1):
        total, last, peak = sqrt_series(table.m, eps, cfg.series_terms)
        if peak == 0 or last <= 1e-13 * peak:
            break
        eps *= 2.0
    else:
        raise ConvergenceError(
            f"distance series did not settle within {cfg.series_terms} terms; use a larger epsilon")
    mgf_val = mgf_from_table(table, -1.0 / eps ** 2, cfg.mgf_terms).value
    return DistanceTerm(dt, float(table.m[1]), total, eps, mgf_val, table)


def vis_dst(position: PositionModel, dt: float, d: float, cfg: ViSConfig = ViSConfig()):
    """Return (ViS_dst(d), err_bound)."""
    return distance_term(position, dt, cfg).at(d, cfg.w_fv)


# --------------------------------------------------------------------------
# combined
# --------------------------------------------------------------------------

def vis(orientation: OrientationModel, position: PositionModel, dt: float, d: float,
        cfg: ViSConfig = ViSConfig()) -> ViSPoint:
    fov, _, _ = vis_fov(orientation, dt, cfg)
    dst, err = vis_dst(position, dt, d, cfg)
    return ViSPoint(d, fov, dst, fov * dst, fov * err)


def vis_curve(orientation: OrientationModel, position: PositionModel, dt: float,
              d_grid, cfg: ViSConfig = ViSConfig()) -> ViSCurve:
    fov, _, _ = vis_fov(orientation, dt, cfg)
    term = distance_term(position, dt, cfg)
    pts = []
    for d in d_grid:
        dst, err = term.at(float(d), cfg.w_fv)
        pts.append(ViSPoint(float(d), fov, dst, fov * dst, fov * err))
    return ViSCurve(dt, tuple(pts))
