"""Viewport orientation model: pose records, distribution families, samplers.

Angles inside pose records are radians. Every fitted distribution parameter
is kept in degrees, and the density/sampler functions here take and return
degrees as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit

from .rng import as_generator

HALF_TURN = 180.0


# --------------------------------------------------------------------------
# pose records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseSample:
    t: float
    x: float
    y: float
    z: float
    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"pose time must be finite and >= 0, got {self.t!r}")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"polar angle {self.theta!r} outside [0, pi]")
        if not -math.pi <= self.phi < math.pi:
            raise ValueError(f"azimuth {self.phi!r} outside [-pi, pi)")


class Trajectory:
    """Time-ordered viewport poses backed by numpy columns."""

    def __init__(self, t, x, y, z, theta, phi, source_tag: str = ""):
        cols = [np.asarray(c, dtype=float) for c in (t, x, y, z, theta, phi)]
        n = cols[0].shape[0]
        if n == 0:
            raise ValueError("trajectory is empty")
        if any(c.shape != (n,) for c in cols):
            raise ValueError("trajectory columns must be 1-D and equally long")
        if not np.all(np.isfinite(np.stack(cols))):
            raise ValueError("trajectory values must be finite")
        if cols[0][0] < 0 or not np.all(np.diff(cols[0]) > 0):
            raise ValueError("trajectory times must be non-negative and strictly increasing")
        if np.any(cols[4] < 0) or np.any(cols[4] > math.pi):
            raise ValueError("polar angles must lie in [0, pi]")
        if np.any(cols[5] < -math.pi) or np.any(cols[5] >= math.pi):
            raise ValueError("azimuth angles must lie in [-pi, pi)")
        self.t, self.x, self.y, self.z, self.theta, self.phi = cols
        self.source_tag = source_tag

    @classmethod
    def from_samples(cls, samples: Sequence[PoseSample], source_tag: str = "") -> "Trajectory":
        arr = np.array([[s.t, s.x, s.y, s.z, s.theta, s.phi] for s in samples], dtype=float)
        if arr.size == 0:
            raise ValueError("trajectory is empty")
        return cls(*arr.T, source_tag=source_tag)

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> PoseSample:
        return PoseSample(float(self.t[i]), float(self.x[i]), float(self.y[i]),
                          float(self.z[i]), float(self.theta[i]), float(self.phi[i]))

    @property
    def samples(self) -> list[PoseSample]:
        return [self[i] for i in range(len(self))]


# --------------------------------------------------------------------------
# parameter records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LaplaceParams:
    mean: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"Laplace scale must be > 0, got {self.scale!r}")


@dataclass(frozen=True)
class MixedLogisticLaplaceParams:
    mu_lo: float
    b_lo: float
    mu_l: float
    b_l: float
    p_l: float

    def __post_init__(self):
        if not (self.b_lo > 0 and self.b_l > 0):
            raise ValueError("mixed-distribution scales must be > 0")
        if not 0.0 <= self.p_l <= 1.0:
            raise ValueError(f"p_l must lie in [0, 1], got {self.p_l!r}")


@dataclass(frozen=True)
class AzimuthRegimes:
    """Δφ family per time gap: Laplace below beta1, mixed up to beta2, uniform after.

    ``laplace`` and ``mixed`` map a tabulated Δt (seconds) to parameters.
    """
    beta1: float
    beta2: float
    laplace: dict[float, LaplaceParams] = field(default_factory=dict)
    mixed: dict[float, MixedLogisticLaplaceParams] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.beta1 < self.beta2:
            raise ValueError(f"need 0 < beta1 < beta2, got {self.beta1}, {self.beta2}")


@dataclass(frozen=True)
class OrientationModel:
    theta_dist: LaplaceParams
    delta_theta_table: dict[float, float]
    azimuth: AzimuthRegimes

    def __post_init__(self):
        if not self.delta_theta_table:
            raise ValueError("delta-theta scale table is empty")
        if any(not s > 0 for s in self.delta_theta_table.values()):
            raise ValueError("every tabulated delta-theta scale must be > 0")

    def delta_theta_scale(self, dt: float) -> float:
        return _interp_table(self.delta_theta_table, dt)

    def regime(self, dt: float) -> str:
        if dt < self.azimuth.beta1:
            return "laplace"
        if dt < self.azimuth.beta2:
            return "mixed"
        return "uniform"

    def azimuth_laplace(self, dt: float) -> LaplaceParams:
        table = self.azimuth.laplace
        if not table:
            raise ValueError("model has no Laplace azimuth table")
        keys = sorted(table)
        mean = float(np.interp(dt, keys, [table[k].mean for k in keys]))
        scale = float(np.interp(dt, keys, [table[k].scale for k in keys]))
        return LaplaceParams(mean, scale)

    def azimuth_mixed(self, dt: float) -> MixedLogisticLaplaceParams:
        table = self.azimuth.mixed
        if not table:
            raise ValueError("model has no mixed azimuth table")
        keys = sorted(table)
        vals = {name: float(np.interp(dt, keys, [getattr(table[k], name) for k in keys]))
                for name in ("mu_lo", "b_lo", "mu_l", "b_l", "p_l")}
        return MixedLogisticLaplaceParams(**vals)


def _interp_table(table: dict[float, float], dt: float) -> float:
    keys = sorted(table)
    # np.interp clamps outside the tabulated range
    return float(np.interp(dt, keys, [table[k] for k in keys]))


# --------------------------------------------------------------------------
# azimuth wrap
# --------------------------------------------------------------------------

def delta_phi_wrap(phi_ref, phi_nov):
    """Signed azimuth change in [-pi, pi): -pi + mod(phi_nov - phi_ref + pi, 2 pi)."""
    ref = np.asarray(phi_ref, dtype=float)
    nov = np.asarray(phi_nov, dtype=float)
    if not (np.all(np.isfinite(ref)) and np.all(np.isfinite(nov))):
        raise ValueError("azimuth angles must be finite")
    a = nov - ref + math.pi
    b = 2.0 * math.pi
    out = -math.pi + (a - b * np.floor(a / b))
    # floating rounding can land exactly on +pi
    out = np.where(out >= math.pi, -math.pi, out)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# densities and CDFs (degrees)
# --------------------------------------------------------------------------

def laplace_pdf(x, mean, scale):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.abs(x - mean) / scale) / (2.0 * scale)


def laplace_cdf(x, mean, scale):
    x = np.asarray(x, dtype=float)
    u = (x - mean) / scale
    return np.where(u < 0, 0.5 * np.exp(np.minimum(u, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(u, 0.0)))


def logistic_pdf(x, mean, scale):
    u = -np.abs((np.asarray(x, dtype=float) - mean) / scale)
    e = np.exp(u)
    return e / (scale * (1.0 + e) ** 2)


def logistic_cdf(x, mean, scale):
    return expit((np.asarray(x, dtype=float) - mean) / scale)


def _logistic_log_pdf(x, mean, scale):
    u = (np.asarray(x, dtype=float) - mean) / scale
    return log_expit(u) + log_expit(-u) - math.log(scale)


def logistic_log_mass(a, b, mean, scale):
    """log P(a <= X <= b) for a logistic X, vectorised over ``a`` and ``b``.

    The difference is taken between survival values when the mean sits below
    the interval midpoint and between CDF values otherwise, so a mass of
    1e-30 comes out as 1e-30 instead of a cancelled zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ua, ub = (a - mean) / scale, (b - mean) / scale
    with np.errstate(divide="ignore"):
        sa, sb = log_expit(-ua), log_expit(-ub)
        fa, fb = log_expit(ua), log_expit(ub)
        lower = sa + np.log(-np.expm1(np.minimum(sb - sa, 0.0)))
        upper = fb + np.log(-np.expm1(np.minimum(fa - fb, 0.0)))
    out = np.where(mean < 0.5 * (a + b), lower, upper)
    return float(out) if out.ndim == 0 else out


def _truncated_laplace_mass(scale: float) -> float:
    return -math.expm1(-HALF_TURN / scale)


def _logistic_log_half_mass(mean: float, scale: float) -> float:
    # log mass of the logistic density on [0, 180]
    return logistic_log_mass(0.0, HALF_TURN, mean, scale)


def mixed_printed_masses(p: MixedLogisticLaplaceParams) -> tuple[float, float]:
    """Mass over [-180, 180] of each mixture component with its printed normalizer.

    The Laplace part is exp(-(|x| - mu_l)/b_l) / (2 b_l (1 - exp(-(180 - mu_l)/b_l)))
    and the logistic part uses 2/(1 + exp(-(180 - mu_lo)/b_lo)) - 1. Neither
    reaches unit mass unless its mean is zero.
    """
    lap_norm = -math.expm1(-(HALF_TURN - p.mu_l) / p.b_l)
    lap = math.exp(p.mu_l / p.b_l) * _truncated_laplace_mass(p.b_l) / lap_norm
    lo_norm = 2.0 / (1.0 + math.exp(-(HALF_TURN - p.mu_lo) / p.b_lo)) - 1.0
    lo = 2.0 * math.exp(_logistic_log_half_mass(p.mu_lo, p.b_lo)) / lo_norm
    return lap, lo


def mixed_pdf(x, p: MixedLogisticLaplaceParams):
    """Mixed logistic + Laplace density of the azimuth change, degrees.

    Both components are symmetric in |x| and restricted to [-180, 180]. Each is
    rescaled to unit mass so ``p_l`` is exactly the Laplace fraction; for the
    Laplace part this makes ``mu_l`` drop out, since it only enters the
    printed form as a constant factor.
    """
    r = np.abs(np.asarray(x, dtype=float))
    lap = np.exp(-r / p.b_l) / (2.0 * p.b_l * _truncated_laplace_mass(p.b_l))
    lo = 0.5 * np.exp(_logistic_log_pdf(r, p.mu_lo, p.b_lo) - _logistic_log_half_mass(p.mu_lo, p.b_lo))
    out = p.p_l * lap + (1.0 - p.p_l) * lo
    return np.where(r <= HALF_TURN, out, 0.0)


def mixed_cdf(x, p: MixedLogisticLaplaceParams):
    """CDF of :func:`mixed_pdf`."""
    x = np.clip(np.asarray(x, dtype=float), -HALF_TURN, HALF_TURN)
    r = np.abs(x)
    lap_half = -np.expm1(-r / p.b_l) / (2.0 * _truncated_laplace_mass(p.b_l))
    log_m = _logistic_log_half_mass(p.mu_lo, p.b_lo)
    lo_half = 0.5 * np.exp(logistic_log_mass(0.0, r, p.mu_lo, p.b_lo) - log_m)
    half = p.p_l * lap_half + (1.0 - p.p_l) * lo_half
    return 0.5 + np.sign(x) * half


def truncated_laplace_pdf(x, scale):
    """Zero-mean Laplace density restricted to [-180, 180]."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= HALF_TURN, laplace_pdf(x, 0.0, scale) / _truncated_laplace_mass(scale), 0.0)


def pdf_theta(model: OrientationModel, theta_deg):
    """Polar-angle density, Laplace truncated to [0, 180] degrees."""
    d = model.theta_dist
    mass = float(laplace_cdf(HALF_TURN, d.mean, d.scale) - laplace_cdf(0.0, d.mean, d.scale))
    x = np.asarray(theta_deg, dtype=float)
    out = np.where((x >= 0) & (x <= HALF_TURN), laplace_pdf(x, d.mean, d.scale) / mass, 0.0)
    return float(out) if out.ndim == 0 else out


def pdf_delta_theta(model: OrientationModel, dt: float, dtheta_deg):
    """Zero-mean Laplace density of the polar change over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    out = laplace_pdf(dtheta_deg, 0.0, model.delta_theta_scale(dt))
    return float(out) if out.ndim == 0 else out


def pdf_delta_phi(model: OrientationModel, dt: float, dphi_deg):
    """Density (per degree) of the azimuth change over ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    x = np.asarray(dphi_deg, dtype=float)
    if np.any(np.abs(x) > HALF_TURN) or not np.all(np.isfinite(x)):
        raise ValueError("dphi must lie in [-180, 180] degrees")
    regime = model.regime(dt)
    if regime == "laplace":
        out = truncated_laplace_pdf(x, model.azimuth_laplace(dt).scale)
    elif regime == "mixed":
        out = mixed_pdf(x, model.azimuth_mixed(dt))
    else:
        out = np.full_like(x, 1.0 / (2 * HALF_TURN))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# samplers
# --------------------------------------------------------------------------

def _truncated_laplace(rng, scale, size, lo=-HALF_TURN, hi=HALF_TURN, mean=0.0):
    # inverse CDF restricted to [lo, hi]
    scale = np.asarray(scale, dtype=float)
    a = laplace_cdf(lo, mean, scale)
    b = laplace_cdf(hi, mean, scale)
    u = a + (b - a) * rng.random(size)
    return np.where(u < 0.5, mean + scale * np.log(2 * u), mean - scale * np.log(2 * (1 - u)))


def _folded_logistic(rng, p: MixedLogisticLaplaceParams, size):
    # inverse CDF on [0, 180] in log space, on the side of the mean that
    # keeps the endpoint probabilities away from 1
    u = rng.random(size)
    if p.mu_lo < 0.5 * HALF_TURN:
        l0 = float(log_expit(p.mu_lo / p.b_lo))
        l1 = float(log_expit((p.mu_lo - HALF_TURN) / p.b_lo))
        ls = l0 + np.log1p(-u * -math.expm1(l1 - l0))
        r = p.mu_lo - p.b_lo * (ls - np.log(-np.expm1(ls)))
    else:
        l0 = float(log_expit(-p.mu_lo / p.b_lo))
        l1 = float(log_expit((HALF_TURN - p.mu_lo) / p.b_lo))
        lf = l1 + np.log(math.exp(l0 - l1) + u * -math.expm1(l0 - l1))
        r = p.mu_lo + p.b_lo * (lf - np.log(-np.expm1(lf)))
    r = np.clip(r, 0.0, HALF_TURN)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * r


def sample_delta_phi(model: OrientationModel, dt: float, size=None, seed=None):
    """Draw azimuth changes (degrees) from the regime active at ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rng = as_generator(seed)
    n = 1 if size is None else size
    regime = model.regime(dt)
    if regime == "laplace":
        out = _truncated_laplace(rng, model.azimuth_laplace(dt).scale, n)
    elif regime == "mixed":
        p = model.azimuth_mixed(dt)
        pick = rng.random(n) < p.p_l
        lap = _truncated_laplace(rng, p.b_l, n)
        lo = _folded_logistic(rng, p, n)
        out = np.where(pick, lap, lo)
    else:
        out = rng.uniform(-HALF_TURN, HALF_TURN, n)
    return float(out[0]) if size is None else out


def sample_delta_theta(model: OrientationModel, dt: float, size=None, seed=None):
    """Draw polar changes (degrees), zero-mean Laplace with the tabulated scale."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rng = as_generator(seed)
    out = rng.laplace(0.0, model.delta_theta_scale(dt), 1 if size is None else size)
    return float(out[0]) if size is None else out


def sample_theta(model: OrientationModel, size=None, seed=None):
    """Draw polar angles (degrees) from the Laplace fit restricted to [0, 180]."""
    rng = as_generator(seed)
    d = model.theta_dist
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(0)
    while out.size < n:
        draw = rng.laplace(d.mean, d.scale, max(n - out.size, 16) * 2)
        out = np.concatenate([out, draw[(draw >= 0) & (draw <= HALF_TURN)]])
    out = out[:n]
    return float(out[0]) if size is None else out.reshape(size)
