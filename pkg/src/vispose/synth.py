"""Synthetic pose traces with known position and orientation statistics.

Orientation uses Laplace scale mixtures: a Gaussian value multiplied by
sqrt(2 E) with E ~ Exp(1) is Laplace distributed. Here E(t) is a slowly
varying process (60 s correlation for the polar angle, 10 s for the
azimuth) whose values over the trace are rank-mapped onto exact Exp(1)
quantiles, so the mixing law holds for the trace itself and not only on
average. Gaps of a few seconds see an almost
constant E, and their increments are Laplace too.

* polar angle: mean + b_theta sqrt(2E) Z(t), Z stationary with correlation
  exp(-(lag / tau)^alpha) and likewise rank-mapped onto normal quantiles (an
  hour of a process correlated over seconds holds only a few hundred
  independent values, too few for a 5% marginal). The polar change over a
  gap has Laplace scale b_theta sqrt(2 (1 - rho(gap))).
* azimuth: the running sum of an AR(1) angular velocity times sqrt(2E),
  wrapped to [-180, 180); the change over a gap has Laplace scale equal to
  the standard deviation of the summed velocity, until wrapping flattens it
  toward uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import lfilter
from scipy.special import ndtri

from .mobility import MotionTimeline, PositionModel, generate_timeline
from .pose_model import HALF_TURN, OrientationModel, Trajectory, sample_delta_phi
from .rng import as_generator, spawn

THETA_AMP_CORR = 60.0
PHI_AMP_CORR = 10.0


def summed_ar1_std(lag_steps, rate_scale: float, corr_time: float, step: float):
    """Std of ``step * sum(v_0..v_{L-1})`` for an AR(1) v with std ``rate_scale``."""
    L = np.asarray(lag_steps, dtype=float)
    r = math.exp(-step / corr_time)
    # sum_{j=1}^{L-1} (L - j) r^j in closed form
    cross = r * (L * (1 - r) - (1 - r ** L)) / (1 - r) ** 2
    return step * rate_scale * np.sqrt(L + 2.0 * cross)


@dataclass(frozen=True)
class OrientationProcess:
    theta_mean: float
    theta_scale: float
    alpha: float
    tau: float
    phi_rate_scale: float   # deg/s, std of the angular velocity before mixing
    phi_corr_time: float    # s
    step: float

    def delta_theta_scale(self, dt: float) -> float:
        rho = math.exp(-((dt / self.tau) ** self.alpha))
        return self.theta_scale * math.sqrt(2.0 * (1.0 - rho))

    def delta_phi_scale(self, dt: float) -> float:
        """Unwrapped azimuth-change scale; ``dt`` is rounded to whole steps."""
        lag = max(round(dt / self.step), 1)
        return float(summed_ar1_std(lag, self.phi_rate_scale, self.phi_corr_time, self.step))

    @classmethod
    def from_model(cls, model: OrientationModel, fps: float = 60.0,
                   theta_fit_frac: float = 0.3) -> "OrientationProcess":
        """Match the polar-change table at short gaps and the azimuth Laplace table.

        Only table entries with scale below ``theta_fit_frac * sqrt(2) * b_theta``
        enter the polar fit; larger gaps cannot be met by a stationary polar
        angle with that marginal scale.
        """
        step = 1.0 / fps
        b = model.theta_dist.scale
        pts = [(dt, s) for dt, s in sorted(model.delta_theta_table.items())
               if s < theta_fit_frac * math.sqrt(2.0) * b]
        if len(pts) < 2:
            raise ValueError("need two short-gap polar scales to fit the correlation")
        # 1 - rho = s^2 / (2 b^2) and -log(rho) = (dt / tau)^alpha
        x = np.log([dt for dt, _ in pts])
        y = np.log([-math.log1p(-(s * s) / (2 * b * b)) for _, s in pts])
        alpha, icpt = np.polyfit(x, y, 1)
        tau = math.exp(-icpt / alpha)
        rate, corr = _fit_azimuth_rate(model, step)
        return cls(model.theta_dist.mean, b, float(alpha), float(tau), rate, corr, step)


def _fit_azimuth_rate(model: OrientationModel, step: float) -> tuple[float, float]:
    lap = sorted(model.azimuth.laplace.items())
    lags = np.array([max(round(dt / step), 1) for dt, _ in lap], dtype=float)
    log_s = np.log([p.scale for _, p in lap])

    def offset_and_misfit(log_t):
        f = np.log(summed_ar1_std(lags, 1.0, math.exp(log_t), step))
        off = float(np.mean(log_s - f))
        return off, float(np.sum((log_s - f - off) ** 2))

    if len(lap) < 2:
        log_t = math.log(0.5)
    else:
        log_t = minimize_scalar(lambda u: offset_and_misfit(u)[1],
                                bounds=(math.log(step), math.log(1e3)), method="bounded",
                                options={"xatol": 1e-10}).x
    off, _ = offset_and_misfit(log_t)
    return math.exp(off), math.exp(log_t)


def _circulant_sample(acov: np.ndarray, rng) -> np.ndarray:
    """Stationary Gaussian sequence with autocovariance ``acov`` (exact embedding)."""
    n = acov.size
    row = np.concatenate([acov, acov[-2:0:-1]])
    lam = np.fft.rfft(row).real
    lam = np.maximum(lam, 0.0)  # tiny negative eigenvalues from rounding
    m = row.size
    w = rng.standard_normal(m // 2 + 1) + 1j * rng.standard_normal(m // 2 + 1)
    w[0] = w[0].real * math.sqrt(2.0)
    if m % 2 == 0:
        w[-1] = w[-1].real * math.sqrt(2.0)
    x = np.fft.irfft(np.sqrt(lam * m / 2.0) * w, n=m)
    return x[:n]


def _rank_levels(x: np.ndarray) -> np.ndarray:
    """(rank + 1/2) / n for each entry of x."""
    ranks = np.empty(x.size)
    ranks[np.argsort(x, kind="stable")] = np.arange(x.size)
    return (ranks + 0.5) / x.size


def mixing_amplitude(n: int, step: float, corr_time: float, rng) -> np.ndarray:
    """sqrt(2E(t)) with E's values over the n samples exactly Exp(1) quantiles."""
    lags = step * np.arange(n)
    acov = np.exp(-((lags / corr_time) ** 2))
    raw = _circulant_sample(acov, rng) ** 2 + _circulant_sample(acov, rng) ** 2
    e = -np.log1p(-_rank_levels(raw))
    return np.sqrt(2.0 * e)


def theta_path(proc: OrientationProcess, n: int, rng, amp_corr_time: float = THETA_AMP_CORR) -> np.ndarray:
    lags = proc.step * np.arange(n)
    acov = np.exp(-((lags / proc.tau) ** proc.alpha))
    z = _circulant_sample(acov, rng)
    z = ndtri(_rank_levels(z))
    amp = mixing_amplitude(n, proc.step, amp_corr_time, rng)
    return np.clip(proc.theta_mean + proc.theta_scale * amp * z, 0.0, HALF_TURN)


def phi_path(proc: OrientationProcess, n: int, rng, amp_corr_time: float = PHI_AMP_CORR) -> np.ndarray:
    r = math.exp(-proc.step / proc.phi_corr_time)
    innov = rng.standard_normal(n) * math.sqrt(1.0 - r * r)
    innov[0] = rng.standard_normal()
    vel = lfilter([1.0], [1.0, -r], innov)
    amp = mixing_amplitude(n, proc.step, amp_corr_time, rng)
    start = rng.uniform(-HALF_TURN, HALF_TURN)
    rate = proc.phi_rate_scale * proc.step * amp * vel
    walk = start + np.concatenate([[0.0], np.cumsum(rate[:-1])])
    return (walk + HALF_TURN) % (2 * HALF_TURN) - HALF_TURN


@dataclass(frozen=True, eq=False)
class SyntheticTrace:
    trajectory: Trajectory
    timeline: MotionTimeline
    position: PositionModel
    orientation: OrientationProcess


def synthesize_trace(position: PositionModel, orientation: OrientationModel | OrientationProcess,
                     duration: float, fps: float = 60.0, seed=None, eye_height: float = 1.6,
                     amp_corr_times: tuple[float, float] = (THETA_AMP_CORR, PHI_AMP_CORR)) -> SyntheticTrace:
    """Pose trace of ``duration`` seconds sampled at ``fps``."""
    if not duration > 0 or not fps > 0:
        raise ValueError("duration and fps must be > 0")
    rng = as_generator(seed)
    proc = orientation if isinstance(orientation, OrientationProcess) \
        else OrientationProcess.from_model(orientation, fps)
    n = int(math.floor(duration * fps)) + 1
    t = np.arange(n) / fps
    tl = generate_timeline(position, t[-1] + 1.0, rng)
    xz = tl.positions_at(t)
    theta_deg = theta_path(proc, n, rng, amp_corr_times[0])
    phi_deg = phi_path(proc, n, rng, amp_corr_times[1])
    # convert through exact degree values so a CSV round trip is lossless
    theta = np.array([math.radians(v) for v in theta_deg])
    phi = np.array([math.radians(v) for v in phi_deg])
    phi = np.where(phi >= math.pi, -math.pi, phi)
    traj = Trajectory(t, xz[:, 0], np.full(n, eye_height), xz[:, 1], theta, phi, source_tag="synthetic")
    return SyntheticTrace(traj, tl, position, proc)


def regime_samples(model: OrientationModel, dts, n: int, seed=None) -> dict[float, np.ndarray]:
    """Independent azimuth changes (degrees) per gap, drawn from the model's regimes.

    Unlike a trace, the draws at each gap are independent, so a family switch
    between gaps is exactly the one the model declares.
    """
    dts = sorted(float(d) for d in dts)
    return {dt: sample_delta_phi(model, dt, n, s) for dt, s in zip(dts, spawn(seed, len(dts)))}
