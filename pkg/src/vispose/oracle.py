"""Monte-Carlo estimators that check the closed forms from independent samples.

Each estimator draws poses from the samplers only; none of them touches the
moment series or the ViS formulas except to fill in the ``analytic`` column.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .mobility import PositionModel, displacement_sample, flight_time_fraction
from .moments import mgf_from_table, moments, p_flight
from .pose_model import OrientationModel, sample_delta_phi, sample_delta_theta
from .rng import as_generator
from .vis import ViSConfig, vis, vis_dst

OVERLAP_MODES = ("formula", "clipped", "raw")


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    analytic: float
    mc_estimate: float
    mc_stderr: float
    n_samples: int
    tolerance: float
    verdict: bool

    def to_dict(self) -> dict:
        return asdict(self)


def mean_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    # a constant sample still gets a positive error so the verdict stays defined
    floor = max(np.finfo(float).eps * abs(float(np.mean(x))), np.finfo(float).tiny)
    return float(np.mean(x)), max(se, floor)


def make_report(quantity: str, analytic: float, estimate: float, stderr: float,
                n: int, tolerance: float) -> OracleReport:
    ok = abs(analytic - estimate) <= tolerance + 3.0 * stderr
    return OracleReport(quantity, float(analytic), float(estimate), float(stderr), int(n),
                        float(tolerance), bool(ok))


def mc_moments(model: PositionModel, dt: float, k_max: int = 4, n_samples: int = 10**6,
               seed=None, rel_tol: float = 0.03, condition: str | None = None,
               variant: str = "planar") -> list[OracleReport]:
    """Empirical E[psi^k], k = 1..k_max, against the moment series.

    With ``condition`` = "pause" / "flight" the comparison is against the
    matching single-case moment.
    """
    psi = displacement_sample(model, dt, n_samples, seed, condition=condition)
    table = moments(model, dt, k_max=k_max, variant=variant)
    ref = {None: table.m, "pause": table.m_case1, "flight": table.m_case2}[condition]
    tag = "m" if condition is None else f"m_{condition}"
    out = []
    for k in range(1, k_max + 1):
        est, se = mean_stderr(psi ** k)
        out.append(make_report(f"{tag}({k})", ref[k], est, se, n_samples, rel_tol * abs(ref[k])))
    return out


def mc_mgf(model: PositionModel, dt: float, tau: float, n_samples: int = 10**6, seed=None,
           k_terms: int = 20, rel_tol: float = 0.01) -> OracleReport:
    psi = displacement_sample(model, dt, n_samples, seed)
    table = moments(model, dt, k_max=k_terms)
    analytic = mgf_from_table(table, tau, k_terms).value
    est, se = mean_stderr(np.exp(tau * psi))
    return make_report(f"M({tau:g})", analytic, est, se, n_samples, rel_tol * abs(analytic))


def mc_p_flight(model: PositionModel, n_points: int = 10**6, seed=None,
                rel_tol: float = 0.005) -> OracleReport:
    p = p_flight(model)
    est = flight_time_fraction(model, n_points, seed)
    se = max(math.sqrt(est * (1 - est) / n_points), np.finfo(float).tiny)
    return make_report("p_flight", p, est, se, n_points, rel_tol * p)


def _overlap(x_deg: np.ndarray, w_deg: float, mode: str) -> np.ndarray:
    frac = np.abs(x_deg) / w_deg
    if mode == "formula":
        # changes beyond the window are left out of the loss, as in the closed form
        return 1.0 - np.where(frac <= 1.0, frac, 0.0)
    if mode == "clipped":
        return np.maximum(0.0, 1.0 - frac)
    if mode == "raw":
        return 1.0 - frac
    raise ValueError(f"unknown overlap mode {mode!r}")


def _product_stats(parts: list[tuple[float, float]]) -> tuple[float, float]:
    value = math.prod(m for m, _ in parts)
    rel = math.sqrt(sum((s / m) ** 2 for m, s in parts if m != 0))
    return value, max(abs(value) * rel, np.finfo(float).tiny)


def mc_vis_dst(position: PositionModel, dt: float, d: float, n_samples: int = 10**5, seed=None,
               cfg: ViSConfig = ViSConfig(), psi: np.ndarray | None = None) -> OracleReport:
    """E[(d^2 + psi - 2 d sqrt(psi) cos u) / d^2] with u uniform over the view angle."""
    rng = as_generator(seed)
    if psi is None:
        psi = displacement_sample(position, dt, n_samples, rng)
    u = rng.uniform(-cfg.w_fv / 2, cfg.w_fv / 2, psi.size)
    ratio = (d * d + psi - 2.0 * d * np.sqrt(psi) * np.cos(u)) / (d * d)
    est, se = mean_stderr(ratio)
    analytic, err = vis_dst(position, dt, d, cfg)
    return make_report(f"ViS_dst(dt={dt:g}, d={d:g})", analytic, est, se, psi.size,
                       max(0.01 * abs(analytic), err))


def mc_vis(orientation: OrientationModel, position: PositionModel, dt: float, d: float,
           n_samples: int = 10**5, seed=None, clipped: bool = False,
           cfg: ViSConfig = ViSConfig(), mode: str | None = None) -> OracleReport:
    """Point-level ViS from sampled orientation changes and displacements.

    ``mode`` picks the per-sample angular overlap: "formula" (default, the
    quantity the closed form integrates), "clipped" (floored at 0) or "raw"
    (1 - |change| / w). ``clipped=True`` is shorthand for mode "clipped".
    """
    mode = mode or ("clipped" if clipped else "formula")
    rng = as_generator(seed)
    w = cfg.w_deg
    dth = sample_delta_theta(orientation, dt, n_samples, rng)
    dph = sample_delta_phi(orientation, dt, n_samples, rng)
    psi = displacement_sample(position, dt, n_samples, rng)
    u = rng.uniform(-cfg.w_fv / 2, cfg.w_fv / 2, n_samples)
    parts = [
        mean_stderr(_overlap(dth, w, mode)),
        mean_stderr(_overlap(dph, w, mode)),
        mean_stderr((d * d + psi - 2.0 * d * np.sqrt(psi) * np.cos(u)) / (d * d)),
    ]
    est, se = _product_stats(parts)
    point = vis(orientation, position, dt, d, cfg)
    return make_report(f"ViS[{mode}](dt={dt:g}, d={d:g})", point.vis, est, se, n_samples,
                       max(0.01 * abs(point.vis), point.err_bound))


def run_suite(orientation: OrientationModel, position: PositionModel, seed: int = 0,
              n_moments: int = 10**5, n_vis: int = 10**5, dts=(1 / 6, 0.25, 0.5),
              ds=(10.0, 20.0, 50.0), cfg: ViSConfig = ViSConfig()) -> list[OracleReport]:
    """The full cross-check used by the ``verify`` command."""
    ss = np.random.SeedSequence(seed)
    streams = iter(ss.spawn(4 + 2 * len(dts)))
    out = [mc_p_flight(position, n_moments, next(streams))]
    for dt in dts:
        out += mc_moments(position, dt, 4, n_moments, next(streams))
        rng = as_generator(next(streams))
        psi = displacement_sample(position, dt, n_vis, rng)
        out += [mc_vis_dst(position, dt, d, seed=rng, cfg=cfg, psi=psi) for d in ds]
    tau = -1.0 / (position.v * 0.25) ** 2
    out.append(mc_mgf(position, 0.25, tau, n_moments, next(streams)))
    out.append(mc_vis(orientation, position, 0.25, 20.0, n_vis, next(streams), cfg=cfg))
    out.append(mc_vis(orientation, position, 0.25, 20.0, n_vis, next(streams), clipped=True, cfg=cfg))
    return out
