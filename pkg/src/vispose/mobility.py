"""Paused random-waypoint position process on the XZ plane.

A walk alternates flights (exponential duration, uniform heading, constant
speed) and pauses (zero with probability ``c``, exponential otherwise).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator


class ConfigurationError(ValueError):
    """Sampling parameters that cannot approximate the stationary regime."""


@dataclass(frozen=True)
class PositionModel:
    mu: float
    lam: float
    c: float
    v: float

    def __post_init__(self):
        for name in ("mu", "lam", "v"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val!r}")
        if not 0.0 <= self.c < 1.0:
            raise ValueError(f"c must lie in [0, 1), got {self.c!r}")

    @property
    def mean_flight(self) -> float:
        return 1.0 / self.mu

    @property
    def mean_pause(self) -> float:
        return (1.0 - self.c) / self.lam

    @property
    def mean_cycle(self) -> float:
        return self.mean_flight + self.mean_pause


# Placeholder walk used when no fitted model is supplied.
DEFAULT_POSITION_MODEL = PositionModel(mu=0.5, lam=1.0, c=0.3, v=1.4)


@dataclass(frozen=True, eq=False)
class MotionTimeline:
    """Flight ``i`` starts at ``flight_start[i]`` from waypoint ``waypoints[i]``
    and is followed by pause ``i``."""
    flight_durations: np.ndarray
    pause_durations: np.ndarray
    directions: np.ndarray
    speed: float
    origin: tuple[float, float] = (0.0, 0.0)
    flight_start: np.ndarray = field(init=False, repr=False)
    waypoints: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T = np.asarray(self.flight_durations, dtype=float)
        S = np.asarray(self.pause_durations, dtype=float)
        a = np.asarray(self.directions, dtype=float)
        if not (T.shape == S.shape == a.shape and T.ndim == 1 and T.size > 0):
            raise ValueError("segment arrays must be 1-D, non-empty and equally long")
        if np.any(T < 0) or np.any(S < 0):
            raise ValueError("durations must be >= 0")
        if np.any(a < 0) or np.any(a >= 2 * math.pi):
            raise ValueError("directions must lie in [0, 2 pi)")
        starts = np.empty_like(T)
        starts[0] = 0.0
        np.cumsum((T + S)[:-1], out=starts[1:])
        steps = self.speed * T[:, None] * np.stack([np.cos(a), np.sin(a)], axis=1)
        wp = np.empty((T.size + 1, 2))
        wp[0] = self.origin
        np.cumsum(steps, axis=0, out=wp[1:])
        wp[1:] += np.asarray(self.origin)
        object.__setattr__(self, "flight_start", starts)
        object.__setattr__(self, "waypoints", wp)

    def __len__(self) -> int:
        return self.flight_durations.size

    @property
    def pause_start(self) -> np.ndarray:
        return self.flight_start + self.flight_durations

    @property
    def end(self) -> float:
        return float(self.flight_start[-1] + self.flight_durations[-1] + self.pause_durations[-1])

    def _segment(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.end):
            raise ValueError("time outside the timeline")
        return t, np.maximum(np.searchsorted(self.flight_start, t, side="right") - 1, 0)

    def positions_at(self, t) -> np.ndarray:
        """(x, z) position at time(s) ``t``; shape (..., 2)."""
        t, i = self._segment(t)
        tau = np.minimum(t - self.flight_start[i], self.flight_durations[i])
        a = self.directions[i]
        step = (self.speed * tau)[..., None] * np.stack([np.cos(a), np.sin(a)], axis=-1)
        return self.waypoints[i] + step

    def in_flight(self, t) -> np.ndarray:
        t, i = self._segment(t)
        return (t - self.flight_start[i]) < self.flight_durations[i]


def _draw_segments(model: PositionModel, rng: np.random.Generator, n: int):
    T = rng.exponential(1.0 / model.mu, n)
    zero = rng.random(n) < model.c
    S = np.where(zero, 0.0, rng.exponential(1.0 / model.lam, n))
    a = rng.uniform(0.0, 2 * math.pi, n)
    return T, S, a


def generate_timeline(model: PositionModel, horizon: float, seed=None,
                      origin: tuple[float, float] = (0.0, 0.0)) -> MotionTimeline:
    """Draw segments until the walk covers at least ``horizon`` seconds."""
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be finite and > 0, got {horizon!r}")
    rng = as_generator(seed)
    chunk = int(1.1 * horizon / model.mean_cycle) + 64
    parts = []
    covered = 0.0
    while covered < horizon:
        T, S, a = _draw_segments(model, rng, chunk)
        parts.append((T, S, a))
        covered += float(np.sum(T + S))
    T, S, a = (np.concatenate(col) for col in zip(*parts))
    return MotionTimeline(T, S, a, model.v, origin)


def walking_direction_at(timeline: MotionTimeline, t) -> np.ndarray | float:
    """Heading of the current flight, held through the following pause."""
    _, i = timeline._segment(t)
    out = timeline.directions[i]
    return float(out) if np.ndim(out) == 0 else out


def burn_in(model: PositionModel) -> float:
    return max(100.0 / model.mu, 100.0 / model.lam)


def _observation_span(model: PositionModel, dt: float, n_samples: int, horizon: float | None) -> float:
    if horizon is not None:
        if horizon < 10 * dt:
            raise ConfigurationError(f"observation horizon {horizon} s is shorter than 10 * dt")
        return horizon
    # enough independent cycles for n_samples start points
    return max(1e4 * dt, n_samples * (dt + model.mean_cycle))


def _uniform_in_intervals(rng, starts: np.ndarray, lengths: np.ndarray, n: int) -> np.ndarray:
    # uniform draw over a union of disjoint intervals
    cum = np.cumsum(lengths)
    u = rng.uniform(0.0, cum[-1], n)
    j = np.searchsorted(cum, u, side="right")
    j = np.minimum(j, lengths.size - 1)
    before = cum[j] - lengths[j]
    return starts[j] + (u - before)


def sample_start_times(timeline: MotionTimeline, lo: float, hi: float, n: int, rng,
                       condition: str | None = None) -> np.ndarray:
    """Observation start times uniform on [lo, hi], optionally restricted to
    flights or to (non-zero) pauses."""
    if condition is None:
        return rng.uniform(lo, hi, n)
    if condition == "flight":
        s, ln = timeline.flight_start, timeline.flight_durations
    elif condition == "pause":
        s, ln = timeline.pause_start, timeline.pause_durations
    else:
        raise ValueError(f"unknown condition {condition!r}")
    e = np.minimum(s + ln, hi)
    s = np.maximum(s, lo)
    keep = e > s
    if not np.any(keep):
        raise ConfigurationError(f"no {condition} intervals inside the observation window")
    return _uniform_in_intervals(rng, s[keep], (e - s)[keep], n)


def displacement_sample(model: PositionModel, dt: float, n_samples: int, seed=None,
                        condition: str | None = None, horizon: float | None = None) -> np.ndarray:
    """Squared XZ displacement over windows of length ``dt`` (m^2).

    Start points are uniform over a long window after a burn-in, which stands
    in for the stationary limit. ``condition`` forces the start into a
    flight or a pause.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = as_generator(seed)
    t0 = burn_in(model)
    span = _observation_span(model, dt, n_samples, horizon)
    tl = generate_timeline(model, t0 + span + dt, rng)
    ts = sample_start_times(tl, t0, t0 + span, n_samples, rng, condition)
    d = tl.positions_at(ts + dt) - tl.positions_at(ts)
    return np.einsum("ij,ij->i", d, d)


def flight_time_fraction(model: PositionModel, n_points: int, seed=None) -> float:
    """Share of uniformly drawn time points that fall inside a flight."""
    rng = as_generator(seed)
    t0 = burn_in(model)
    span = n_points * model.mean_cycle
    tl = generate_timeline(model, t0 + span, rng)
    ts = rng.uniform(t0, t0 + span, n_points)
    return float(np.mean(tl.in_flight(ts)))
