"""Split a sampled XZ path into straight flights and pauses.

Consecutive moving steps stay in one flight while their heading stays within
``turn_threshold`` of the flight's anchor heading. A run of slow steps lasting
at least ``pause_min`` ends the flight and is recorded as a pause; a turn with
no pause in between is recorded as a zero-length pause.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pose_model import Trajectory

DEFAULT_TURN_THRESHOLD = math.radians(30.0)
DEFAULT_MIN_FLIGHT_LENGTH = 0.5
DEFAULT_PAUSE_SPEED = 0.05
DEFAULT_PAUSE_MIN = 0.2


class SparseSamplingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Flight:
    start: tuple[float, float]
    end: tuple[float, float]
    duration: float
    direction: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("flight duration must be > 0")

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


@dataclass(frozen=True)
class FlightExtraction:
    flights: tuple[Flight, ...]
    pauses: tuple[float, ...]
    turn_threshold: float
    min_flight_length: float = 0.0


def _turn(a: float, b: float) -> float:
    d = (b - a + math.pi) % (2 * math.pi) - math.pi
    return abs(d)


def extract_flights(traj: Trajectory, turn_threshold: float = DEFAULT_TURN_THRESHOLD,
                    min_flight_length: float = DEFAULT_MIN_FLIGHT_LENGTH,
                    pause_speed: float = DEFAULT_PAUSE_SPEED,
                    pause_min: float = DEFAULT_PAUSE_MIN) -> FlightExtraction:
    if len(traj) < 2:
        return FlightExtraction((), (), turn_threshold, min_flight_length)
    t, x, z = traj.t, traj.x, traj.z
    step_dt = np.diff(t)
    if np.median(step_dt) > 0.1:
        warnings.warn("trace sampled below 10 Hz; flight boundaries will be coarse",
                      SparseSamplingWarning, stacklevel=2)
    dx, dz = np.diff(x), np.diff(z)
    dist = np.hypot(dx, dz)
    still = dist / step_dt < pause_speed
    heading = np.arctan2(dz, dx)
    # a step whose heading moves by less than this is straight motion
    straight_tol = turn_threshold / 4

    flights: list[Flight] = []
    pauses: list[float] = []
    n = step_dt.size
    start_i = None      # sample index where the current flight began
    moving_time = 0.0
    anchor = prev = 0.0

    def close(end_i: int):
        nonlocal start_i, moving_time
        if start_i is None:
            return False
        sx, sz, ex, ez = x[start_i], z[start_i], x[end_i], z[end_i]
        length = math.hypot(ex - sx, ez - sz)
        kept = length > min_flight_length and moving_time > 0
        if kept:
            direction = math.atan2(ez - sz, ex - sx) % (2 * math.pi)
            flights.append(Flight((float(sx), float(sz)), (float(ex), float(ez)), moving_time, direction))
        start_i = None
        moving_time = 0.0
        return kept

    i = 0
    while i < n:
        if still[i]:
            j = i
            while j < n and still[j]:
                j += 1
            run = float(t[j] - t[i])
            if run >= pause_min and run > 0:
                if close(i):
                    pauses.append(run)
                i = j
                continue
            # short stop: stays inside the flight
            if start_i is not None:
                moving_time += run
            i = j
            continue
        h = heading[i]
        if start_i is None:
            start_i = i
            anchor = prev = h
            moving_time = float(step_dt[i])
            i += 1
            continue
        if _turn(anchor, h) >= turn_threshold:
            if close(i):
                pauses.append(0.0)
            start_i = i
            anchor = prev = h
            moving_time = float(step_dt[i])
            i += 1
            continue
        if _turn(prev, h) < straight_tol:
            anchor = h
        prev = h
        moving_time += float(step_dt[i])
        i += 1
    close(n)
    # a pause is logged after each kept flight; one trailing the last flight is
    # cut off by the end of the trace
    if pauses and len(pauses) == len(flights):
        pauses.pop()
    return FlightExtraction(tuple(flights), tuple(pauses), turn_threshold, min_flight_length)
