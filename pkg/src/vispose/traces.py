"""Pose trace CSV: header t,x,y,z,theta_deg,phi_deg; one pose per row."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .pose_model import Trajectory

HEADER = ("t", "x", "y", "z", "theta_deg", "phi_deg")


class TraceFormatError(ValueError):
    pass


def exact_degrees(rad: float) -> float:
    """Degrees value ``d`` with ``math.radians(d) == rad`` when one exists.

    Starts from ``math.degrees`` and walks a few ulps either way, so a value
    that was itself produced from degrees survives a round trip unchanged.
    """
    d = math.degrees(rad)
    if math.radians(d) == rad:
        return d
    lo = hi = d
    for _ in range(8):
        lo = math.nextafter(lo, -math.inf)
        hi = math.nextafter(hi, math.inf)
        for cand in (lo, hi):
            if math.radians(cand) == rad:
                return cand
    return d


def _parse(text: str, source: str) -> Trajectory:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    missing = [h for h in HEADER if h not in header]
    if missing:
        raise TraceFormatError(f"{source}: missing columns {', '.join(missing)}")
    idx = [header.index(h) for h in HEADER]
    rows = []
    prev_t = -math.inf
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            vals = [float(row[i]) for i in idx]
        except (IndexError, ValueError):
            raise TraceFormatError(f"{source}:{lineno}: malformed row {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise TraceFormatError(f"{source}:{lineno}: non-finite value")
        t, x, y, z, th, ph = vals
        if t <= prev_t:
            raise TraceFormatError(f"{source}:{lineno}: time {t} is not after {prev_t}")
        if t < 0:
            raise TraceFormatError(f"{source}:{lineno}: negative time")
        if not (0.0 <= th <= 180.0) or not (-180.0 <= ph < 180.0):
            raise TraceFormatError(f"{source}:{lineno}: angle out of range")
        prev_t = t
        rows.append((t, x, y, z, math.radians(th), math.radians(ph)))
    if not rows:
        raise TraceFormatError(f"{source}: no pose rows")
    arr = np.array(rows, dtype=float)
    return Trajectory(*arr.T, source_tag=Path(source).stem)


def load_trace(path) -> Trajectory:
    path = Path(path)
    return _parse(path.read_text(), str(path))


def loads_trace(text: str, source: str = "<string>") -> Trajectory:
    return _parse(text, source)


def dumps_trace(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for i in range(len(traj)):
        w.writerow([repr(float(traj.t[i])), repr(float(traj.x[i])), repr(float(traj.y[i])),
                    repr(float(traj.z[i])), repr(exact_degrees(float(traj.theta[i]))),
                    repr(exact_degrees(float(traj.phi[i])))])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_trace(traj: Trajectory, path) -> None:
    atomic_write_text(path, dumps_trace(traj))
