"""Per-frame foreground/background split driven by the analytical ViS.

Every R-th frame is a reference frame and is rendered in full. A novel frame
Δt after its reference renders content up to the nearest grid distance from
which ViS stays at or above the similarity threshold; everything beyond it is
reused.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .defaults import FPS, R_MAX, VIS_THRESHOLD
from .mobility import PositionModel
from .pose_model import OrientationModel
from .vis import ViSConfig, distance_term, vis_fov

ALL_FOREGROUND = "all-foreground"


@dataclass(frozen=True, eq=False)
class PoseModels:
    orientation: OrientationModel
    position: PositionModel


@dataclass(frozen=True)
class SplitConfig:
    fps: float = FPS
    R: int | None = None  # None: auto
    vis_tr: float = VIS_THRESHOLD
    d_step: float = 0.5
    cfg: ViSConfig = field(default_factory=ViSConfig)
    r_max: int = R_MAX

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be > 0")
        if self.R is not None and self.R < 1:
            raise ValueError("R must be >= 1")
        if not 0 < self.vis_tr < 1:
            raise ValueError("vis_tr must lie in (0, 1)")
        if not self.d_step > 0:
            raise ValueError("d_step must be > 0")
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")

    def d_grid(self) -> np.ndarray:
        n = math.ceil(self.cfg.d_fp / self.d_step)
        grid = self.d_step * np.arange(1, n + 1)
        return grid[grid < self.cfg.d_fp]


def vis_on_grid(models: PoseModels, dt: float, split_cfg: SplitConfig) -> np.ndarray:
    """ViS(d) over the scan grid."""
    cfg = split_cfg.cfg
    fov, _, _ = vis_fov(models.orientation, dt, cfg)
    term = distance_term(models.position, dt, cfg)
    return np.array([fov * term.at(float(d), cfg.w_fv)[0] for d in split_cfg.d_grid()])


def split_frame(models: PoseModels, dt_to_reference: float, split_cfg: SplitConfig) -> float:
    """Smallest grid d with ViS(d') >= vis_tr for every grid d' >= d, else d_fp.

    Where ViS is non-decreasing in d this is the first grid hit. Below about
    v * dt the expected distance ratio can exceed 1, so an isolated hit at
    small d is not allowed to mark farther, dissimilar content as reusable.
    """
    if not dt_to_reference > 0:
        raise ValueError("dt_to_reference must be > 0")
    grid = split_cfg.d_grid()
    ok = vis_on_grid(models, dt_to_reference, split_cfg) >= split_cfg.vis_tr
    tail_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    hits = np.nonzero(tail_ok)[0]
    return float(grid[hits[0]]) if hits.size else float(split_cfg.cfg.d_fp)


def auto_reference_interval(models: PoseModels, split_cfg: SplitConfig) -> int:
    """Largest cycle length R <= r_max whose novel frames all get d_tr < d_fp."""
    d_fp = split_cfg.cfg.d_fp
    for j in range(1, split_cfg.r_max):
        if split_frame(models, j / split_cfg.fps, split_cfg) >= d_fp:
            return j
    return split_cfg.r_max


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    role: str
    dt: float
    d_tr: float | None  # None: reference frame, everything is foreground

    def d_tr_text(self) -> str:
        return ALL_FOREGROUND if self.d_tr is None else repr(self.d_tr)


@dataclass(frozen=True)
class SplitPlan:
    R: int
    vis_tr: float
    d_fp: float
    records: tuple[FrameRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "role", "dt", "d_tr"])
        for r in self.records:
            w.writerow([r.frame, r.role, repr(r.dt), r.d_tr_text()])
        return buf.getvalue()

    def summary(self) -> dict:
        novel = [r.d_tr for r in self.records if r.role == "novel"]
        values, counts = np.unique(np.array(novel, dtype=float), return_counts=True)
        return {
            "R": self.R,
            "vis_tr": self.vis_tr,
            "d_fp": self.d_fp,
            "n_frames": len(self.records),
            "n_reference": len(self.records) - len(novel),
            "d_tr_histogram": {repr(float(v)): int(c) for v, c in zip(values, counts)},
        }


def _assemble(n_frames: int, R: int, fps: float, d_by_offset, vis_tr: float, d_fp: float) -> SplitPlan:
    recs = []
    for f in range(n_frames):
        j = f % R
        if j == 0:
            recs.append(FrameRecord(f, "reference", 0.0, None))
        else:
            recs.append(FrameRecord(f, "novel", j / fps, d_by_offset[j]))
    return SplitPlan(R, vis_tr, d_fp, tuple(recs))


def threshold_table(models: PoseModels, R: int, split_cfg: SplitConfig) -> dict[int, float]:
    """d_tr for the R - 1 novel offsets of a cycle."""
    return {j: split_frame(models, j / split_cfg.fps, split_cfg) for j in range(1, R)}


def plan(models: PoseModels, n_frames: int, split_cfg: SplitConfig,
         table: dict[int, float] | None = None) -> SplitPlan:
    """Assign roles and thresholds to ``n_frames`` consecutive frames.

    The inter-frame interval is fixed, so only R - 1 distinct gaps occur; their
    thresholds are computed once (or passed in as ``table``) and reused.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    R = split_cfg.R if split_cfg.R is not None else auto_reference_interval(models, split_cfg)
    if table is None:
        table = threshold_table(models, R, split_cfg)
    return _assemble(n_frames, R, split_cfg.fps, table, split_cfg.vis_tr, split_cfg.cfg.d_fp)


def baseline_fixed(d_fixed: float, n_frames: int, split_cfg: SplitConfig, R: int | None = None) -> SplitPlan:
    """Same cycle layout with a constant threshold min(d_fixed, d_fp)."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if not d_fixed > 0:
        raise ValueError("d_fixed must be > 0")
    R = R if R is not None else split_cfg.R
    if R is None:
        raise ValueError("baseline needs an explicit R")
    d = min(float(d_fixed), float(split_cfg.cfg.d_fp))
    table = {j: d for j in range(1, R)}
    return _assemble(n_frames, R, split_cfg.fps, table, split_cfg.vis_tr, split_cfg.cfg.d_fp)
