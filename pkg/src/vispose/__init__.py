"""Pose models, displacement moments and ViS analysis for frame reuse in VR rendering."""
from .mobility import DEFAULT_POSITION_MODEL, PositionModel
from .moments import MomentTable, mgf, moments, p_flight
from .pose_model import (AzimuthRegimes, LaplaceParams, MixedLogisticLaplaceParams, OrientationModel,
                         PoseSample, Trajectory)
from .splitter import PoseModels, SplitConfig, SplitPlan, plan
from .vis import ViSConfig, ViSCurve, ViSPoint, vis, vis_curve, vis_dst, vis_fov

__all__ = [
    "AzimuthRegimes", "DEFAULT_POSITION_MODEL", "LaplaceParams", "MixedLogisticLaplaceParams",
    "MomentTable", "OrientationModel", "PoseModels", "PoseSample", "PositionModel", "SplitConfig",
    "SplitPlan", "Trajectory", "ViSConfig", "ViSCurve", "ViSPoint", "mgf", "moments", "p_flight",
    "plan", "vis", "vis_curve", "vis_dst", "vis_fov",
]
