"""Reference parameter sets: desktop-VR orientation tables and rendering defaults."""
from __future__ import annotations

from .pose_model import (
    AzimuthRegimes,
    LaplaceParams,
    MixedLogisticLaplaceParams,
    OrientationModel,
)

FRAME = 1.0 / 60.0

FPS = 60.0
ANGLE_OF_VIEW_DEG = 90.0
FAR_PLANE_M = 50.0
EYE_HEIGHT_M = 1.6
VIS_THRESHOLD = 0.945
R_MAX = 60

# Polar-change Laplace scale (degrees) per gap, in frames, desktop interface.
DESKTOP_DELTA_THETA_FRAMES = {
    1: 0.0748, 5: 0.305, 10: 0.571, 15: 0.826, 20: 1.049, 25: 1.276,
    30: 1.480, 100: 3.407, 200: 4.984, 600: 8.005, 5000: 9.926,
}

DESKTOP_BETA1 = 189 * FRAME
DESKTOP_BETA2 = 1549 * FRAME
HEADSET_BETAS = (244 * FRAME, 1003 * FRAME)
PHONE_BETAS = (496 * FRAME, 1006 * FRAME)

DESKTOP_AZIMUTH_LAPLACE = {
    10 * FRAME: LaplaceParams(0.0, 3.130),
    60 * FRAME: LaplaceParams(0.0, 13.868),
}
DESKTOP_AZIMUTH_MIXED = {
    200 * FRAME: MixedLogisticLaplaceParams(mu_lo=-0.1, b_lo=28.54, mu_l=0.1, b_l=0.24, p_l=0.36),
    500 * FRAME: MixedLogisticLaplaceParams(mu_lo=-0.4, b_lo=53.35, mu_l=4.2, b_l=0.34, p_l=0.13),
}

# Polar angle fits per game, desktop interface.
THETA_LITE_DESKTOP = LaplaceParams(90.037, 6.057)
THETA_VK_DESKTOP = LaplaceParams(90.575, 7.356)


def desktop_orientation_model(theta: LaplaceParams = THETA_LITE_DESKTOP) -> OrientationModel:
    return OrientationModel(
        theta_dist=theta,
        delta_theta_table={n * FRAME: b for n, b in DESKTOP_DELTA_THETA_FRAMES.items()},
        azimuth=AzimuthRegimes(
            beta1=DESKTOP_BETA1,
            beta2=DESKTOP_BETA2,
            laplace=dict(DESKTOP_AZIMUTH_LAPLACE),
            mixed=dict(DESKTOP_AZIMUTH_MIXED),
        ),
    )
