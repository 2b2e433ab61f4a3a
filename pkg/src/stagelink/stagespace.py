"""Performance-space geometry.

Four spaces matter at runtime: the actors' physical stage (A), the capture
area of the performer driving the avatar (B), the avatar's digital stage (D)
and the audience/director area (E). A and B relate to D through planar
similarity transforms; rotating space B is the algorithmic trick that turns
the avatar without the performer turning away from their feedback monitors.

All planar points are (x, z) row vectors in meters. Yaw is degrees from +X
toward +Z, normalized to (-180, 180].
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .kernels import quat_mul, quat_normalize, quat_rotate
from .skeleton import Pose

COINCIDENT_TOL = 1e-3  # positions closer than 1 mm have no defined bearing


class DegenerateGeometry(ValueError):
    """Two positions coincide; no facing can be derived."""


def wrap_deg(angle: float) -> float:
    """Normalize an angle in degrees to (-180, 180]."""
    r = math.fmod(angle + 180.0, 360.0)
    if r <= 0.0:
        r += 360.0
    return r - 180.0


def yaw_quat(deg: float) -> np.ndarray:
    """Unit quaternion for a floor-plane yaw (maps +X toward +Z at +90)."""
    half = math.radians(deg) / 2.0
    return np.array([0.0, -math.sin(half), 0.0, math.cos(half)])


def rot2d(p, deg: float) -> np.ndarray:
    """Rotate an (x, z) point by yaw degrees about the origin."""
    c = math.cos(math.radians(deg))
    s = math.sin(math.radians(deg))
    return np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])


def facing_of(root_rotation) -> float:
    """Yaw the rig's forward axis (+X) points toward under this rotation."""
    f = quat_rotate(np.asarray(root_rotation, dtype=float), np.array([1.0, 0.0, 0.0]))
    if abs(f[0]) < 1e-12 and abs(f[2]) < 1e-12:
        return 0.0  # forward axis points straight up/down; yaw is arbitrary
    return wrap_deg(math.degrees(math.atan2(f[2], f[0])))


@dataclass(frozen=True)
class Similarity2D:
    """p' = scale * R(yaw) * p + offset, in the floor plane."""

    scale: float = 1.0
    yaw_deg: float = 0.0
    offset: np.ndarray = None  # (2,)

    def __post_init__(self):
        off = np.zeros(2) if self.offset is None else np.asarray(self.offset, dtype=float)
        object.__setattr__(self, "offset", off)
        if not self.scale > 0:
            raise ValueError(f"similarity scale must be positive, got {self.scale}")

    def apply(self, p) -> np.ndarray:
        return self.scale * rot2d(p, self.yaw_deg) + self.offset

    def invert(self, p) -> np.ndarray:
        return rot2d((np.asarray(p, dtype=float) - self.offset) / self.scale, -self.yaw_deg)


@dataclass(frozen=True)
class SpaceCalibration:
    b_to_d: Similarity2D
    a_to_d: Similarity2D


@dataclass(frozen=True)
class Disposition:
    """Where the avatar stands in D and the yaw it projects its action toward."""

    position: np.ndarray  # (2,) in D
    facing_deg: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "facing_deg", wrap_deg(self.facing_deg))


def map_point_B_to_D(p, cal: SpaceCalibration) -> np.ndarray:
    return cal.b_to_d.apply(np.asarray(p, dtype=float))


def map_point_A_to_D(p, cal: SpaceCalibration) -> np.ndarray:
    return cal.a_to_d.apply(np.asarray(p, dtype=float))


def rotate_space_B(pose: Pose, theta_deg: float, pivot) -> Pose:
    """Rotate the performer's reference frame under the pose.

    The root's floor position swings around the pivot and the root rotation
    is pre-multiplied by the yaw; every other local rotation is returned
    bit-identical, so the performed gesture is untouched.
    """
    out = pose.copy()
    if theta_deg == 0.0:
        return out
    pivot = np.asarray(pivot, dtype=float)
    xz = np.array([pose.root_translation[0], pose.root_translation[2]])
    nxz = rot2d(xz - pivot, theta_deg) + pivot
    out.root_translation[0] = nxz[0]
    out.root_translation[2] = nxz[1]
    out.local_rotations[0] = quat_normalize(quat_mul(yaw_quat(theta_deg), pose.local_rotations[0]))
    return out


def solve_disposition(avatar_pos, actor_pos) -> float:
    """Yaw from the avatar toward the actor, both in D."""
    avatar_pos = np.asarray(avatar_pos, dtype=float)
    actor_pos = np.asarray(actor_pos, dtype=float)
    d = actor_pos - avatar_pos
    if math.hypot(d[0], d[1]) < COINCIDENT_TOL:
        raise DegenerateGeometry(f"avatar and actor coincide at {avatar_pos}")
    return wrap_deg(math.degrees(math.atan2(d[1], d[0])))


def disposition_correction(current_deg: float, target_deg: float) -> float:
    """Minimal signed yaw that takes the current facing to the target."""
    return wrap_deg(target_deg - current_deg)


def retune_calibration(
    cal: SpaceCalibration, b_point, b_facing_deg: float, d_target_pos, d_target_yaw: float
) -> SpaceCalibration:
    """New B->D transform that lands the given capture-space point and facing
    exactly on a digital-space target.

    This is how the avatar is repositioned without the performer moving:
    releases without a preset keep the pathfinder's final transform, preset
    applications snap to the stored mark.
    """
    new_yaw = wrap_deg(d_target_yaw - b_facing_deg)
    b_point = np.asarray(b_point, dtype=float)
    d_target_pos = np.asarray(d_target_pos, dtype=float)
    s = cal.b_to_d.scale
    new_offset = d_target_pos - s * rot2d(b_point, new_yaw)
    return replace(cal, b_to_d=Similarity2D(s, new_yaw, new_offset))
