"""Skeleton and pose data model, quaternion helpers, forward kinematics.

Conventions (global to the whole package):
  * right-handed, Y-up, meters
  * quaternions are float64 (x, y, z, w), unit norm
  * yaw is measured in the floor plane from +X toward +Z, in degrees;
    a character with identity root rotation faces +X
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .kernels import (  # noqa: F401  (re-exported quaternion helpers)
    IDENTITY_QUAT,
    quat_conjugate,
    quat_mul,
    quat_normalize,
    quat_rotate,
)

UNIT_NORM_TOL = 1e-6


def identity_quat() -> np.ndarray:
    return IDENTITY_QUAT.copy()


def quat_slerp(q1, q2, t):
    """Shortest-arc spherical interpolation between unit quaternions."""
    return kernels.quat_slerp(np.asarray(q1, dtype=float), np.asarray(q2, dtype=float), float(t))


def quat_angle_deg(a, b) -> float:
    """Absolute rotation angle between two unit quaternions, in degrees."""
    d = abs(float(np.dot(a, b)))
    return float(np.degrees(2.0 * np.arccos(min(1.0, d))))


def quats_close(a, b, tol=1e-9) -> bool:
    """Componentwise closeness up to the q/-q sign ambiguity."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(np.abs(a - b) <= tol) or np.all(np.abs(a + b) <= tol))


@dataclass(frozen=True)
class Joint:
    name: str
    parent: Optional[int]  # index into Skeleton.joints; None for the root
    bind_offset: np.ndarray  # (3,) offset from parent in the bind pose, meters
    bind_rotation: np.ndarray  # (4,) unit quaternion

    def __post_init__(self):
        object.__setattr__(self, "bind_offset", np.asarray(self.bind_offset, dtype=float))
        object.__setattr__(self, "bind_rotation", np.asarray(self.bind_rotation, dtype=float))


class Skeleton:
    """An ordered, topologically sorted joint hierarchy with a known height.

    ``height`` is the bind-pose vertical extent (head top to floor). The
    constructor caches flat arrays so per-frame kernels never touch the
    Joint objects.
    """

    def __init__(self, joints: list[Joint], height: float):
        self.joints = list(joints)
        self.height = float(height)
        n = len(self.joints)
        self.parents = np.array(
            [-1 if j.parent is None else j.parent for j in self.joints], dtype=np.int64
        )
        self.bind_offsets = np.zeros((n, 3))
        self.bind_rotations = np.zeros((n, 4))
        for i, j in enumerate(self.joints):
            self.bind_offsets[i] = j.bind_offset
            self.bind_rotations[i] = j.bind_rotation
        self.name_index = {j.name: i for i, j in enumerate(self.joints)}

    def __len__(self) -> int:
        return len(self.joints)

    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def bind_positions(self) -> np.ndarray:
        """World joint positions of the bind pose with the root at origin."""
        pose = Pose.rest(self)
        pos, _ = forward_kinematics(self, pose)
        return pos

    def rest_root_translation(self) -> np.ndarray:
        """Root translation that puts the bind pose's lowest point on the floor."""
        low = float(np.min(self.bind_positions()[:, 1]))
        return np.array([0.0, -low, 0.0])


@dataclass
class Pose:
    """Per-joint local rotations plus a root translation, at one instant."""

    local_rotations: np.ndarray  # (J, 4)
    root_translation: np.ndarray  # (3,)
    timestamp: float = 0.0

    def __post_init__(self):
        self.local_rotations = np.asarray(self.local_rotations, dtype=float)
        self.root_translation = np.asarray(self.root_translation, dtype=float)

    @classmethod
    def rest(cls, skeleton: Skeleton, timestamp: float = 0.0) -> "Pose":
        rots = np.tile(IDENTITY_QUAT, (len(skeleton), 1))
        return cls(rots, np.zeros(3), timestamp)

    def copy(self) -> "Pose":
        return Pose(self.local_rotations.copy(), self.root_translation.copy(), self.timestamp)

    def joint_count(self) -> int:
        return self.local_rotations.shape[0]


class SkeletonMismatch(ValueError):
    """Pose and skeleton disagree on joint count."""


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """World transforms for every joint.

    Each joint contributes translation by its bind offset (in the parent's
    frame) and rotation by bind_rotation * local_rotation; the root's
    position is the pose's root translation. Returns (positions (J, 3),
    rotations (J, 4)).
    """
    if pose.joint_count() != len(skeleton):
        raise SkeletonMismatch(
            f"pose has {pose.joint_count()} joints, skeleton has {len(skeleton)}"
        )
    return kernels.fk(
        skeleton.parents,
        skeleton.bind_offsets,
        skeleton.bind_rotations,
        pose.local_rotations,
        pose.root_translation,
    )


def validate_skeleton(skeleton: Skeleton) -> list[str]:
    """Every invariant violation found, as human-readable strings (empty = ok)."""
    violations = []
    joints = skeleton.joints
    if not joints:
        return ["skeleton has no joints"]
    roots = [i for i, j in enumerate(joints) if j.parent is None]
    if len(roots) == 0:
        violations.append("no root joint (every joint has a parent)")
    elif len(roots) > 1:
        names = ", ".join(joints[i].name for i in roots)
        violations.append(f"multiple roots: {names}")
    seen: dict[str, int] = {}
    for i, j in enumerate(joints):
        if j.name in seen:
            violations.append(f"duplicate name {j.name!r} (joints {seen[j.name]} and {i})")
        else:
            seen[j.name] = i
        if j.parent is not None and not (0 <= j.parent < i):
            violations.append(
                f"joint {j.name!r} at index {i} has parent index {j.parent}; "
                "parents must precede children (cycle or bad order)"
            )
        norm = float(np.linalg.norm(j.bind_rotation))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            violations.append(f"joint {j.name!r} bind rotation norm {norm:.6f} is not unit")
        if j.bind_offset.shape != (3,):
            violations.append(f"joint {j.name!r} bind offset is not a 3-vector")
    if not skeleton.height > 0:
        violations.append(f"height {skeleton.height} is not positive")
    return violations
