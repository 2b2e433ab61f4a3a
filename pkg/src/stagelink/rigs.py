"""Canonical rigs and the body-region partition.

The neutral character is the fixed intermediate rig every capture source is
normalized onto before being mapped to a show avatar: 23 joints, 1.80 m,
T-pose, facing +X. The 9 body regions partition its joint set; blending
routes sources region by region.
"""

from enum import Enum

import numpy as np

from .skeleton import Joint, Skeleton, identity_quat

NEUTRAL_HEIGHT = 1.80
NEUTRAL_HIP_HEIGHT = 0.95


class BodyRegion(Enum):
    Root = "Root"
    Spine = "Spine"
    Head = "Head"
    LeftArm = "LeftArm"
    RightArm = "RightArm"
    LeftLeg = "LeftLeg"
    RightLeg = "RightLeg"
    LeftHand = "LeftHand"
    RightHand = "RightHand"


# Partition of the neutral rig's joints. Total and disjoint; checked by test.
REGION_JOINTS = {
    BodyRegion.Root: ("Hips",),
    BodyRegion.Spine: ("Spine1", "Spine2", "Spine3"),
    BodyRegion.Head: ("Neck", "Head", "HeadTop"),
    BodyRegion.LeftArm: ("LeftShoulder", "LeftUpperArm", "LeftForearm"),
    BodyRegion.RightArm: ("RightShoulder", "RightUpperArm", "RightForearm"),
    BodyRegion.LeftHand: ("LeftHand",),
    BodyRegion.RightHand: ("RightHand",),
    BodyRegion.LeftLeg: ("LeftUpperLeg", "LeftLowerLeg", "LeftFoot", "LeftToe"),
    BodyRegion.RightLeg: ("RightUpperLeg", "RightLowerLeg", "RightFoot", "RightToe"),
}


def _joint(name, parent, offset):
    return Joint(name, parent, np.array(offset, dtype=float), identity_quat())


def neutral_skeleton() -> Skeleton:
    """The 23-joint neutral character, 1.80 m tall, T-pose along +/-X."""
    j = [
        _joint("Hips", None, (0, 0, 0)),
        _joint("Spine1", 0, (0, 0.10, 0)),
        _joint("Spine2", 1, (0, 0.15, 0)),
        _joint("Spine3", 2, (0, 0.15, 0)),
        _joint("Neck", 3, (0, 0.12, 0)),
        _joint("Head", 4, (0, 0.08, 0)),
        _joint("HeadTop", 5, (0, 0.25, 0)),
        _joint("LeftShoulder", 3, (0, 0.10, -0.08)),
        _joint("LeftUpperArm", 7, (0, 0, -0.12)),
        _joint("LeftForearm", 8, (0, 0, -0.28)),
        _joint("LeftHand", 9, (0, 0, -0.26)),
        _joint("RightShoulder", 3, (0, 0.10, 0.08)),
        _joint("RightUpperArm", 11, (0, 0, 0.12)),
        _joint("RightForearm", 12, (0, 0, 0.28)),
        _joint("RightHand", 13, (0, 0, 0.26)),
        _joint("LeftUpperLeg", 0, (0, -0.05, -0.09)),
        _joint("LeftLowerLeg", 15, (0, -0.42, 0)),
        _joint("LeftFoot", 16, (0, -0.43, 0)),
        _joint("LeftToe", 17, (0.15, -0.05, 0)),
        _joint("RightUpperLeg", 0, (0, -0.05, 0.09)),
        _joint("RightLowerLeg", 19, (0, -0.42, 0)),
        _joint("RightFoot", 20, (0, -0.43, 0)),
        _joint("RightToe", 21, (0.15, -0.05, 0)),
    ]
    return Skeleton(j, NEUTRAL_HEIGHT)


def region_indices(skeleton: Skeleton) -> dict[BodyRegion, np.ndarray]:
    """Joint-index arrays per region for a rig using the neutral names."""
    out = {}
    for region, names in REGION_JOINTS.items():
        out[region] = np.array([skeleton.name_index[n] for n in names], dtype=np.int64)
    return out


# Capture-suit rig: 22 body segments plus 10 finger segments = 32, which is
# the hard cap of the device stream. Names follow common suit exports, so the
# alias table below carries them onto the neutral rig; fingers stay unmapped.
_DEVICE_FINGERS = ("Thumb", "Index", "Middle", "Ring", "Pinky")


def device_skeleton(height: float = 1.75) -> Skeleton:
    s = height / 1.75
    j = [
        _joint("Hips", None, (0, 0, 0)),
        _joint("Spine", 0, (0, 0.11 * s, 0)),
        _joint("Chest", 1, (0, 0.14 * s, 0)),
        _joint("UpperChest", 2, (0, 0.14 * s, 0)),
        _joint("Neck", 3, (0, 0.12 * s, 0)),
        _joint("Head", 4, (0, 0.09 * s, 0)),
        _joint("LeftShoulder", 3, (0, 0.09 * s, -0.07 * s)),
        _joint("LeftArm", 6, (0, 0, -0.12 * s)),
        _joint("LeftForeArm", 7, (0, 0, -0.27 * s)),
        _joint("LeftHand", 8, (0, 0, -0.25 * s)),
        _joint("RightShoulder", 3, (0, 0.09 * s, 0.07 * s)),
        _joint("RightArm", 10, (0, 0, 0.12 * s)),
        _joint("RightForeArm", 11, (0, 0, 0.27 * s)),
        _joint("RightHand", 12, (0, 0, 0.25 * s)),
        _joint("LeftUpLeg", 0, (0, -0.06 * s, -0.09 * s)),
        _joint("LeftLeg", 14, (0, -0.40 * s, 0)),
        _joint("LeftFoot", 15, (0, -0.41 * s, 0)),
        _joint("LeftToeBase", 16, (0.14 * s, -0.05 * s, 0)),
        _joint("RightUpLeg", 0, (0, -0.06 * s, 0.09 * s)),
        _joint("RightLeg", 18, (0, -0.40 * s, 0)),
        _joint("RightFoot", 19, (0, -0.41 * s, 0)),
        _joint("RightToeBase", 20, (0.14 * s, -0.05 * s, 0)),
    ]
    for side, hand_idx, sign in (("Left", 9, -1.0), ("Right", 13, 1.0)):
        for k, finger in enumerate(_DEVICE_FINGERS):
            off = (0.02 * s * (k - 2), -0.01 * s, sign * 0.09 * s)
            j.append(_joint(f"{side}Hand{finger}", hand_idx, off))
    assert len(j) == 32
    return Skeleton(j, height)


# source name -> neutral name, for stage-1 retargeting of the device rig.
DEVICE_TO_NEUTRAL_ALIASES = {
    "Spine": "Spine1",
    "Chest": "Spine2",
    "UpperChest": "Spine3",
    "LeftArm": "LeftUpperArm",
    "LeftForeArm": "LeftForearm",
    "RightArm": "RightUpperArm",
    "RightForeArm": "RightForearm",
    "LeftUpLeg": "LeftUpperLeg",
    "LeftLeg": "LeftLowerLeg",
    "LeftToeBase": "LeftToe",
    "RightUpLeg": "RightUpperLeg",
    "RightLeg": "RightLowerLeg",
    "RightToeBase": "RightToe",
}


def scaled_copy(skeleton: Skeleton, factor: float) -> Skeleton:
    """Uniformly scaled copy of a rig (same names, same topology)."""
    joints = [
        Joint(j.name, j.parent, j.bind_offset * factor, j.bind_rotation.copy())
        for j in skeleton.joints
    ]
    return Skeleton(joints, skeleton.height * factor)


def demo_avatar() -> Skeleton:
    """A 40-joint show avatar: the neutral rig scaled to 2.20 m plus
    ornament chains (tail, ears, antenna, cloth) that no source drives."""
    factor = 2.20 / NEUTRAL_HEIGHT
    base = scaled_copy(neutral_skeleton(), factor)
    joints = list(base.joints)
    hips = 0
    head = base.name_index["Head"]

    def add(name, parent, offset):
        joints.append(_joint(name, parent, offset))
        return len(joints) - 1

    t1 = add("Tail1", hips, (-0.18, -0.02, 0))
    t2 = add("Tail2", t1, (-0.16, -0.04, 0))
    t3 = add("Tail3", t2, (-0.14, -0.04, 0))
    add("Tail4", t3, (-0.12, -0.03, 0))
    le1 = add("LeftEar1", head, (0, 0.10, -0.07))
    add("LeftEar2", le1, (0, 0.12, -0.03))
    re1 = add("RightEar1", head, (0, 0.10, 0.07))
    add("RightEar2", re1, (0, 0.12, 0.03))
    a1 = add("Antenna1", head, (0.02, 0.16, 0))
    a2 = add("Antenna2", a1, (0.02, 0.12, 0))
    add("Antenna3", a2, (0.02, 0.10, 0))
    c1 = add("ClothFront1", hips, (0.12, -0.10, 0))
    add("ClothFront2", c1, (0.04, -0.22, 0))
    c2 = add("ClothBack1", hips, (-0.12, -0.10, 0))
    add("ClothBack2", c2, (-0.04, -0.22, 0))
    add("LeftWing", base.name_index["Spine3"], (-0.10, 0.05, -0.20))
    add("RightWing", base.name_index["Spine3"], (-0.10, 0.05, 0.20))
    assert len(joints) == 40
    return Skeleton(joints, 2.20)
