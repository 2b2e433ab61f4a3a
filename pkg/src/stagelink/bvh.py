"""BVH parsing and clip replay.

Replay clips stand in for the live capture suit so a whole show can be run
reproducibly from files. The parser covers the de-facto BVH grammar: a
HIERARCHY of ROOT/JOINT/End Site blocks with OFFSET and CHANNELS, then a
MOTION block with Frames, Frame Time and one line of floats per frame.

Supported rotation channel orders: ZXY, XYZ, ZYX. Offsets become bind
offsets; bind rotations are identity (BVH has no bind orientation). End
Sites become channel-less joints named ``<parent>_End`` so the rig keeps its
full extent. Every parse failure raises BvhError with a line number; the
parser never crashes on malformed text.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import quat_mul, slerp_batch
from .skeleton import (
    Joint,
    Pose,
    Skeleton,
    forward_kinematics,
    identity_quat,
    validate_skeleton,
)

SUPPORTED_ROTATION_ORDERS = ("ZXY", "XYZ", "ZYX")

_POSITION_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}
_ROTATION_CHANNELS = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}


class BvhError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class MotionClip:
    skeleton: Skeleton
    frames: list[Pose]
    frame_time: float

    def duration(self) -> float:
        return max(0, len(self.frames) - 1) * self.frame_time


def _axis_quat(axis: str, deg: float) -> np.ndarray:
    half = math.radians(deg) / 2.0
    s, c = math.sin(half), math.cos(half)
    if axis == "X":
        return np.array([s, 0.0, 0.0, c])
    if axis == "Y":
        return np.array([0.0, s, 0.0, c])
    return np.array([0.0, 0.0, s, c])


def quat_from_euler(order: str, degrees) -> np.ndarray:
    """Compose intrinsic rotations in channel order (first channel outermost)."""
    q = _axis_quat(order[0], degrees[0])
    q = quat_mul(q, _axis_quat(order[1], degrees[1]))
    q = quat_mul(q, _axis_quat(order[2], degrees[2]))
    return q


class _Tokens:
    """Whitespace tokens with line tracking for diagnostics."""

    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0
        self.last_line = self.items[-1][1] if self.items else 1

    def peek(self):
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def line(self) -> int:
        return self.items[self.pos][1] if self.pos < len(self.items) else self.last_line

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise BvhError(f"unexpected end of file, expected {what}", self.last_line)
        tok, _ = self.items[self.pos]
        self.pos += 1
        return tok

    def expect(self, literal: str):
        line = self.line()
        tok = self.next(repr(literal))
        if tok != literal:
            raise BvhError(f"expected {literal!r}, found {tok!r}", line)

    def number(self, what: str) -> float:
        line = self.line()
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise BvhError(f"expected {what}, found {tok!r}", line) from None

    def integer(self, what: str) -> int:
        line = self.line()
        v = self.number(what)
        if v != int(v):
            raise BvhError(f"expected integer {what}, found {v}", line)
        return int(v)


@dataclass
class _JointChannels:
    joint_index: int
    position_cols: dict  # channel slot -> axis index (root only)
    rotation_order: str  # "" when the joint has no rotation channels
    rotation_slots: list  # slots of the rotation channels in channel order


def parse_bvh(text: str) -> MotionClip:
    """Parse BVH text into a MotionClip (see module docstring for coverage)."""
    tokens = _Tokens(text)
    if tokens.peek() is None:
        raise BvhError("empty input", 1)
    tokens.expect("HIERARCHY")
    tokens.expect("ROOT")

    joints: list[Joint] = []
    channel_map: list[_JointChannels] = []
    total_channels = 0

    def parse_joint(name_needed: bool, parent: int | None):
        nonlocal total_channels
        if name_needed:
            name = tokens.next("joint name")
        else:
            name = f"{joints[parent].name}_End"
        tokens.expect("{")
        tokens.expect("OFFSET")
        off = [tokens.number("offset component") for _ in range(3)]
        index = len(joints)
        joints.append(Joint(name, parent, np.array(off), identity_quat()))
        if name_needed:
            tokens.expect("CHANNELS")
            count_line = tokens.line()
            count = tokens.integer("channel count")
            pos_cols = {}
            rot_axes = []
            rot_slots = []
            for _ in range(count):
                ch_line = tokens.line()
                ch = tokens.next("channel name")
                slot = total_channels
                total_channels += 1
                if ch in _POSITION_CHANNELS:
                    pos_cols[slot] = _POSITION_CHANNELS[ch]
                elif ch in _ROTATION_CHANNELS:
                    rot_axes.append(_ROTATION_CHANNELS[ch])
                    rot_slots.append(slot)
                else:
                    raise BvhError(f"unsupported channel name {ch!r}", ch_line)
            order = "".join(rot_axes)
            if order and order not in SUPPORTED_ROTATION_ORDERS:
                raise BvhError(
                    f"unsupported rotation order {order!r} "
                    f"(supported: {', '.join(SUPPORTED_ROTATION_ORDERS)})",
                    count_line,
                )
            channel_map.append(_JointChannels(index, pos_cols, order, rot_slots))
        while True:
            tok = tokens.peek()
            if tok == "JOINT":
                tokens.expect("JOINT")
                parse_joint(True, index)
            elif tok == "End":
                tokens.expect("End")
                tokens.expect("Site")
                parse_joint(False, index)
            elif tok == "}":
                tokens.expect("}")
                return
            else:
                raise BvhError(
                    f"expected JOINT, End Site or '}}', found {tok!r}", tokens.line()
                )

    parse_joint(True, None)

    hierarchy_end = tokens.line()
    skeleton = _make_skeleton(joints)
    violations = validate_skeleton(skeleton)
    if violations:
        raise BvhError("invalid hierarchy: " + "; ".join(violations), hierarchy_end)

    tokens.expect("MOTION")
    tokens.expect("Frames:")
    frame_count = tokens.integer("frame count")
    frame_line = tokens.line()
    word = tokens.next("'Frame Time:'")
    word2 = tokens.next("'Frame Time:'")
    if (word, word2) != ("Frame", "Time:"):
        raise BvhError(f"expected 'Frame Time:', found {word!r} {word2!r}", frame_line)
    frame_time = tokens.number("frame time")
    if frame_time <= 0:
        raise BvhError(f"frame time must be positive, got {frame_time}", frame_line)

    root_channels = channel_map[0]
    frames: list[Pose] = []
    for f in range(frame_count):
        if tokens.peek() is None:
            raise BvhError(
                f"frame count mismatch: declared {frame_count}, found {f}", tokens.line()
            )
        values = np.empty(total_channels)
        for c in range(total_channels):
            values[c] = tokens.number(f"channel value {c} of frame {f}")
        rots = np.tile(identity_quat(), (len(joints), 1))
        for jc in channel_map:
            if jc.rotation_order:
                degs = [values[s] for s in jc.rotation_slots]
                rots[jc.joint_index] = quat_from_euler(jc.rotation_order, degs)
        root_t = np.zeros(3)
        for slot, axis in root_channels.position_cols.items():
            root_t[axis] = values[slot]
        frames.append(Pose(rots, root_t, timestamp=f * frame_time))
    if tokens.peek() is not None:
        raise BvhError(
            f"frame count mismatch: declared {frame_count}, file has extra data",
            tokens.line(),
        )
    return MotionClip(skeleton, frames, frame_time)


def _make_skeleton(joints: list[Joint]) -> Skeleton:
    probe = Skeleton(joints, 1.0)
    pos, _ = forward_kinematics(probe, Pose.rest(probe))
    extent = float(pos[:, 1].max() - pos[:, 1].min())
    return Skeleton(joints, extent if extent > 0 else 1.0)


def sample_clip(clip: MotionClip, t: float) -> Pose:
    """Pose at time t: slerp between the bracketing frames, clamped at the end."""
    if not clip.frames:
        raise ValueError("cannot sample an empty clip")
    if t < 0:
        raise ValueError(f"sample time must be >= 0, got {t}")
    last = len(clip.frames) - 1
    i = int(t / clip.frame_time)
    if i >= last:
        out = clip.frames[last].copy()
        out.timestamp = t
        return out
    u = t / clip.frame_time - i
    a, b = clip.frames[i], clip.frames[i + 1]
    if u == 0.0:
        out = a.copy()
        out.timestamp = t
        return out
    rots = slerp_batch(a.local_rotations, b.local_rotations, u)
    root = a.root_translation + u * (b.root_translation - a.root_translation)
    return Pose(rots, root, timestamp=t)
