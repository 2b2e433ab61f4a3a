"""The puppeteer: a blender of motion sources, not a person.

Several acting inputs — capture streams, replay clips, gamepad reference
moves, the pathfinder — each cover some body regions; the puppeteer folds
them, region by region, into one neutral-character pose per tick. Weighted
slerp is applied in the configured source order (the fold is order-dependent
and the order is part of the config, on purpose: it keeps blending cheap and
bit-deterministic).

Regions whose sources have no data yet hold the last blended value when one
exists, otherwise the rest pose; either way the condition is flagged so
operators can see degraded input.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .kernels import IDENTITY_QUAT, quat_mul, quat_normalize, slerp_batch
from .rigs import BodyRegion, region_indices
from .skeleton import Pose, Skeleton
from .stagespace import yaw_quat

WEIGHT_SUM_TOL = 1e-9


class PuppeteerError(ValueError):
    pass


class DuplicateInput(PuppeteerError):
    pass


class InputKind(Enum):
    MocapStream = "MocapStream"
    Replay = "Replay"
    Gamepad = "Gamepad"
    Pathfinder = "Pathfinder"


@dataclass
class RefMoveDelta:
    """A root-space nudge: floor-plane translation plus a yaw, both deltas."""

    translation: np.ndarray  # (3,)
    yaw_deg: float

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float)

    def inverted(self) -> "RefMoveDelta":
        return RefMoveDelta(-self.translation, -self.yaw_deg)


@dataclass
class ActingInput:
    id: str
    kind: InputKind
    regions: frozenset  # BodyRegion capability set
    latest: Optional[Pose] = None  # pose-bearing kinds
    latest_delta: Optional[RefMoveDelta] = None  # gamepad kind
    updated_at_tick: int = -1


@dataclass(frozen=True)
class PuppeteerConfig:
    """Per-region ordered source lists: region -> ((input id, weight), ...).

    Weights in a non-empty region must sum to 1.
    """

    routes: dict

    def __post_init__(self):
        for region, sources in self.routes.items():
            if not isinstance(region, BodyRegion):
                raise PuppeteerError(f"bad region key {region!r}")
            if not sources:
                continue
            total = sum(w for _, w in sources)
            if any(w < 0 for _, w in sources):
                raise PuppeteerError(f"negative weight in region {region.value}")
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                raise PuppeteerError(
                    f"weights for region {region.value} sum to {total}, expected 1"
                )

    @classmethod
    def solo(cls, input_id: str) -> "PuppeteerConfig":
        return cls({region: ((input_id, 1.0),) for region in BodyRegion})


class RegionStatus(Enum):
    Ok = "ok"
    Partial = "partial"  # some of the configured sources had no data
    Held = "held"  # no data at all; last blended value reused
    Rest = "rest"  # no data and nothing to hold; rest pose


@dataclass
class BlendResult:
    pose: Pose
    region_status: dict  # BodyRegion -> RegionStatus


class Puppeteer:
    """Input registry plus the per-region blend state for one neutral rig."""

    def __init__(self, skeleton: Skeleton, config: Optional[PuppeteerConfig] = None):
        self.skeleton = skeleton
        self.config = config or PuppeteerConfig({r: () for r in BodyRegion})
        self.inputs: dict[str, ActingInput] = {}
        self._region_idx = region_indices(skeleton)
        self._rest_root = skeleton.rest_root_translation()
        self._held_rotations: dict[BodyRegion, np.ndarray] = {}
        self._held_root: Optional[np.ndarray] = None

    def register_input(self, input_id: str, kind: InputKind, regions=None) -> ActingInput:
        if input_id in self.inputs:
            raise DuplicateInput(f"input id {input_id!r} already registered")
        caps = frozenset(regions) if regions else frozenset(BodyRegion)
        handle = ActingInput(input_id, kind, caps)
        self.inputs[input_id] = handle
        return handle

    def set_config(self, config: PuppeteerConfig):
        for region, sources in config.routes.items():
            for input_id, _ in sources:
                if input_id not in self.inputs:
                    raise PuppeteerError(
                        f"region {region.value} routes to unknown input {input_id!r}"
                    )
        self.config = config

    def blend(self, snapshots: dict, timestamp: float = 0.0) -> BlendResult:
        """Fold the region sources into one neutral pose.

        snapshots: input id -> Pose (neutral space). Inputs listed in the
        config but absent from the snapshot are treated as having no data.
        """
        nj = len(self.skeleton)
        rotations = np.tile(IDENTITY_QUAT, (nj, 1))
        root = self._rest_root.copy()
        status: dict[BodyRegion, RegionStatus] = {}
        for region in BodyRegion:
            sources = self.config.routes.get(region, ())
            idx = self._region_idx[region]
            available = [(sid, w) for sid, w in sources if snapshots.get(sid) is not None]
            if not sources:
                status[region] = RegionStatus.Rest
                continue
            if not available:
                held = self._held_rotations.get(region)
                if held is not None:
                    rotations[idx] = held
                    if region is BodyRegion.Root and self._held_root is not None:
                        root = self._held_root.copy()
                    status[region] = RegionStatus.Held
                else:
                    status[region] = RegionStatus.Rest
                continue
            first_id, w0 = available[0]
            acc = snapshots[first_id].local_rotations[idx].copy()
            cum = w0
            if region is BodyRegion.Root:
                acc_root = snapshots[first_id].root_translation.copy()
            for sid, w in available[1:]:
                cum += w
                if w == 0.0:
                    continue
                t = w / cum
                acc = slerp_batch(acc, snapshots[sid].local_rotations[idx], t)
                if region is BodyRegion.Root:
                    nxt = snapshots[sid].root_translation
                    acc_root = acc_root + t * (nxt - acc_root)
            rotations[idx] = acc
            self._held_rotations[region] = acc.copy()
            if region is BodyRegion.Root:
                root = acc_root
                self._held_root = acc_root.copy()
            status[region] = (
                RegionStatus.Ok if len(available) == len(sources) else RegionStatus.Partial
            )
        return BlendResult(Pose(rotations, root, timestamp), status)


def apply_ref_move(pose: Pose, delta: RefMoveDelta) -> Pose:
    """Turn the pose in place by the delta's yaw, then offset its root.

    The pivot is the root's own floor position, so the yaw changes facing
    without moving the character; limb rotations come back bit-identical.
    """
    out = pose.copy()
    if delta.yaw_deg != 0.0:
        out.local_rotations[0] = quat_normalize(
            quat_mul(yaw_quat(delta.yaw_deg), pose.local_rotations[0])
        )
    out.root_translation = out.root_translation + delta.translation
    return out


@dataclass
class GamepadMapper:
    """Stick axes to reference-move deltas, per tick.

    Left stick: floor-plane translation at translate_speed m/s. Right stick
    X: yaw at yaw_speed deg/s. Axes inside the dead zone contribute nothing.
    """

    translate_speed: float = 1.5
    yaw_speed: float = 90.0
    dead_zone: float = 0.1

    def _dz(self, v: float) -> float:
        return 0.0 if abs(v) < self.dead_zone else v

    def delta(self, left_x: float, left_y: float, right_x: float, dt: float) -> RefMoveDelta:
        lx, ly, rx = self._dz(left_x), self._dz(left_y), self._dz(right_x)
        translation = np.array(
            [ly * self.translate_speed * dt, 0.0, lx * self.translate_speed * dt]
        )
        return RefMoveDelta(translation, -rx * self.yaw_speed * dt)

    def is_idle(self, left_x: float, left_y: float, right_x: float) -> bool:
        return not any((self._dz(left_x), self._dz(left_y), self._dz(right_x)))
