"""Motion retargeting between rigs of different morphology.

One operation, applied twice per tick: capture rig onto the neutral
character, then neutral onto the show avatar. Joints are matched by name
(with an alias table for vendor naming), rotations are copied with a
bind-pose correction, and the root translation scales with the height ratio
so a source standing on the floor keeps its feet on the floor.

Joints the map does not cover stay in their rest pose, which makes a dropped
mapping fail loudly instead of freezing at a stale rotation.
"""

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .kernels import (
    IDENTITY_QUAT,
    quat_conjugate,
    quat_mul,
    quat_mul_batch,
    quat_normalize_batch,
)
from .skeleton import Pose, Skeleton, SkeletonMismatch


class RetargetError(ValueError):
    pass


class RootUnmapped(RetargetError):
    """The destination root found no source joint; retargeting is impossible."""


@dataclass(frozen=True)
class JointMap:
    entries: tuple[tuple[int, int], ...]  # (source index, destination index)
    unmapped_dest: tuple[int, ...]

    def __post_init__(self):
        seen = set()
        for _, d in self.entries:
            if d in seen:
                raise RetargetError(f"destination joint {d} mapped twice")
            seen.add(d)


def build_joint_map(
    source: Skeleton, dest: Skeleton, aliases: Optional[Mapping[str, str]] = None
) -> JointMap:
    """Match joints by exact name, then through the alias table.

    Aliases map source names to destination names. Destination joints left
    over are recorded as unmapped; an unmapped destination root is fatal.
    """
    aliases = aliases or {}
    dest_index = dest.name_index
    taken: dict[int, int] = {}
    for s_idx, joint in enumerate(source.joints):
        d_idx = dest_index.get(joint.name)
        if d_idx is None:
            alias = aliases.get(joint.name)
            if alias is not None:
                d_idx = dest_index.get(alias)
        if d_idx is not None and d_idx not in taken:
            taken[d_idx] = s_idx
    unmapped = tuple(i for i in range(len(dest)) if i not in taken)
    dest_root = int(np.flatnonzero(dest.parents == -1)[0])
    if dest_root in unmapped:
        raise RootUnmapped(
            f"destination root {dest.joints[dest_root].name!r} has no source joint"
        )
    entries = tuple(sorted((s, d) for d, s in taken.items()))
    return JointMap(entries, unmapped)


class RetargetProfile:
    """Precomputed mapping between a source and a destination rig.

    Built once at session setup; per frame the retarget is a rotation copy
    (joints whose bind rotations already agree) or one quaternion product
    per mapped joint.
    """

    def __init__(
        self,
        source: Skeleton,
        dest: Skeleton,
        joint_map: JointMap,
        height_ratio: Optional[float] = None,
    ):
        self.source = source
        self.dest = dest
        self.joint_map = joint_map
        self.height_ratio = (
            dest.height / source.height if height_ratio is None else float(height_ratio)
        )
        if not self.height_ratio > 0:
            raise RetargetError(f"height ratio must be positive, got {self.height_ratio}")
        self.src_indices = np.array([s for s, _ in joint_map.entries], dtype=np.int64)
        self.dst_indices = np.array([d for _, d in joint_map.entries], dtype=np.int64)
        # bind correction: dest_bind^-1 * src_bind, per mapped joint
        corr = np.empty((len(self.src_indices), 4))
        for k, (s, d) in enumerate(joint_map.entries):
            corr[k] = quat_mul(
                quat_conjugate(dest.bind_rotations[d]), source.bind_rotations[s]
            )
        self.corrections = corr
        self.trivial = bool(np.all(np.abs(corr - IDENTITY_QUAT) < 1e-12))

    @classmethod
    def build(
        cls,
        source: Skeleton,
        dest: Skeleton,
        aliases: Optional[Mapping[str, str]] = None,
        height_ratio: Optional[float] = None,
    ) -> "RetargetProfile":
        return cls(source, dest, build_joint_map(source, dest, aliases), height_ratio)


def retarget(pose: Pose, profile: RetargetProfile) -> Pose:
    """Map a pose from the profile's source rig onto its destination rig."""
    if pose.joint_count() != len(profile.source):
        raise SkeletonMismatch(
            f"pose has {pose.joint_count()} joints, profile source has {len(profile.source)}"
        )
    rots = np.tile(IDENTITY_QUAT, (len(profile.dest), 1))
    src_rots = pose.local_rotations[profile.src_indices]
    if profile.trivial:
        rots[profile.dst_indices] = src_rots
    else:
        rots[profile.dst_indices] = quat_normalize_batch(
            quat_mul_batch(profile.corrections, src_rots)
        )
    root = pose.root_translation * profile.height_ratio
    return Pose(rots, root, pose.timestamp)
