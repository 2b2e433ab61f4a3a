"""Navmesh pathfinding and the control handoff.

A uniform grid over the digital stage stands in for the navmesh: cells are
walkable unless they overlap an obstacle, adjacency is 8-connected with no
corner cutting. A* runs over cell centers with Euclidean distance to the
goal as the (admissible) heuristic; ties break on lower heuristic, then
row-major cell index, so identical queries always return identical paths.

Control of the avatar's root alternates between the performer and the
pathfinder. Takeover and release are explicit operator acts; while the
pathfinder drives locomotion the performer keeps every limb, and a release
may snap the avatar onto a named preset mark.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from . import kernels
from .skeleton import Pose
from .kernels import quat_mul, quat_normalize
from .stagespace import facing_of, wrap_deg, yaw_quat

DEFAULT_CELL_SIZE = 0.25
DEFAULT_SPEED = 1.2  # m/s, a comfortable human walk


class PathfindError(ValueError):
    pass


class EmptyMesh(PathfindError):
    pass


class InvalidEndpoint(PathfindError):
    pass


class NoPath(PathfindError):
    pass


class WrongOwner(PathfindError):
    pass


class AlreadyOwned(PathfindError):
    pass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned floor rectangle (x0, z0) to (x1, z1), normalized."""

    x0: float
    z0: float
    x1: float
    z1: float

    def __post_init__(self):
        x0, x1 = sorted((float(self.x0), float(self.x1)))
        z0, z1 = sorted((float(self.z0), float(self.z1)))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "z1", z1)

    def degenerate(self) -> bool:
        return self.x1 <= self.x0 or self.z1 <= self.z0

    def center(self) -> np.ndarray:
        return np.array([(self.x0 + self.x1) / 2.0, (self.z0 + self.z1) / 2.0])

    def contains(self, p) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.z0 <= p[1] <= self.z1

    def overlaps_open(self, other: "Rect") -> bool:
        """Positive-area overlap; touching edges do not count."""
        return (
            self.x0 < other.x1
            and other.x0 < self.x1
            and self.z0 < other.z1
            and other.z0 < self.z1
        )


class NavMesh:
    def __init__(self, origin, cell_size: float, width: int, height: int, walkable):
        if cell_size <= 0:
            raise PathfindError(f"cell size must be positive, got {cell_size}")
        if width < 1 or height < 1:
            raise PathfindError("mesh must be at least 1x1 cells")
        self.origin = np.asarray(origin, dtype=float)
        self.cell_size = float(cell_size)
        self.width = int(width)
        self.height = int(height)
        self.walkable = np.asarray(walkable, dtype=bool).reshape(height, width)
        self._flat = np.ascontiguousarray(self.walkable.reshape(-1).astype(np.uint8))

    def cell_of(self, p) -> Optional[tuple[int, int]]:
        ix = math.floor((p[0] - self.origin[0]) / self.cell_size)
        iz = math.floor((p[1] - self.origin[1]) / self.cell_size)
        if 0 <= ix < self.width and 0 <= iz < self.height:
            return ix, iz
        return None

    def cell_center(self, ix: int, iz: int) -> np.ndarray:
        return self.origin + (np.array([ix, iz], dtype=float) + 0.5) * self.cell_size

    def walkable_count(self) -> int:
        return int(self.walkable.sum())


def build_navmesh(bounds: Rect, obstacles, cell_size: float = DEFAULT_CELL_SIZE) -> NavMesh:
    """Grid the stage; a cell is walkable iff its square overlaps no obstacle."""
    if cell_size <= 0:
        raise PathfindError(f"cell size must be positive, got {cell_size}")
    if bounds.degenerate():
        raise PathfindError(f"stage bounds are degenerate: {bounds}")
    width = max(1, math.ceil((bounds.x1 - bounds.x0) / cell_size - 1e-9))
    height = max(1, math.ceil((bounds.z1 - bounds.z0) / cell_size - 1e-9))
    walkable = np.ones((height, width), dtype=bool)
    for obs in obstacles:
        for iz in range(height):
            for ix in range(width):
                if not walkable[iz, ix]:
                    continue
                cell = Rect(
                    bounds.x0 + ix * cell_size,
                    bounds.z0 + iz * cell_size,
                    bounds.x0 + (ix + 1) * cell_size,
                    bounds.z0 + (iz + 1) * cell_size,
                )
                if cell.overlaps_open(obs):
                    walkable[iz, ix] = False
    if not walkable.any():
        raise EmptyMesh("no walkable cells remain after applying obstacles")
    return NavMesh((bounds.x0, bounds.z0), cell_size, width, height, walkable)


class Path:
    """A* result: waypoint polyline (cell centers, then the goal point)."""

    def __init__(self, waypoints: np.ndarray, total_cost: float):
        self.waypoints = np.asarray(waypoints, dtype=float)
        self.total_cost = float(total_cost)
        deltas = np.diff(self.waypoints, axis=0)
        self.segment_lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        self.cum_lengths = np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    def point_at(self, s: float) -> np.ndarray:
        """Arc-length point on the polyline, clamped to its ends."""
        s = min(max(s, 0.0), float(self.cum_lengths[-1]))
        i = int(np.searchsorted(self.cum_lengths, s, side="right") - 1)
        i = min(i, len(self.segment_lengths) - 1) if len(self.segment_lengths) else 0
        if len(self.segment_lengths) == 0:
            return self.waypoints[0].copy()
        seg = self.segment_lengths[i]
        if seg == 0.0:
            return self.waypoints[i].copy()
        u = (s - self.cum_lengths[i]) / seg
        return self.waypoints[i] + u * (self.waypoints[i + 1] - self.waypoints[i])

    def yaw_at(self, s: float) -> Optional[float]:
        """Facing along the segment containing arc length s (None if degenerate)."""
        if len(self.segment_lengths) == 0:
            return None
        s = min(max(s, 0.0), float(self.cum_lengths[-1]))
        i = int(np.searchsorted(self.cum_lengths, s, side="right") - 1)
        i = min(i, len(self.segment_lengths) - 1)
        for k in range(i, -1, -1):  # skip zero-length tail segments
            if self.segment_lengths[k] > 0.0:
                d = self.waypoints[k + 1] - self.waypoints[k]
                return wrap_deg(math.degrees(math.atan2(d[1], d[0])))
        for k in range(i + 1, len(self.segment_lengths)):
            if self.segment_lengths[k] > 0.0:
                d = self.waypoints[k + 1] - self.waypoints[k]
                return wrap_deg(math.degrees(math.atan2(d[1], d[0])))
        return None


def find_path(mesh: NavMesh, start, goal, debug: bool = False) -> Path:
    """Optimal-cost route between two stage points.

    Cost is cell_size per orthogonal step and sqrt(2) * cell_size per
    diagonal, plus the final leg from the last cell center to the exact goal
    point. The reported total is reconstructed from step counts so that
    equal-cost paths always report bit-identical totals.
    """
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    sc = mesh.cell_of(start)
    gc = mesh.cell_of(goal)
    if sc is None or gc is None:
        raise InvalidEndpoint(f"start {start} or goal {goal} is outside the stage")
    if not mesh.walkable[sc[1], sc[0]]:
        raise InvalidEndpoint(f"start {start} is inside an obstacle")
    if not mesh.walkable[gc[1], gc[0]]:
        raise InvalidEndpoint(f"goal {goal} is inside an obstacle")
    s_idx = sc[1] * mesh.width + sc[0]
    g_idx = gc[1] * mesh.width + gc[0]
    runner = kernels.astar_grid_debug if debug else kernels.astar_grid
    result = runner(mesh._flat, mesh.width, mesh.height, s_idx, g_idx, debug)
    if result is None:
        raise NoPath(f"no route from {start} to {goal}")
    cells, n_orth, n_diag = result
    points = [mesh.cell_center(idx % mesh.width, idx // mesh.width) for idx in cells]
    grid_cost = n_orth * mesh.cell_size + n_diag * (mesh.cell_size * math.sqrt(2.0))
    tail = math.hypot(goal[0] - points[-1][0], goal[1] - points[-1][1])
    if tail > 0.0:
        points.append(goal.copy())
    return Path(np.array(points), grid_cost + tail)


# ---------------------------------------------------------------------------
# Control handoff


class ControlOwner(Enum):
    MocaptorFull = "MocaptorFull"
    PathfinderLocomotion = "PathfinderLocomotion"


@dataclass(frozen=True)
class Preset:
    name: str
    position: np.ndarray  # (2,) in D
    yaw_deg: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class Zone:
    """Paired action areas: a patch of capture space and its digital twin."""

    id: str
    rect_b: Rect
    rect_d: Rect
    release_yaw_deg: float

    def as_preset(self) -> Preset:
        return Preset(self.id, self.rect_d.center(), self.release_yaw_deg)


@dataclass(frozen=True)
class ZoneMap:
    zones: tuple

    def __post_init__(self):
        ids = [z.id for z in self.zones]
        if len(set(ids)) != len(ids):
            raise PathfindError("zone ids must be unique")
        for z in self.zones:
            if z.rect_b.degenerate() or z.rect_d.degenerate():
                raise PathfindError(f"zone {z.id!r} has a degenerate rectangle")

    def get(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise PathfindError(f"unknown zone {zone_id!r}")

    def zone_containing_b(self, p) -> Optional[Zone]:
        for z in self.zones:
            if z.rect_b.contains(p):
                return z
        return None


@dataclass(frozen=True)
class ControlState:
    owner: ControlOwner = ControlOwner.MocaptorFull
    active_path: Optional[Path] = None
    progress: float = 0.0
    speed: float = DEFAULT_SPEED

    def check_invariant(self):
        has_path = self.active_path is not None
        if has_path != (self.owner is ControlOwner.PathfinderLocomotion):
            raise PathfindError(
                f"owner {self.owner.value} with active_path={'set' if has_path else 'none'}"
            )


@dataclass(frozen=True)
class TakeOver:
    goal: np.ndarray  # (2,) in D
    speed: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float))


@dataclass(frozen=True)
class Release:
    preset: Optional[Preset] = None


@dataclass
class TransitionResult:
    state: ControlState
    # set on release: where the avatar root lands (position, yaw), in D
    snap: Optional[tuple[np.ndarray, float]] = None


def control_transition(
    state: ControlState, command, mesh: NavMesh, current_pos
) -> TransitionResult:
    """Apply a takeover/release command; raises and leaves state untouched on
    refusal (wrong owner, no path)."""
    if isinstance(command, TakeOver):
        if state.owner is ControlOwner.PathfinderLocomotion:
            raise AlreadyOwned("pathfinder already owns locomotion")
        path = find_path(mesh, current_pos, command.goal)
        speed = state.speed if command.speed is None else float(command.speed)
        new = ControlState(ControlOwner.PathfinderLocomotion, path, 0.0, speed)
        new.check_invariant()
        return TransitionResult(new)
    if isinstance(command, Release):
        if state.owner is not ControlOwner.PathfinderLocomotion:
            raise WrongOwner("release requires the pathfinder to own locomotion")
        new = ControlState(ControlOwner.MocaptorFull, None, 0.0, state.speed)
        new.check_invariant()
        if command.preset is not None:
            return TransitionResult(new, (command.preset.position.copy(), command.preset.yaw_deg))
        final = state.active_path.point_at(state.progress)
        yaw = state.active_path.yaw_at(state.progress)
        return TransitionResult(new, (final, yaw) if yaw is not None else (final, None))
    raise PathfindError(f"unknown control command {command!r}")


@dataclass
class LocomotionStep:
    state: ControlState
    position: np.ndarray  # (2,) in D
    yaw_deg: Optional[float]
    complete: bool


def step_locomotion(state: ControlState, speed: float, dt: float) -> LocomotionStep:
    """Advance along the active path by speed * dt (clamped at the end).

    Completion raises a flag but never releases control: release is an
    explicit operator act.
    """
    if state.owner is not ControlOwner.PathfinderLocomotion:
        raise WrongOwner("locomotion requires the pathfinder to own control")
    path = state.active_path
    total = float(path.cum_lengths[-1])
    progress = min(state.progress + speed * dt, total)
    position = path.point_at(progress)
    yaw = path.yaw_at(progress)
    new = replace(state, progress=progress)
    return LocomotionStep(new, position, yaw, progress >= total)


def compose_final_pose(
    state: ControlState, mocaptor_pose: Pose, locomotion: Optional[tuple]
) -> Pose:
    """Merge performer limbs with pathfinder locomotion.

    Under performer control the pose passes through untouched. Under
    pathfinder control every non-root rotation is kept bit-identical while
    the root's floor position and yaw come from the locomotion output (the
    root's height and its lean/tilt stay with the performer).
    """
    if state.owner is ControlOwner.MocaptorFull:
        return mocaptor_pose
    position, yaw = locomotion
    out = mocaptor_pose.copy()
    out.root_translation[0] = position[0]
    out.root_translation[2] = position[1]
    if yaw is not None:
        current = mocaptor_pose.local_rotations[0]
        residual = quat_mul(yaw_quat(-facing_of(current)), current)
        out.local_rotations[0] = quat_normalize(quat_mul(yaw_quat(yaw), residual))
    return out
