"""The stage server: session state and the fixed-rate tick pipeline.

Each tick runs, in order: snapshot inputs -> smooth -> retarget every source
onto the neutral character -> blend per body region -> apply accumulated
reference moves and space-B rotations -> apply at most one control command
-> advance locomotion and compose the final neutral pose -> retarget onto
the show avatar -> emit one FramePacket.

Frames of reference: the neutral pose's root lives in capture space B;
everything operators touch (paths, presets, zones, actor marks, the reported
disposition) lives in digital space D. The B->D calibration converts at the
boundary, and repositioning the avatar (release snaps, preset applications)
is done by retuning that calibration rather than teleporting the performer.

The tick loop is the only writer of avatar/control/composition state;
network receivers only deposit into mailboxes and command queues.
"""

import logging
import statistics
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import packetlog
from .bvh import MotionClip, sample_clip
from .commands import (
    CONTROL_COMMANDS,
    CmdActorPos,
    CmdApplyPreset,
    CmdCalibration,
    CmdFaceActor,
    CmdLight,
    CmdMoveCamera,
    CmdPuppeteerRoutes,
    CmdRefMove,
    CmdRelease,
    CmdRotateB,
    CmdSetMode,
    CmdStop,
    CmdTakeover,
    CmdTakeoverZone,
    QueuedCommand,
)
from .device import FrameMailbox, SmootherState, smooth
from .eventbus import BusSession, EventEnvelope, Station, StationRole
from .pathfind import (
    ControlOwner,
    ControlState,
    PathfindError,
    Release,
    TakeOver,
    build_navmesh,
    compose_final_pose,
    control_transition,
    step_locomotion,
)
from .puppeteer import (
    BodyRegion,
    InputKind,
    Puppeteer,
    PuppeteerConfig,
    RefMoveDelta,
    apply_ref_move,
)
from .retarget import RetargetProfile, retarget
from .rigs import DEVICE_TO_NEUTRAL_ALIASES, neutral_skeleton
from .scene import Scene, resolve_rig
from .skeleton import Pose
from .stagespace import (
    Disposition,
    Similarity2D,
    SpaceCalibration,
    disposition_correction,
    facing_of,
    map_point_B_to_D,
    retune_calibration,
    solve_disposition,
    wrap_deg,
)

logger = logging.getLogger(__name__)

MIN_TICK_RATE = 10
MAX_TICK_RATE = 240
FOV_MIN, FOV_MAX = 10.0, 170.0


class ServerError(Exception):
    pass


class Unauthorized(ServerError):
    pass


class CompositionLocked(ServerError):
    """Camera/light changes are refused while the composition is Fixed."""


class RoleTaken(ServerError):
    pass


class UnknownPreset(ServerError):
    pass


@dataclass
class SessionConfig:
    scene_path: str = ""
    tick_rate: int = 60
    listen_mocap: Optional[str] = None  # "host:port" UDP
    listen_bus: Optional[str] = None  # "host:port" TCP
    listen_console: Optional[str] = None  # "host:port" WebSocket
    smooth_alpha: float = 0.8
    record_path: Optional[str] = None
    console_decimation: int = 6

    def __post_init__(self):
        if not MIN_TICK_RATE <= self.tick_rate <= MAX_TICK_RATE:
            raise ServerError(
                f"tick rate must be in [{MIN_TICK_RATE}, {MAX_TICK_RATE}], got {self.tick_rate}"
            )


@dataclass
class FramePacket:
    tick: int
    avatar_pose: Pose
    owner: ControlOwner
    disposition: Disposition
    mode: str
    camera_position: np.ndarray
    camera_yaw: float
    camera_pitch: float
    camera_fov: float
    lights: dict
    health: dict  # input id -> "fresh" | "stale" | "missing"
    regions: dict  # BodyRegion -> RegionStatus


@dataclass
class _RuntimeInput:
    spec_kind: str
    handle: object
    stage1: Optional[RetargetProfile] = None
    clip: Optional[MotionClip] = None
    mailbox: Optional[FrameMailbox] = None
    smoother: Optional[SmootherState] = None
    rig_joints: int = 0
    last_seq: int = -1
    last_data_tick: int = -1
    mismatch_count: int = 0


class StageServer:
    def __init__(self, scene: Scene, config: SessionConfig, bus: Optional[BusSession] = None):
        self.scene = scene
        self.config = config
        self.tick_rate = config.tick_rate
        self.dt = 1.0 / config.tick_rate
        self.stale_after_ticks = max(1, config.tick_rate // 4)

        self.neutral = neutral_skeleton()
        self.avatar = scene.avatar
        dest_height = scene.avatar_height_override
        self.stage2 = RetargetProfile.build(
            self.neutral, self.avatar, scene.avatar_aliases, height_ratio=(
                None if dest_height is None else dest_height / self.neutral.height
            ),
        )

        self.puppeteer = Puppeteer(self.neutral)
        self.inputs: dict[str, _RuntimeInput] = {}

        self.mesh = build_navmesh(scene.stage_bounds, scene.obstacles, scene.cell_size)
        self.zones = scene.zones
        self.presets = dict(scene.presets)
        self.calibration = scene.calibration
        self.control = ControlState()
        self._last_loco_yaw: Optional[float] = None

        comp = scene.composition
        self.mode = comp.mode
        self.camera_position = comp.camera_position.copy()
        self.camera_yaw = comp.camera_yaw
        self.camera_pitch = comp.camera_pitch
        self.camera_fov = comp.camera_fov
        self.lights = {k: (p.copy(), i) for k, (p, i) in comp.lights.items()}

        self.refmove_translation = np.zeros(3)
        self.refmove_yaw = 0.0
        self.actor_pos_d: Optional[np.ndarray] = None

        self.tick_index = 0
        self.sim_time = 0.0
        self._last_disposition = Disposition(np.zeros(2), 0.0)
        self.control_queue: deque[QueuedCommand] = deque()
        self.general_queue: deque[QueuedCommand] = deque()
        self._queue_lock = threading.Lock()
        self.schedule: dict[int, list] = {}
        self.stop_requested = False

        self.stations: dict[int, Station] = {}
        self._next_station_id = 1000
        for _, station in scene.stations:
            self._admit_station(station)

        self.bus = bus
        if bus is not None:
            self._wire_bus(bus)

        self.recorder: Optional[packetlog.PacketLogWriter] = None
        if config.record_path:
            self.recorder = packetlog.PacketLogWriter(config.record_path)

        self.tick_seconds: list[float] = []
        self.on_packet: list[Callable[[FramePacket], None]] = []

    # -- stations --------------------------------------------------------------

    def _admit_station(self, station: Station):
        if station.role is StationRole.Director and any(
            s.role is StationRole.Director for s in self.stations.values()
        ):
            raise RoleTaken("a Director station is already registered")
        self.stations[station.id] = station

    def register_station(self, role: StationRole, address: str = "") -> Station:
        """Admit a dynamically connecting station (console, late bus peer)."""
        station = Station(self._next_station_id, role, address)
        self._admit_station(station)  # raises RoleTaken before the id is burned
        self._next_station_id += 1
        return station

    def role_of(self, station_id: int) -> StationRole:
        station = self.stations.get(station_id)
        return station.role if station else StationRole.Mocaptor

    # -- input registration ------------------------------------------------------

    def add_replay_input(self, input_id: str, clip: MotionClip, regions=None):
        handle = self.puppeteer.register_input(input_id, InputKind.Replay, regions)
        profile = RetargetProfile.build(clip.skeleton, self.neutral, DEVICE_TO_NEUTRAL_ALIASES)
        self.inputs[input_id] = _RuntimeInput(
            "replay", handle, stage1=profile, clip=clip
        )

    def add_mocap_input(self, input_id: str, mailbox: FrameMailbox, rig="device32", regions=None):
        handle = self.puppeteer.register_input(input_id, InputKind.MocapStream, regions)
        rig_skel = resolve_rig(rig) if isinstance(rig, str) else rig
        profile = RetargetProfile.build(rig_skel, self.neutral, DEVICE_TO_NEUTRAL_ALIASES)
        self.inputs[input_id] = _RuntimeInput(
            "mocap",
            handle,
            stage1=profile,
            mailbox=mailbox,
            smoother=SmootherState(self.config.smooth_alpha),
            rig_joints=len(rig_skel),
        )

    def add_gamepad_input(self, input_id: str, regions=(BodyRegion.Root,)):
        handle = self.puppeteer.register_input(input_id, InputKind.Gamepad, regions)
        self.inputs[input_id] = _RuntimeInput("gamepad", handle)

    def autowire_routes(self):
        """Route every region to the first pose-bearing input when the scene
        gave no explicit puppeteer table."""
        for input_id, runtime in self.inputs.items():
            if runtime.spec_kind in ("replay", "mocap"):
                self.puppeteer.set_config(PuppeteerConfig.solo(input_id))
                return

    def set_routes(self, routes: dict):
        """routes: region name -> list of (input id, weight)."""
        table = {}
        for region in BodyRegion:
            entries = routes.get(region.value, ())
            table[region] = tuple((sid, float(w)) for sid, w in entries)
        self.puppeteer.set_config(PuppeteerConfig(table))

    # -- command intake ----------------------------------------------------------

    def enqueue(self, command, role: StationRole = StationRole.Director, ack=None):
        queued = QueuedCommand(command, role, ack)
        with self._queue_lock:
            if isinstance(command, CONTROL_COMMANDS):
                self.control_queue.append(queued)
            else:
                self.general_queue.append(queued)

    def load_schedule(self, schedule: dict):
        self.schedule = dict(schedule)

    # -- composition ---------------------------------------------------------------

    def set_composition_mode(self, mode: str, role: StationRole):
        if role not in (StationRole.Director, StationRole.DigitalArtist):
            raise Unauthorized(f"{role.value} may not switch composition mode")
        if mode not in ("Fixed", "Manipulated"):
            raise ServerError(f"unknown composition mode {mode!r}")
        if mode == self.mode:
            return
        self.mode = mode
        self._publish("composition/mode", {"mode": mode, "announce": True})

    def move_camera(self, cmd: CmdMoveCamera):
        if self.mode != "Manipulated":
            raise CompositionLocked("camera is locked while composition is Fixed")
        fov = self.camera_fov + cmd.dfov
        if not FOV_MIN < fov < FOV_MAX:
            raise ServerError(f"fov {fov:.1f} out of range ({FOV_MIN}, {FOV_MAX})")
        self.camera_position = self.camera_position + np.array([cmd.dx, cmd.dy, cmd.dz])
        self.camera_yaw = wrap_deg(self.camera_yaw + cmd.dyaw)
        self.camera_pitch = self.camera_pitch + cmd.dpitch
        self.camera_fov = fov

    def adjust_light(self, cmd: CmdLight):
        if self.mode != "Manipulated":
            raise CompositionLocked("lights are locked while composition is Fixed")
        if cmd.light_id not in self.lights:
            raise ServerError(f"unknown light {cmd.light_id!r}")
        pos, intensity = self.lights[cmd.light_id]
        new = intensity + cmd.dintensity
        if new < 0:
            raise ServerError(f"light intensity would drop below zero ({new:.3f})")
        self.lights[cmd.light_id] = (pos, new)

    # -- the tick -------------------------------------------------------------------

    def run_tick(self, dt: Optional[float] = None) -> FramePacket:
        started = time.perf_counter()
        explicit_dt = dt is not None
        dt = self.dt if dt is None else dt

        scheduled = self.schedule.get(self.tick_index, ())
        for command in scheduled:
            self.enqueue(command)

        self._drain_general_queue()

        snapshots, health = self._snapshot_inputs()
        blend = self.puppeteer.blend(snapshots, timestamp=self.sim_time)
        neutral_pose = blend.pose

        if self.refmove_yaw != 0.0 or np.any(self.refmove_translation != 0.0):
            neutral_pose = apply_ref_move(
                neutral_pose, RefMoveDelta(self.refmove_translation, self.refmove_yaw)
            )

        root_b = np.array([neutral_pose.root_translation[0], neutral_pose.root_translation[2]])
        facing_b = facing_of(neutral_pose.local_rotations[0])
        avatar_d = map_point_B_to_D(root_b, self.calibration)
        facing_d = wrap_deg(facing_b + self.calibration.b_to_d.yaw_deg)

        self._apply_one_control_command(root_b, facing_b, avatar_d, facing_d)
        # calibration may have been retuned; recompute the D-side view
        avatar_d = map_point_B_to_D(root_b, self.calibration)
        facing_d = wrap_deg(facing_b + self.calibration.b_to_d.yaw_deg)

        if self.control.owner is ControlOwner.PathfinderLocomotion:
            step = step_locomotion(self.control, self.control.speed, dt)
            self.control = step.state
            loco_yaw = step.yaw_deg if step.yaw_deg is not None else (
                self._last_loco_yaw if self._last_loco_yaw is not None else facing_d
            )
            self._last_loco_yaw = loco_yaw
            pos_b = self.calibration.b_to_d.invert(step.position)
            yaw_b = wrap_deg(loco_yaw - self.calibration.b_to_d.yaw_deg)
            final_pose = compose_final_pose(self.control, neutral_pose, (pos_b, yaw_b))
            disposition = Disposition(step.position, loco_yaw)
            self._publish(
                "pathfind/progress",
                {
                    "progress": float(step.state.progress),
                    "total": float(step.state.active_path.total_cost),
                    "complete": step.complete,
                },
            )
        else:
            final_pose = neutral_pose
            disposition = Disposition(avatar_d, facing_d)

        avatar_pose = retarget(final_pose, self.stage2)

        packet = FramePacket(
            tick=self.tick_index,
            avatar_pose=avatar_pose,
            owner=self.control.owner,
            disposition=disposition,
            mode=self.mode,
            camera_position=self.camera_position.copy(),
            camera_yaw=self.camera_yaw,
            camera_pitch=self.camera_pitch,
            camera_fov=self.camera_fov,
            lights={k: (p.copy(), i) for k, (p, i) in self.lights.items()},
            health=health,
            regions=blend.region_status,
        )
        self._last_disposition = disposition
        if self.recorder is not None:
            self.recorder.write(packet)
        self._publish("tick/frame", packetlog.summary_value(packet))
        for hook in self.on_packet:
            hook(packet)
        self.tick_index += 1
        # at the configured rate the sample clock is the exact product, so
        # replay oracles can reproduce it; explicit dt falls back to summing
        if explicit_dt:
            self.sim_time += dt
        else:
            self.sim_time = self.tick_index * self.dt
        self.tick_seconds.append(time.perf_counter() - started)
        return packet

    def run(self, max_ticks: Optional[int] = None, realtime: bool = True):
        next_deadline = time.monotonic()
        while not self.stop_requested:
            if max_ticks is not None and self.tick_index >= max_ticks:
                break
            self.run_tick()
            if realtime:
                next_deadline += self.dt
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()  # fell behind; don't burst

    def close(self):
        if self.recorder is not None:
            self.recorder.close()
            self.recorder = None

    def tick_stats(self) -> dict:
        if not self.tick_seconds:
            return {"ticks": 0}
        ordered = sorted(self.tick_seconds)
        p99 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))]
        return {
            "ticks": len(ordered),
            "median_ms": statistics.median(ordered) * 1e3,
            "p99_ms": p99 * 1e3,
            "max_ms": ordered[-1] * 1e3,
        }

    # -- tick stages -----------------------------------------------------------------

    def _drain_general_queue(self):
        with self._queue_lock:
            batch = list(self.general_queue)
            self.general_queue.clear()
        for queued in batch:
            cmd = queued.command
            try:
                if isinstance(cmd, CmdRefMove):
                    self.refmove_translation = self.refmove_translation + np.array(
                        [cmd.dx, 0.0, cmd.dz]
                    )
                    self.refmove_yaw = wrap_deg(self.refmove_yaw + cmd.dyaw)
                    self._mark_gamepads_fresh()
                elif isinstance(cmd, CmdRotateB):
                    self.refmove_yaw = wrap_deg(self.refmove_yaw + cmd.theta)
                elif isinstance(cmd, CmdActorPos):
                    self.actor_pos_d = np.array([cmd.x, cmd.z])
                elif isinstance(cmd, CmdFaceActor):
                    if self.actor_pos_d is None:
                        raise ServerError("no actor mark set; send an actor position first")
                    target = solve_disposition(
                        self._last_disposition.position, self.actor_pos_d
                    )
                    theta = disposition_correction(self._last_disposition.facing_deg, target)
                    self.refmove_yaw = wrap_deg(self.refmove_yaw + theta)
                elif isinstance(cmd, CmdSetMode):
                    self.set_composition_mode(cmd.mode, queued.role)
                elif isinstance(cmd, CmdMoveCamera):
                    self.move_camera(cmd)
                elif isinstance(cmd, CmdLight):
                    self.adjust_light(cmd)
                elif isinstance(cmd, CmdPuppeteerRoutes):
                    self.set_routes(cmd.routes)
                elif isinstance(cmd, CmdCalibration):
                    self.calibration = SpaceCalibration(
                        Similarity2D(cmd.scale, cmd.yaw, np.array([cmd.ox, cmd.oz])),
                        self.calibration.a_to_d,
                    )
                elif isinstance(cmd, CmdStop):
                    self.stop_requested = True
                else:
                    raise ServerError(f"unhandled command {cmd!r}")
            except Exception as exc:
                logger.warning("command %s refused: %s", type(cmd).__name__, exc)
                queued.respond(False, str(exc))
            else:
                queued.respond(True)

    def _apply_one_control_command(self, root_b, facing_b, avatar_d, facing_d):
        with self._queue_lock:
            queued = self.control_queue.popleft() if self.control_queue else None
        if queued is None:
            return
        cmd = queued.command
        try:
            if isinstance(cmd, (CmdTakeover, CmdTakeoverZone)):
                if isinstance(cmd, CmdTakeoverZone):
                    zone = self.zones.get(cmd.zone_id)
                    goal = zone.rect_d.center()
                    speed = cmd.speed
                else:
                    goal = np.array([cmd.x, cmd.z])
                    speed = cmd.speed
                result = control_transition(
                    self.control, TakeOver(goal, speed), self.mesh, avatar_d
                )
                self.control = result.state
                self._last_loco_yaw = None
                self._publish(
                    "pathfind/takeover",
                    {"x": float(goal[0]), "z": float(goal[1]), "announce": True},
                )
            elif isinstance(cmd, CmdRelease):
                preset = None
                if cmd.preset_name is not None:
                    preset = self._resolve_preset(cmd.preset_name)
                result = control_transition(self.control, Release(preset), self.mesh, avatar_d)
                self.control = result.state
                if result.snap is not None:
                    pos_d, yaw_d = result.snap
                    if yaw_d is None:
                        yaw_d = facing_d
                    self.calibration = retune_calibration(
                        self.calibration, root_b, facing_b, pos_d, yaw_d
                    )
                self._publish(
                    "pathfind/release", {"preset": cmd.preset_name or "", "announce": True}
                )
            elif isinstance(cmd, CmdApplyPreset):
                preset = self._resolve_preset(cmd.name)
                if self.control.owner is ControlOwner.PathfinderLocomotion:
                    result = control_transition(
                        self.control, Release(preset), self.mesh, avatar_d
                    )
                    self.control = result.state
                    pos_d, yaw_d = result.snap
                    self.calibration = retune_calibration(
                        self.calibration, root_b, facing_b, pos_d, yaw_d
                    )
                else:
                    self.calibration = retune_calibration(
                        self.calibration, root_b, facing_b, preset.position, preset.yaw_deg
                    )
                self._publish("preset/apply", {"name": cmd.name, "announce": True})
            else:
                raise ServerError(f"unhandled control command {cmd!r}")
        except (PathfindError, ServerError) as exc:
            logger.warning("control command %s refused: %s", type(cmd).__name__, exc)
            queued.respond(False, f"{type(exc).__name__}: {exc}")
        else:
            queued.respond(True)

    def _resolve_preset(self, name: str):
        preset = self.presets.get(name)
        if preset is not None:
            return preset
        for zone in self.zones.zones:
            if zone.id == name:
                return zone.as_preset()
        raise UnknownPreset(f"unknown preset {name!r}")

    def _snapshot_inputs(self):
        snapshots: dict[str, Pose] = {}
        health: dict[str, str] = {}
        for input_id, runtime in self.inputs.items():
            if runtime.spec_kind == "replay":
                pose = sample_clip(runtime.clip, self.sim_time)
                snapshots[input_id] = retarget(pose, runtime.stage1)
                runtime.last_data_tick = self.tick_index
                health[input_id] = "fresh"
            elif runtime.spec_kind == "mocap":
                frame, _stamp = runtime.mailbox.latest()
                if frame is not None and frame.sequence != runtime.last_seq:
                    runtime.last_seq = frame.sequence
                    runtime.last_data_tick = self.tick_index
                    if frame.joint_count != runtime.rig_joints:
                        runtime.mismatch_count += 1
                        frame = None
                    else:
                        runtime.smoother, frame = smooth(runtime.smoother, frame)
                        runtime.handle.latest = retarget(frame.to_pose(), runtime.stage1)
                if runtime.handle.latest is not None:
                    snapshots[input_id] = runtime.handle.latest
                health[input_id] = self._freshness(runtime)
            elif runtime.spec_kind == "gamepad":
                health[input_id] = self._freshness(runtime)
        return snapshots, health

    def _freshness(self, runtime: _RuntimeInput) -> str:
        if runtime.last_data_tick < 0:
            return "missing"
        if self.tick_index - runtime.last_data_tick > self.stale_after_ticks:
            return "stale"
        return "fresh"

    def _mark_gamepads_fresh(self):
        for runtime in self.inputs.values():
            if runtime.spec_kind == "gamepad":
                runtime.last_data_tick = self.tick_index

    # -- bus ----------------------------------------------------------------------

    def _publish(self, topic: str, payload: dict):
        if self.bus is not None:
            try:
                self.bus.publish(topic, payload)
            except Exception as exc:
                logger.warning("publish %s failed: %s", topic, exc)

    def _wire_bus(self, bus: BusSession):
        for pattern in (
            "pathfind/takeover",
            "pathfind/release",
            "preset/apply",
            "composition/mode",
            "composition/camera",
            "composition/light",
            "puppeteer/refmove",
            "puppeteer/config",
            "space/calibration",
            "space/actor-pos",
        ):
            bus.subscribe(pattern, self._on_bus_event)

    def _on_bus_event(self, env: EventEnvelope):
        if env.sender == (self.bus.station.id if self.bus else -1):
            return  # our own broadcasts
        role = self.role_of(env.sender)
        try:
            command = _command_from_event(env.topic, env.payload)
        except (KeyError, TypeError, ValueError) as exc:
            logger.warning("bad %s event from %s: %s", env.topic, env.sender, exc)
            return
        if command is not None:
            self.enqueue(command, role)


def _command_from_event(topic: str, payload):
    if isinstance(payload, dict) and payload.get("announce") is True:
        return None  # the server's own broadcast echoed back by a peer relay
    if topic == "pathfind/takeover":
        speed = payload.get("speed")
        return CmdTakeover(float(payload["x"]), float(payload["z"]),
                           None if speed is None else float(speed))
    if topic == "pathfind/release":
        preset = payload.get("preset") or None
        return CmdRelease(preset)
    if topic == "preset/apply":
        return CmdApplyPreset(str(payload["name"]))
    if topic == "composition/mode":
        return CmdSetMode(str(payload["mode"]))
    if topic == "composition/camera":
        return CmdMoveCamera(
            float(payload.get("dx", 0.0)),
            float(payload.get("dy", 0.0)),
            float(payload.get("dz", 0.0)),
            float(payload.get("dyaw", 0.0)),
            float(payload.get("dpitch", 0.0)),
            float(payload.get("dfov", 0.0)),
        )
    if topic == "composition/light":
        return CmdLight(str(payload["id"]), float(payload["dintensity"]))
    if topic == "puppeteer/refmove":
        return CmdRefMove(
            float(payload.get("dx", 0.0)),
            float(payload.get("dz", 0.0)),
            float(payload.get("dyaw", 0.0)),
        )
    if topic == "puppeteer/config":
        routes = {
            region: sorted((sid, float(w)) for sid, w in table.items())
            for region, table in payload["routes"].items()
        }
        return CmdPuppeteerRoutes(routes)
    if topic == "space/actor-pos":
        return CmdActorPos(float(payload["x"]), float(payload["z"]))
    if topic == "space/calibration":
        return CmdCalibration(
            float(payload.get("scale", 1.0)),
            float(payload.get("yaw", 0.0)),
            float(payload.get("ox", 0.0)),
            float(payload.get("oz", 0.0)),
        )
    return None
