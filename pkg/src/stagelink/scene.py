"""Scene files: one INI-style document describing a show setup.

Sections: [scene] metadata, [spaces] the planar similarity transforms,
[stage] bounds and navmesh cell size, [obstacles], [zones], [presets],
[stations] the bus roster, [composition] defaults, [avatar] the show rig,
[inputs] acting inputs to register, [puppeteer] region routing. Every value
is a plain string of space-separated fields; see examples_scenes/demo.ini
for a complete commented file.

Retarget profiles referenced from [avatar] are their own small INI with a
[profile] section (rig reference, optional height override) and an
[aliases] section of source-name = destination-name pairs.
"""

import configparser
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bvh, rigs
from .eventbus import Station, StationRole
from .pathfind import DEFAULT_CELL_SIZE, Preset, Rect, Zone, ZoneMap
from .skeleton import Skeleton
from .stagespace import Similarity2D, SpaceCalibration


class SceneError(ValueError):
    pass


@dataclass
class InputSpec:
    id: str
    kind: str  # replay | mocap | gamepad
    source: str = ""  # clip path for replay, stream id for mocap
    regions: Optional[list[str]] = None
    rig: str = "device32"  # capture rig reference for mocap inputs


@dataclass
class CompositionDefaults:
    mode: str = "Fixed"
    camera_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 2.0, -6.0]))
    camera_yaw: float = 0.0
    camera_pitch: float = 10.0
    camera_fov: float = 60.0
    lights: dict = field(default_factory=dict)  # id -> (position (3,), intensity)


@dataclass
class Scene:
    name: str
    calibration: SpaceCalibration
    stage_bounds: Rect
    cell_size: float
    obstacles: list
    zones: ZoneMap
    presets: dict
    stations: list
    composition: CompositionDefaults
    avatar: Skeleton
    avatar_aliases: dict
    avatar_height_override: Optional[float]
    inputs: list
    puppeteer_routes: dict  # region name -> [(input id, weight)]


def _floats(raw: str, n: int, what: str) -> list[float]:
    parts = raw.split()
    if len(parts) != n:
        raise SceneError(f"{what}: expected {n} fields, got {len(parts)} in {raw!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise SceneError(f"{what}: {exc}") from None


def _similarity(raw: str, what: str) -> Similarity2D:
    s, yaw, ox, oz = _floats(raw, 4, what)
    if s <= 0:
        raise SceneError(f"{what}: scale must be positive, got {s}")
    return Similarity2D(s, yaw, np.array([ox, oz]))


def resolve_rig(spec: str, base_dir: str = ".") -> Skeleton:
    """Rig reference: 'neutral', 'demo40', 'device32' or a BVH path."""
    if spec == "neutral":
        return rigs.neutral_skeleton()
    if spec == "demo40":
        return rigs.demo_avatar()
    if spec == "device32":
        return rigs.device_skeleton()
    path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
    if not os.path.exists(path):
        raise SceneError(f"rig reference {spec!r} is neither builtin nor a file")
    with open(path, "r", encoding="utf-8") as fh:
        return bvh.parse_bvh(fh.read()).skeleton


def load_profile(path: str) -> tuple[str, dict, Optional[float]]:
    """Returns (rig reference, aliases, height override) from a profile file."""
    parser = _parser()
    read = parser.read(path)
    if not read:
        raise SceneError(f"profile file not found: {path}")
    if not parser.has_section("profile"):
        raise SceneError(f"{path}: missing [profile] section")
    rig_ref = parser.get("profile", "rig", fallback="neutral")
    height = parser.getfloat("profile", "height", fallback=None)
    aliases = {}
    if parser.has_section("aliases"):
        for src, dst in parser.items("aliases"):
            aliases[src] = dst
    return rig_ref, aliases, height


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None, strict=True
    )
    p.optionxform = str  # joint and station names are case-sensitive
    return p


def load_scene(path: str) -> Scene:
    parser = _parser()
    read = parser.read(path)
    if not read:
        raise SceneError(f"scene file not found: {path}")
    base_dir = os.path.dirname(os.path.abspath(path))

    name = parser.get("scene", "name", fallback=os.path.basename(path))

    b_to_d = Similarity2D()
    a_to_d = Similarity2D()
    if parser.has_section("spaces"):
        if parser.has_option("spaces", "b_to_d"):
            b_to_d = _similarity(parser.get("spaces", "b_to_d"), "[spaces] b_to_d")
        if parser.has_option("spaces", "a_to_d"):
            a_to_d = _similarity(parser.get("spaces", "a_to_d"), "[spaces] a_to_d")
    calibration = SpaceCalibration(b_to_d, a_to_d)

    if not parser.has_section("stage"):
        raise SceneError("scene needs a [stage] section with bounds")
    bx0, bz0, bx1, bz1 = _floats(parser.get("stage", "bounds"), 4, "[stage] bounds")
    stage_bounds = Rect(bx0, bz0, bx1, bz1)
    cell_size = parser.getfloat("stage", "cell_size", fallback=DEFAULT_CELL_SIZE)

    obstacles = []
    if parser.has_section("obstacles"):
        for key, raw in parser.items("obstacles"):
            x0, z0, x1, z1 = _floats(raw, 4, f"[obstacles] {key}")
            obstacles.append(Rect(x0, z0, x1, z1))

    zones = []
    if parser.has_section("zones"):
        for key, raw in parser.items("zones"):
            vals = _floats(raw, 9, f"[zones] {key}")
            zones.append(
                Zone(key, Rect(*vals[0:4]), Rect(*vals[4:8]), vals[8])
            )
    zone_map = ZoneMap(tuple(zones))

    presets = {}
    if parser.has_section("presets"):
        for key, raw in parser.items("presets"):
            x, z, yaw = _floats(raw, 3, f"[presets] {key}")
            presets[key] = Preset(key, np.array([x, z]), yaw)

    stations = []
    if parser.has_section("stations"):
        next_id = 1
        directors = 0
        for key, raw in parser.items("stations"):
            parts = raw.split()
            if len(parts) not in (1, 2):
                raise SceneError(f"[stations] {key}: expected 'Role [host:port]'")
            try:
                role = StationRole(parts[0])
            except ValueError:
                raise SceneError(f"[stations] {key}: unknown role {parts[0]!r}") from None
            if role is StationRole.Director:
                directors += 1
                if directors > 1:
                    raise SceneError("[stations]: at most one Director")
            address = parts[1] if len(parts) == 2 else ""
            stations.append((key, Station(next_id, role, address)))
            next_id += 1

    composition = CompositionDefaults()
    if parser.has_section("composition"):
        composition.mode = parser.get("composition", "mode", fallback="Fixed")
        if composition.mode not in ("Fixed", "Manipulated"):
            raise SceneError(f"[composition] mode must be Fixed or Manipulated")
        if parser.has_option("composition", "camera"):
            vals = _floats(parser.get("composition", "camera"), 6, "[composition] camera")
            composition.camera_position = np.array(vals[0:3])
            composition.camera_yaw, composition.camera_pitch, composition.camera_fov = vals[3:6]
        for key, raw in parser.items("composition"):
            if key.startswith("light."):
                vals = _floats(raw, 4, f"[composition] {key}")
                composition.lights[key[6:]] = (np.array(vals[0:3]), vals[3])

    avatar_aliases: dict = {}
    avatar_height: Optional[float] = None
    rig_ref = "neutral"
    if parser.has_section("avatar"):
        if parser.has_option("avatar", "profile"):
            ppath = parser.get("avatar", "profile")
            if not os.path.isabs(ppath):
                ppath = os.path.join(base_dir, ppath)
            rig_ref, avatar_aliases, avatar_height = load_profile(ppath)
        if parser.has_option("avatar", "rig"):
            rig_ref = parser.get("avatar", "rig")
    avatar = resolve_rig(rig_ref, base_dir)

    inputs = []
    if parser.has_section("inputs"):
        for key, raw in parser.items("inputs"):
            parts = raw.split()
            if not parts:
                raise SceneError(f"[inputs] {key}: empty spec")
            kind = parts[0]
            if kind not in ("replay", "mocap", "gamepad"):
                raise SceneError(f"[inputs] {key}: unknown kind {kind!r}")
            source = ""
            regions = None
            rig = "device32"
            for extra in parts[1:]:
                if extra.startswith("regions="):
                    regions = extra[len("regions="):].split(",")
                elif extra.startswith("rig="):
                    rig = extra[len("rig="):]
                else:
                    source = extra
            if kind == "replay":
                if not source:
                    raise SceneError(f"[inputs] {key}: replay needs a clip path")
                if not os.path.isabs(source):
                    source = os.path.join(base_dir, source)
            if kind == "mocap" and not source:
                source = key  # stream id defaults to the input id
            inputs.append(InputSpec(key, kind, source, regions, rig))

    routes: dict = {}
    if parser.has_section("puppeteer"):
        for region_name, raw in parser.items("puppeteer"):
            entries = []
            for part in raw.split():
                if ":" in part:
                    sid, w = part.rsplit(":", 1)
                    try:
                        weight = float(w)
                    except ValueError:
                        raise SceneError(
                            f"[puppeteer] {region_name}: bad weight in {part!r}"
                        ) from None
                else:
                    sid, weight = part, 1.0
                entries.append((sid, weight))
            routes[region_name] = entries

    return Scene(
        name=name,
        calibration=calibration,
        stage_bounds=stage_bounds,
        cell_size=cell_size,
        obstacles=obstacles,
        zones=zone_map,
        presets=presets,
        stations=stations,
        composition=composition,
        avatar=avatar,
        avatar_aliases=avatar_aliases,
        avatar_height_override=avatar_height,
        inputs=inputs,
        puppeteer_routes=routes,
    )
