"""Operator commands, shared by the script runner, the bus and the console.

Control commands (takeover, release, preset application) transition the
locomotion owner and are applied at most one per tick, in arrival order.
Everything else (composition, nudges, actor marks) is drained every tick.
"""

from dataclasses import dataclass
from typing import Callable, Optional

from .eventbus import StationRole


@dataclass
class CmdTakeover:
    x: float
    z: float
    speed: Optional[float] = None


@dataclass
class CmdTakeoverZone:
    zone_id: str
    speed: Optional[float] = None


@dataclass
class CmdRelease:
    preset_name: Optional[str] = None


@dataclass
class CmdApplyPreset:
    name: str


@dataclass
class CmdSetMode:
    mode: str  # Fixed | Manipulated


@dataclass
class CmdMoveCamera:
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    dyaw: float = 0.0
    dpitch: float = 0.0
    dfov: float = 0.0


@dataclass
class CmdLight:
    light_id: str
    dintensity: float


@dataclass
class CmdRefMove:
    dx: float
    dz: float
    dyaw: float


@dataclass
class CmdRotateB:
    theta: float


@dataclass
class CmdFaceActor:
    pass


@dataclass
class CmdActorPos:
    x: float
    z: float


@dataclass
class CmdPuppeteerRoutes:
    routes: dict  # region name -> [(input id, weight)]


@dataclass
class CmdCalibration:
    """Replace the B->D similarity (director's correction)."""

    scale: float
    yaw: float
    ox: float
    oz: float


@dataclass
class CmdStop:
    pass


CONTROL_COMMANDS = (CmdTakeover, CmdTakeoverZone, CmdRelease, CmdApplyPreset)


@dataclass
class QueuedCommand:
    command: object
    role: StationRole = StationRole.Director
    ack: Optional[Callable[[bool, str], None]] = None

    def respond(self, ok: bool, detail: str = ""):
        if self.ack is not None:
            self.ack(ok, detail)
