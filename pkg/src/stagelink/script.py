"""Tick-indexed command scripts.

One command per line: ``<tick> <verb> [args...]``; '#' starts a comment.
Scripts exist to make whole runs reproducible — the same scene, replay and
script always produce the same packet stream. Verbs:

    takeover X Z [SPEED]      hand the root to the pathfinder, walk to (X, Z)
    takeover_zone ID [SPEED]  same, toward the digital zone's center
    release [PRESET]          hand the root back, optionally snapping
    preset NAME               apply a preset mark in either owner state
    mode Fixed|Manipulated    switch the composition regime
    camera DX DY DZ DYAW DPITCH DFOV
    light ID DINTENSITY
    refmove DX DZ DYAW        nudge the avatar (capture-space meters, degrees)
    rotate_b THETA            rotate the performer's space by THETA degrees
    actor X Z                 place the scripted actor mark (digital space)
    face_actor                rotate space B so the avatar faces the actor
    stop                      end the run
"""

from collections import defaultdict

from .commands import (
    CmdActorPos,
    CmdApplyPreset,
    CmdFaceActor,
    CmdLight,
    CmdMoveCamera,
    CmdRefMove,
    CmdRelease,
    CmdRotateB,
    CmdSetMode,
    CmdStop,
    CmdTakeover,
    CmdTakeoverZone,
)


class ScriptError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_command(verb: str, args: list[str], line: int):
    try:
        if verb == "takeover":
            if len(args) not in (2, 3):
                raise ValueError("takeover needs X Z [SPEED]")
            speed = float(args[2]) if len(args) == 3 else None
            return CmdTakeover(float(args[0]), float(args[1]), speed)
        if verb == "takeover_zone":
            if len(args) not in (1, 2):
                raise ValueError("takeover_zone needs ID [SPEED]")
            return CmdTakeoverZone(args[0], float(args[1]) if len(args) == 2 else None)
        if verb == "release":
            if len(args) > 1:
                raise ValueError("release takes at most a preset name")
            return CmdRelease(args[0] if args else None)
        if verb == "preset":
            if len(args) != 1:
                raise ValueError("preset needs NAME")
            return CmdApplyPreset(args[0])
        if verb == "mode":
            if len(args) != 1 or args[0] not in ("Fixed", "Manipulated"):
                raise ValueError("mode needs Fixed or Manipulated")
            return CmdSetMode(args[0])
        if verb == "camera":
            if len(args) != 6:
                raise ValueError("camera needs DX DY DZ DYAW DPITCH DFOV")
            vals = [float(a) for a in args]
            return CmdMoveCamera(*vals)
        if verb == "light":
            if len(args) != 2:
                raise ValueError("light needs ID DINTENSITY")
            return CmdLight(args[0], float(args[1]))
        if verb == "refmove":
            if len(args) != 3:
                raise ValueError("refmove needs DX DZ DYAW")
            return CmdRefMove(float(args[0]), float(args[1]), float(args[2]))
        if verb == "rotate_b":
            if len(args) != 1:
                raise ValueError("rotate_b needs THETA")
            return CmdRotateB(float(args[0]))
        if verb == "actor":
            if len(args) != 2:
                raise ValueError("actor needs X Z")
            return CmdActorPos(float(args[0]), float(args[1]))
        if verb == "face_actor":
            if args:
                raise ValueError("face_actor takes no arguments")
            return CmdFaceActor()
        if verb == "stop":
            if args:
                raise ValueError("stop takes no arguments")
            return CmdStop()
    except ValueError as exc:
        raise ScriptError(str(exc), line) from None
    raise ScriptError(f"unknown command {verb!r}", line)


def parse_script(text: str) -> dict[int, list]:
    """tick index -> commands, in file order within a tick."""
    schedule: dict[int, list] = defaultdict(list)
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            tick = int(parts[0])
        except ValueError:
            raise ScriptError(f"expected a tick index, got {parts[0]!r}", ln) from None
        if tick < 0:
            raise ScriptError(f"tick index must be >= 0, got {tick}", ln)
        if len(parts) < 2:
            raise ScriptError("missing command after tick index", ln)
        schedule[tick].append(_parse_command(parts[1], parts[2:], ln))
    return dict(schedule)


def load_script(path: str) -> dict[int, list]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_script(fh.read())
