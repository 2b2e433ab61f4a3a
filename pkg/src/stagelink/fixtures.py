"""Deterministic demo assets: a walking replay clip, a scene, a command script.

Everything is generated from closed-form curves so repeated generation is
byte-identical; tests and the README demo both build their assets here.
``python -m stagelink.fixtures OUTDIR`` writes the full demo set.
"""

import math
import os

_BVH_HEADER = """HIERARCHY
ROOT Hips
{{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Spine1
  {{
    OFFSET 0 0.10 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT Spine2
    {{
      OFFSET 0 0.15 0
      CHANNELS 3 Zrotation Xrotation Yrotation
      JOINT Spine3
      {{
        OFFSET 0 0.15 0
        CHANNELS 3 Zrotation Xrotation Yrotation
        JOINT Neck
        {{
          OFFSET 0 0.12 0
          CHANNELS 3 Zrotation Xrotation Yrotation
          JOINT Head
          {{
            OFFSET 0 0.08 0
            CHANNELS 3 Zrotation Xrotation Yrotation
            End Site
            {{
              OFFSET 0 0.25 0
            }}
          }}
        }}
        JOINT LeftShoulder
        {{
          OFFSET 0 0.10 -0.08
          CHANNELS 3 Zrotation Xrotation Yrotation
          JOINT LeftUpperArm
          {{
            OFFSET 0 0 -0.12
            CHANNELS 3 Zrotation Xrotation Yrotation
            JOINT LeftForearm
            {{
              OFFSET 0 0 -0.28
              CHANNELS 3 Zrotation Xrotation Yrotation
              JOINT LeftHand
              {{
                OFFSET 0 0 -0.26
                CHANNELS 3 Zrotation Xrotation Yrotation
                End Site
                {{
                  OFFSET 0 0 -0.08
                }}
              }}
            }}
          }}
        }}
        JOINT RightShoulder
        {{
          OFFSET 0 0.10 0.08
          CHANNELS 3 Zrotation Xrotation Yrotation
          JOINT RightUpperArm
          {{
            OFFSET 0 0 0.12
            CHANNELS 3 Zrotation Xrotation Yrotation
            JOINT RightForearm
            {{
              OFFSET 0 0 0.28
              CHANNELS 3 Zrotation Xrotation Yrotation
              JOINT RightHand
              {{
                OFFSET 0 0 0.26
                CHANNELS 3 Zrotation Xrotation Yrotation
                End Site
                {{
                  OFFSET 0 0 0.08
                }}
              }}
            }}
          }}
        }}
      }}
    }}
  }}
  JOINT LeftUpperLeg
  {{
    OFFSET 0 -0.05 -0.09
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT LeftLowerLeg
    {{
      OFFSET 0 -0.42 0
      CHANNELS 3 Zrotation Xrotation Yrotation
      JOINT LeftFoot
      {{
        OFFSET 0 -0.43 0
        CHANNELS 3 Zrotation Xrotation Yrotation
        JOINT LeftToe
        {{
          OFFSET 0.15 -0.05 0
          CHANNELS 3 Zrotation Xrotation Yrotation
          End Site
          {{
            OFFSET 0.05 0 0
          }}
        }}
      }}
    }}
  }}
  JOINT RightUpperLeg
  {{
    OFFSET 0 -0.05 0.09
    CHANNELS 3 Zrotation Xrotation Yrotation
    JOINT RightLowerLeg
    {{
      OFFSET 0 -0.42 0
      CHANNELS 3 Zrotation Xrotation Yrotation
      JOINT RightFoot
      {{
        OFFSET 0 -0.43 0
        CHANNELS 3 Zrotation Xrotation Yrotation
        JOINT RightToe
        {{
          OFFSET 0.15 -0.05 0
          CHANNELS 3 Zrotation Xrotation Yrotation
          End Site
          {{
            OFFSET 0.05 0 0
          }}
        }}
      }}
    }}
  }}
}}
MOTION
Frames: {frames}
Frame Time: {frame_time:.6f}
"""

# Channel order per animated joint, matching the hierarchy above.
_ANIMATED = [
    "Hips", "Spine1", "Spine2", "Spine3", "Neck", "Head",
    "LeftShoulder", "LeftUpperArm", "LeftForearm", "LeftHand",
    "RightShoulder", "RightUpperArm", "RightForearm", "RightHand",
    "LeftUpperLeg", "LeftLowerLeg", "LeftFoot", "LeftToe",
    "RightUpperLeg", "RightLowerLeg", "RightFoot", "RightToe",
]


def _walk_angles(name: str, t: float) -> tuple[float, float, float]:
    """(Z, X, Y) Euler degrees for one joint of the canned walk cycle."""
    swing = math.sin(2.0 * math.pi * 1.4 * t)
    counter = math.sin(2.0 * math.pi * 1.4 * t + math.pi)
    sway = math.sin(2.0 * math.pi * 0.7 * t)
    if name == "Hips":
        return (2.0 * sway, 0.0, 8.0 * sway)
    if name.startswith("Spine"):
        return (1.5 * sway, 2.0 * math.sin(2.0 * math.pi * 0.35 * t), 0.0)
    if name == "Neck":
        return (0.0, 3.0 * sway, 5.0 * sway)
    if name == "Head":
        return (0.0, 2.0 * counter, 0.0)
    if name == "LeftUpperArm":
        return (25.0 * swing, 0.0, 6.0 * sway)
    if name == "RightUpperArm":
        return (25.0 * counter, 0.0, -6.0 * sway)
    if name in ("LeftForearm", "RightForearm"):
        return (12.0 + 10.0 * abs(swing), 0.0, 0.0)
    if name in ("LeftHand", "RightHand"):
        return (5.0 * swing, 0.0, 0.0)
    if name == "LeftUpperLeg":
        return (20.0 * counter, 0.0, 0.0)
    if name == "RightUpperLeg":
        return (20.0 * swing, 0.0, 0.0)
    if name in ("LeftLowerLeg", "RightLowerLeg"):
        return (-8.0 - 12.0 * abs(swing), 0.0, 0.0)
    if name in ("LeftFoot", "RightFoot"):
        return (4.0 * swing, 0.0, 0.0)
    return (0.0, 0.0, 0.0)


def make_walk_bvh(frames: int = 600, frame_time: float = 1.0 / 60.0) -> str:
    """A deterministic in-place walk with gentle drift, neutral-rig names."""
    lines = [_BVH_HEADER.format(frames=frames, frame_time=frame_time)]
    for f in range(frames):
        t = f * frame_time
        px = 0.35 * math.sin(2.0 * math.pi * 0.05 * t)
        pz = 0.25 * math.sin(2.0 * math.pi * 0.08 * t + 1.0)
        py = 0.95 + 0.015 * math.sin(2.0 * math.pi * 2.8 * t)
        row = [f"{px:.6f}", f"{py:.6f}", f"{pz:.6f}"]
        for name in _ANIMATED:
            z, x, y = _walk_angles(name, t)
            row += [f"{z:.4f}", f"{x:.4f}", f"{y:.4f}"]
        lines.append(" ".join(row) + "\n")
    return "".join(lines)


DEMO_SCENE = """# stagelink demo scene
[scene]
name = demo

[spaces]
# scale yaw_deg offset_x offset_z
b_to_d = 1.0 0.0 5.0 5.0
a_to_d = 1.0 0.0 0.0 0.0

[stage]
bounds = 0 0 12 12
cell_size = 0.25

[obstacles]
pillar = 5.5 2.0 6.5 3.0
crate = 2.0 8.0 3.5 9.5

[zones]
# bx0 bz0 bx1 bz1   dx0 dz0 dx1 dz1   release_yaw
gate = 0 0 2 2   8.0 8.0 10.0 10.0   90

[presets]
Dig2 = 9.0 2.0 180
center = 6.0 6.0 0

[stations]
server = Server 127.0.0.1:7601
director = Director
ops = Manipulator

[composition]
mode = Fixed
# x y z yaw pitch fov
camera = 6.0 2.5 -4.0 90 12 60
light.key = 6 4 2 1.0
light.fill = 2 3 8 0.5

[avatar]
rig = demo40

[inputs]
replayA = replay walk.bvh

[puppeteer]
Root = replayA:1.0
Spine = replayA:1.0
Head = replayA:1.0
LeftArm = replayA:1.0
RightArm = replayA:1.0
LeftHand = replayA:1.0
RightHand = replayA:1.0
LeftLeg = replayA:1.0
RightLeg = replayA:1.0
"""

DEMO_SCRIPT = """# demo command script (tick indexed, 60 Hz)
60 actor 9.0 6.0
80 face_actor
100 takeover 9.0 9.0
400 release Dig2
450 mode Manipulated
460 camera 0 0.5 0 -10 0 0
500 mode Fixed
590 stop
"""


def write_demo_assets(outdir: str, frames: int = 600) -> dict:
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "bvh": os.path.join(outdir, "walk.bvh"),
        "scene": os.path.join(outdir, "demo.ini"),
        "script": os.path.join(outdir, "demo.cmds"),
    }
    with open(paths["bvh"], "w", encoding="utf-8") as fh:
        fh.write(make_walk_bvh(frames))
    with open(paths["scene"], "w", encoding="utf-8") as fh:
        fh.write(DEMO_SCENE)
    with open(paths["script"], "w", encoding="utf-8") as fh:
        fh.write(DEMO_SCRIPT)
    return paths


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "demo_assets"
    written = write_demo_assets(target)
    for kind, path in written.items():
        print(f"{kind}: {path}")
