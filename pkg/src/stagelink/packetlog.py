"""Frame-packet serialization and the on-disk packet log.

Packets serialize through the same boxed-value codec the bus uses; the log
file is a flat sequence of u32-length-prefixed packet values. Two runs of
the same scene, replay and script produce byte-identical logs, which is what
the regression harness diffs.
"""

import struct

import numpy as np

from . import values

_U32 = struct.Struct("<I")


def packet_to_value(packet) -> dict:
    pose = packet.avatar_pose
    out = {
        "tick": packet.tick,
        "owner": packet.owner.value,
        "disposition": {
            "x": float(packet.disposition.position[0]),
            "z": float(packet.disposition.position[1]),
            "yaw": float(packet.disposition.facing_deg),
        },
        "mode": packet.mode,
        "camera": {
            "pos": values.f32(packet.camera_position),
            "yaw": float(packet.camera_yaw),
            "pitch": float(packet.camera_pitch),
            "fov": float(packet.camera_fov),
        },
        "lights": {
            light_id: {"pos": values.f32(pos), "intensity": float(inten)}
            for light_id, (pos, inten) in packet.lights.items()
        },
        "health": dict(packet.health),
        "regions": {region.value: status.value for region, status in packet.regions.items()},
        "pose": {
            "joints": pose.joint_count(),
            "rotations": values.f32(pose.local_rotations.reshape(-1)),
            "root": values.f32(pose.root_translation),
        },
    }
    return out


def summary_value(packet) -> dict:
    """The bus/console view of a packet: everything but the pose arrays."""
    out = packet_to_value(packet)
    out["pose"] = {"joints": packet.avatar_pose.joint_count()}
    return out


class PacketLogWriter:
    def __init__(self, path: str):
        self._fh = open(path, "wb")

    def write(self, packet):
        body = values.encode_value(packet_to_value(packet))
        self._fh.write(_U32.pack(len(body)))
        self._fh.write(body)

    def close(self):
        self._fh.close()


def read_packet_log(path: str) -> list:
    """Decode a packet log back into boxed-value maps."""
    out = []
    with open(path, "rb") as fh:
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) < 4:
                raise ValueError("truncated packet log (length prefix)")
            n = _U32.unpack(head)[0]
            body = fh.read(n)
            if len(body) < n:
                raise ValueError("truncated packet log (body)")
            out.append(values.decode_value(body))
    return out
