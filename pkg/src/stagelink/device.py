"""Live capture-stream ingest.

The suit speaks a little-endian binary format, one frame per UDP datagram:

    bytes 0-3    magic "AKN1"
    byte  4      version (1)
    bytes 5-12   stream id, 8 ASCII bytes, space padded
    bytes 13-14  joint count, u16 (max 32)
    bytes 15-22  sequence, u64, strictly increasing per stream
    bytes 23-30  timestamp seconds, f64
    bytes 31-42  root translation, 3 x f32, meters
    then         joint_count x 16 bytes, quaternions (x, y, z, w) as 4 x f32

Receivers keep only the newest frame per stream (latest-wins): frames with a
sequence at or below the last seen are counted and dropped, never reordered.
Optional smoothing pulls each channel toward the incoming frame by a
configurable fraction per frame, which knocks down single-frame capture
glitches without adding model assumptions.
"""

import socket
import struct
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import slerp_batch
from .skeleton import Pose

MAGIC = b"AKN1"
VERSION = 1
MAX_JOINTS = 32
_HEADER = struct.Struct("<4sB8sHQd3f")
HEADER_SIZE = _HEADER.size  # 43
_QUAT_BYTES = 16

# |norm - 1| <= CLEAN keeps values untouched (already unit at f32 precision),
# <= RENORM rescales, beyond that the frame is rejected as corrupt.
_NORM_CLEAN_TOL = 1e-6
_NORM_RENORM_TOL = 1e-3


class DeviceStreamError(ValueError):
    pass


class BadMagic(DeviceStreamError):
    pass


class UnsupportedVersion(DeviceStreamError):
    pass


class TruncatedFrame(DeviceStreamError):
    pass


class TrailingBytes(DeviceStreamError):
    pass


class TooManyJoints(DeviceStreamError):
    pass


class BadQuaternion(DeviceStreamError):
    pass


@dataclass
class DeviceFrame:
    stream_id: str
    joint_count: int
    local_rotations: np.ndarray  # (J, 4) float64 holding f32-exact values
    root_translation: np.ndarray  # (3,)
    sequence: int
    timestamp: float

    def to_pose(self) -> Pose:
        return Pose(self.local_rotations.copy(), self.root_translation.copy(), self.timestamp)

    def __eq__(self, other):
        if not isinstance(other, DeviceFrame):
            return NotImplemented
        return (
            self.stream_id == other.stream_id
            and self.joint_count == other.joint_count
            and self.sequence == other.sequence
            and self.timestamp == other.timestamp
            and np.array_equal(self.local_rotations, other.local_rotations)
            and np.array_equal(self.root_translation, other.root_translation)
        )


def decode_device_frame(data: bytes) -> DeviceFrame:
    if len(data) < HEADER_SIZE:
        if len(data) < 4 or data[:4] != MAGIC:
            raise BadMagic("datagram does not start with the AKN1 magic")
        raise TruncatedFrame(f"{len(data)} bytes is shorter than the {HEADER_SIZE}-byte header")
    magic, version, sid, joint_count, sequence, timestamp, rx, ry, rz = _HEADER.unpack_from(
        data, 0
    )
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} (expected {VERSION})")
    if joint_count > MAX_JOINTS:
        raise TooManyJoints(f"{joint_count} joints exceeds the {MAX_JOINTS}-segment cap")
    expected = HEADER_SIZE + joint_count * _QUAT_BYTES
    if len(data) < expected:
        raise TruncatedFrame(
            f"payload is {len(data)} bytes, header declares {expected}"
        )
    if len(data) > expected:
        raise TrailingBytes(f"{len(data) - expected} bytes after the declared payload")
    quats = (
        np.frombuffer(data, dtype="<f4", count=joint_count * 4, offset=HEADER_SIZE)
        .astype(np.float64)
        .reshape(joint_count, 4)
        .copy()
    )
    norms = np.sqrt(np.sum(quats * quats, axis=1))
    if np.any(np.abs(norms - 1.0) > _NORM_RENORM_TOL):
        worst = int(np.argmax(np.abs(norms - 1.0)))
        raise BadQuaternion(f"joint {worst} quaternion norm {norms[worst]:.6f}")
    dirty = np.abs(norms - 1.0) > _NORM_CLEAN_TOL
    if np.any(dirty):
        quats[dirty] /= norms[dirty][:, None]
    root = np.array([rx, ry, rz], dtype=np.float64)
    return DeviceFrame(
        stream_id=sid.decode("ascii").rstrip(" "),
        joint_count=joint_count,
        local_rotations=quats,
        root_translation=root,
        sequence=sequence,
        timestamp=timestamp,
    )


def encode_device_frame(frame: DeviceFrame) -> bytes:
    sid = frame.stream_id.encode("ascii")
    if len(sid) > 8:
        raise DeviceStreamError(f"stream id {frame.stream_id!r} longer than 8 bytes")
    if frame.joint_count > MAX_JOINTS:
        raise TooManyJoints(f"{frame.joint_count} joints exceeds {MAX_JOINTS}")
    if frame.local_rotations.shape != (frame.joint_count, 4):
        raise DeviceStreamError("rotation array does not match joint_count")
    head = _HEADER.pack(
        MAGIC,
        VERSION,
        sid.ljust(8, b" "),
        frame.joint_count,
        frame.sequence,
        frame.timestamp,
        *(float(v) for v in frame.root_translation),
    )
    body = frame.local_rotations.astype("<f4").tobytes()
    return head + body


# ---------------------------------------------------------------------------
# Smoothing


@dataclass
class SmootherState:
    """Previous per-channel estimate plus the blend fraction alpha.

    alpha = 1 passes frames through untouched, alpha = 0 freezes the output
    at the previous estimate; in between, each rotation slerps toward the
    incoming one and the root blends linearly.
    """

    alpha: float
    rotations: Optional[np.ndarray] = None
    root: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


def smooth(state: SmootherState, frame: DeviceFrame) -> tuple[SmootherState, DeviceFrame]:
    if state.rotations is None:
        primed = SmootherState(state.alpha, frame.local_rotations.copy(), frame.root_translation.copy())
        return primed, frame
    if state.rotations.shape != frame.local_rotations.shape:
        raise DeviceStreamError(
            f"smoother tracks {state.rotations.shape[0]} joints, frame has {frame.joint_count}"
        )
    if state.alpha == 1.0:
        primed = SmootherState(state.alpha, frame.local_rotations.copy(), frame.root_translation.copy())
        return primed, frame
    rots = slerp_batch(state.rotations, frame.local_rotations, state.alpha)
    root = state.root + state.alpha * (frame.root_translation - state.root)
    out = DeviceFrame(
        frame.stream_id, frame.joint_count, rots, root, frame.sequence, frame.timestamp
    )
    return SmootherState(state.alpha, rots.copy(), root.copy()), out


# ---------------------------------------------------------------------------
# Latest-wins mailbox and the UDP listener


@dataclass
class MailboxStats:
    received: int = 0
    dropped_late: int = 0
    decode_errors: int = 0


class FrameMailbox:
    """Single-slot, latest-wins frame store; one producer, one consumer."""

    def __init__(self):
        self._lock = threading.Lock()
        self._frame: Optional[DeviceFrame] = None
        self._last_seq = -1
        self._stamp = 0.0  # receipt time, whatever clock the producer uses
        self.stats = MailboxStats()

    def offer(self, frame: DeviceFrame, stamp: float) -> bool:
        with self._lock:
            if frame.sequence <= self._last_seq:
                self.stats.dropped_late += 1
                return False
            self._frame = frame
            self._last_seq = frame.sequence
            self._stamp = stamp
            self.stats.received += 1
            return True

    def latest(self) -> tuple[Optional[DeviceFrame], float]:
        with self._lock:
            return self._frame, self._stamp


class UdpMocapListener:
    """Background receiver decoding datagrams into per-stream mailboxes."""

    def __init__(self, bind_addr: tuple[str, int]):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(bind_addr)
        self._sock.settimeout(0.2)
        self.address = self._sock.getsockname()
        self._mailboxes: dict[str, FrameMailbox] = {}
        self._lock = threading.Lock()
        self._running = False
        self._thread: Optional[threading.Thread] = None
        self.decode_errors = 0

    def mailbox(self, stream_id: str) -> FrameMailbox:
        with self._lock:
            if stream_id not in self._mailboxes:
                self._mailboxes[stream_id] = FrameMailbox()
            return self._mailboxes[stream_id]

    def start(self):
        self._running = True
        self._thread = threading.Thread(target=self._run, name="mocap-udp", daemon=True)
        self._thread.start()

    def stop(self):
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()

    def _run(self):
        import time

        while self._running:
            try:
                data, _ = self._sock.recvfrom(2048)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                frame = decode_device_frame(data)
            except DeviceStreamError:
                self.decode_errors += 1
                continue
            self.mailbox(frame.stream_id).offer(frame, time.monotonic())
