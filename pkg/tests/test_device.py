import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unit_quat
from stagelink.device import (
    BadMagic,
    BadQuaternion,
    DeviceFrame,
    FrameMailbox,
    SmootherState,
    TooManyJoints,
    TrailingBytes,
    TruncatedFrame,
    UnsupportedVersion,
    decode_device_frame,
    encode_device_frame,
    smooth,
)
from stagelink.skeleton import quat_angle_deg


def make_frame(rng, joints=4, stream_id="suitA", seq=1):
    quats = random_unit_quat(rng, joints)
    # quantize to f32 so encode/decode is lossless
    quats = quats.astype(np.float32).astype(np.float64)
    root = rng.normal(size=3).astype(np.float32).astype(np.float64)
    return DeviceFrame(stream_id, joints, quats, root, seq, float(np.float64(seq) / 60.0))


class TestWireFormat:
    def test_identity_frame_layout(self):
        ident = np.tile([0.0, 0.0, 0.0, 1.0], (2, 1))
        frame = DeviceFrame("s1", 2, ident, np.zeros(3), 7, 0.5)
        data = encode_device_frame(frame)
        assert data[:4] == b"AKN1"
        assert data[4] == 1
        assert data[5:13] == b"s1      "
        assert struct.unpack_from("<H", data, 13)[0] == 2
        assert struct.unpack_from("<Q", data, 15)[0] == 7
        assert struct.unpack_from("<d", data, 23)[0] == 0.5
        assert len(data) == 43 + 2 * 16
        back = decode_device_frame(data)
        assert back == frame

    def test_32_joints_is_555_bytes(self, rng):
        frame = make_frame(rng, joints=32)
        assert len(encode_device_frame(frame)) == 555

    def test_bad_magic(self, rng):
        data = bytearray(encode_device_frame(make_frame(rng)))
        data[0:4] = b"NOPE"
        with pytest.raises(BadMagic):
            decode_device_frame(bytes(data))

    def test_bad_version(self, rng):
        data = bytearray(encode_device_frame(make_frame(rng)))
        data[4] = 9
        with pytest.raises(UnsupportedVersion):
            decode_device_frame(bytes(data))

    def test_truncated_payload(self, rng):
        data = encode_device_frame(make_frame(rng))
        with pytest.raises(TruncatedFrame):
            decode_device_frame(data[:-1])

    def test_trailing_bytes(self, rng):
        data = encode_device_frame(make_frame(rng))
        with pytest.raises(TrailingBytes):
            decode_device_frame(data + b"\x00")

    def test_33_joints_rejected(self, rng):
        frame = make_frame(rng, joints=32)
        data = bytearray(encode_device_frame(frame))
        struct.pack_into("<H", data, 13, 33)
        data += b"\x00" * 16
        with pytest.raises(TooManyJoints):
            decode_device_frame(bytes(data))

    def test_non_unit_quaternion_rejected(self):
        bad = np.tile([0.0, 0.0, 0.0, 1.5], (1, 1))
        frame = DeviceFrame("x", 1, bad, np.zeros(3), 1, 0.0)
        with pytest.raises(BadQuaternion):
            decode_device_frame(encode_device_frame(frame))

    def test_slightly_off_quaternion_renormalized(self):
        q = np.array([[0.0, 0.0, 0.0, 1.0 + 5e-4]])
        frame = DeviceFrame("x", 1, q, np.zeros(3), 1, 0.0)
        out = decode_device_frame(encode_device_frame(frame))
        assert abs(np.linalg.norm(out.local_rotations[0]) - 1.0) < 1e-9

    @given(st.integers(0, 2**32 - 1), st.integers(0, 32))
    @settings(max_examples=150, deadline=None)
    def test_round_trip(self, seed, joints):
        rng = np.random.default_rng(seed)
        frame = make_frame(rng, joints=joints, seq=seed)
        assert decode_device_frame(encode_device_frame(frame)) == frame


class TestSmoothing:
    def test_alpha_one_is_passthrough(self, rng):
        state = SmootherState(1.0)
        f1, f2 = make_frame(rng, seq=1), make_frame(rng, seq=2)
        state, out = smooth(state, f1)
        state, out = smooth(state, f2)
        assert out == f2

    def test_alpha_zero_holds_previous(self, rng):
        state = SmootherState(0.0)
        f1, f2 = make_frame(rng, seq=1), make_frame(rng, seq=2)
        state, _ = smooth(state, f1)
        _, out = smooth(state, f2)
        assert np.array_equal(out.local_rotations, f1.local_rotations)
        assert np.array_equal(out.root_translation, f1.root_translation)

    def test_geometric_convergence(self, rng):
        state = SmootherState(0.5)
        f0 = make_frame(rng, seq=1)
        target = make_frame(rng, seq=2)
        state, _ = smooth(state, f0)
        gap = None
        for k in range(3, 9):
            bump = DeviceFrame(
                target.stream_id,
                target.joint_count,
                target.local_rotations,
                target.root_translation,
                k,
                0.0,
            )
            state, out = smooth(state, bump)
            new_gap = quat_angle_deg(out.local_rotations[0], target.local_rotations[0])
            if gap is not None and gap > 1e-9:
                assert new_gap == pytest.approx(gap / 2, rel=1e-4)
            gap = new_gap

    def test_channel_mismatch_raises(self, rng):
        state = SmootherState(0.5)
        state, _ = smooth(state, make_frame(rng, joints=4, seq=1))
        with pytest.raises(Exception, match="joints"):
            smooth(state, make_frame(rng, joints=5, seq=2))

    def test_alpha_range_validated(self):
        with pytest.raises(ValueError):
            SmootherState(1.5)


class TestMailbox:
    def test_latest_wins_and_late_drops(self, rng):
        box = FrameMailbox()
        f1, f2, f3 = (make_frame(rng, seq=s) for s in (1, 2, 2))
        assert box.offer(f1, 0.0)
        assert box.offer(f2, 1.0)
        assert not box.offer(f3, 2.0)  # duplicate seq dropped
        assert not box.offer(f1, 3.0)  # stale seq dropped
        latest, stamp = box.latest()
        assert latest.sequence == 2 and stamp == 1.0
        assert box.stats.received == 2
        assert box.stats.dropped_late == 2

    def test_empty_mailbox(self):
        frame, _ = FrameMailbox().latest()
        assert frame is None


class TestUdp:
    def test_datagram_to_mailbox(self, rng):
        import socket
        import time

        from stagelink.device import UdpMocapListener

        listener = UdpMocapListener(("127.0.0.1", 0))
        listener.start()
        try:
            frame = make_frame(rng, stream_id="live1", seq=5)
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.sendto(encode_device_frame(frame), listener.address)
            sock.sendto(b"garbage", listener.address)
            deadline = time.time() + 2.0
            got = None
            while time.time() < deadline:
                got, _ = listener.mailbox("live1").latest()
                if got is not None and listener.decode_errors:
                    break
                time.sleep(0.01)
            assert got == frame
            assert listener.decode_errors == 1
            sock.close()
        finally:
            listener.stop()
