"""Acceptance suite: one test per release criterion, stated tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion; any red line blocks release.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import random_unit_quat
from test_pathfind import dijkstra_cost, pair_cost, random_mesh

from stagelink import fixtures, values
from stagelink.bvh import parse_bvh, sample_clip
from stagelink.commands import CmdRelease, CmdTakeover
from stagelink.device import DeviceFrame, decode_device_frame, encode_device_frame
from stagelink.eventbus import (
    ENVELOPE_CAP,
    BusSession,
    EventEnvelope,
    PayloadTooLarge,
    Station,
    StationRole,
    encode_envelope,
)
from stagelink.pathfind import ControlOwner, NoPath, find_path
from stagelink.retarget import RetargetProfile, retarget
from stagelink.rigs import neutral_skeleton, scaled_copy
from stagelink.scene import load_scene
from stagelink.server import SessionConfig, StageServer
from stagelink.skeleton import Pose, forward_kinematics
from stagelink.stagespace import (
    disposition_correction,
    rotate_space_B,
    solve_disposition,
    wrap_deg,
)


def report(n, text):
    print(f"\n[ACCEPTANCE {n}] PASS — {text}")


def random_value(rng, depth=1):
    kinds = 6 if depth < 8 else 5
    k = int(rng.integers(0, kinds))
    if k == 0:
        return float(rng.normal() * 10)
    if k == 1:
        return int(rng.integers(-(2**62), 2**62))
    if k == 2:
        return bool(rng.integers(0, 2))
    if k == 3:
        n = int(rng.integers(0, 12))
        return "".join(chr(int(c)) for c in rng.integers(32, 0x2FF, size=n))
    if k == 4:
        return values.f32(rng.normal(size=int(rng.integers(0, 8))))
    out = {}
    for _ in range(int(rng.integers(0, 4))):
        key = "".join(chr(int(c)) for c in rng.integers(97, 123, size=int(rng.integers(1, 6))))
        out[key] = random_value(rng, depth + 1)
    return out


def test_01_codec_law_and_envelope_cap():
    started = time.perf_counter()
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        v = random_value(rng)
        data = values.encode_value(v)
        back = values.decode_value(data)
        assert values.values_equal(back, v)
        assert values.encode_value(back) == data  # canonical bytes
    # envelope body cap: a one-byte topic leaves 28 bytes of framing overhead
    fits = EventEnvelope("t", 1, 1, 0.0, "x" * (ENVELOPE_CAP - 28))
    assert len(encode_envelope(fits)) == 4 + ENVELOPE_CAP
    with pytest.raises(PayloadTooLarge):
        encode_envelope(EventEnvelope("t", 1, 1, 0.0, "x" * (ENVELOPE_CAP - 27)))
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"codec criterion took {elapsed:.1f}s (budget 10s)"
    report(1, f"10,000 values round-tripped canonically; cap 10240/10241 in {elapsed:.1f}s")


def test_02_device_stream_cap_and_round_trip():
    rng = np.random.default_rng(2)
    # exactly 32 joints decodes
    quats = random_unit_quat(rng, 32).astype(np.float32).astype(np.float64)
    frame = DeviceFrame("suit", 32, quats, np.zeros(3), 1, 0.0)
    assert decode_device_frame(encode_device_frame(frame)) == frame
    # 33 joints rejected
    import struct

    data = bytearray(encode_device_frame(frame))
    struct.pack_into("<H", data, 13, 33)
    data += b"\x00" * 16
    with pytest.raises(Exception, match="32"):
        decode_device_frame(bytes(data))
    for k in range(1_000):
        joints = int(rng.integers(0, 33))
        q = random_unit_quat(rng, joints).astype(np.float32).astype(np.float64)
        q = q.reshape(joints, 4)
        root = rng.normal(size=3).astype(np.float32).astype(np.float64)
        f = DeviceFrame(f"s{k % 90}", joints, q, root, k + 1, float(k) / 60.0)
        assert decode_device_frame(encode_device_frame(f)) == f
    report(2, "32-joint cap enforced; 1,000 random frames round-tripped")


def test_03_retarget_identity_and_chaining():
    rng = np.random.default_rng(3)
    neutral = neutral_skeleton()
    device = scaled_copy(neutral, 1.65 / neutral.height)
    avatar = scaled_copy(neutral, 2.10 / neutral.height)
    identity = RetargetProfile.build(neutral, neutral)
    direct = RetargetProfile.build(device, avatar)
    stage1 = RetargetProfile.build(device, neutral)
    stage2 = RetargetProfile.build(neutral, avatar)
    for _ in range(500):
        pose = Pose(random_unit_quat(rng, len(neutral)), rng.normal(size=3))
        out = retarget(pose, identity)
        assert np.array_equal(out.local_rotations, pose.local_rotations)
        assert np.array_equal(out.root_translation, pose.root_translation)
        dev_pose = Pose(random_unit_quat(rng, len(device)), rng.normal(size=3))
        one = retarget(dev_pose, direct)
        two = retarget(retarget(dev_pose, stage1), stage2)
        assert np.all(np.abs(one.local_rotations - two.local_rotations) < 1e-6)
    # foot level on scaled rigs: plant the source, check the destination
    for _ in range(50):
        pose = Pose(random_unit_quat(rng, len(neutral)), np.zeros(3))
        pos, _ = forward_kinematics(neutral, pose)
        pose.root_translation = np.array([0.0, -pos[:, 1].min(), 0.0])
        out = retarget(pose, stage2)
        pos_a, _ = forward_kinematics(avatar, out)
        assert abs(pos_a[:, 1].min()) < 0.01
    report(3, "identity exact; two-stage == one-stage < 1e-6 x500; foot level < 1 cm")


def test_04_astar_matches_dijkstra_exactly():
    started = time.perf_counter()
    rng = np.random.default_rng(4)
    routes = 0
    blocked = 0
    for _ in range(200):
        mesh = random_mesh(rng, max_side=50)
        cells = np.argwhere(mesh.walkable)
        a, b = rng.choice(len(cells), size=2, replace=True)
        (sz, sx), (gz, gx) = cells[a], cells[b]
        oracle = dijkstra_cost(mesh, (sx, sz), (gx, gz))
        try:
            path = find_path(mesh, mesh.cell_center(sx, sz), mesh.cell_center(gx, gz))
        except NoPath:
            assert oracle is None, "A* reported NoPath where Dijkstra found a route"
            blocked += 1
        else:
            assert oracle is not None, "A* found a route where Dijkstra reports none"
            assert path.total_cost == pair_cost(mesh, oracle), "cost mismatch vs oracle"
            routes += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"A* criterion took {elapsed:.1f}s (budget 30s)"
    report(4, f"200 meshes: {routes} routes equal to Dijkstra exactly, "
              f"{blocked} NoPath agreements, {elapsed:.1f}s")


def test_05_handoff_invariants_and_limb_retention(tmp_path):
    # exhaustive table lives in test_pathfind (TestControlTransitions); the
    # replay leg drives the full server for 600 frames
    assets = fixtures.write_demo_assets(str(tmp_path))
    scene = load_scene(assets["scene"])
    server = StageServer(scene, SessionConfig(tick_rate=60))
    clip = parse_bvh(open(assets["bvh"]).read())
    server.add_replay_input("replayA", clip)
    server.set_routes(scene.puppeteer_routes)
    stage1 = RetargetProfile.build(clip.skeleton, server.neutral)
    preset = server.presets["Dig2"]
    locomotion_frames = 0
    for tick in range(600):
        if tick == 100:
            server.enqueue(CmdTakeover(9.0, 9.0), StationRole.Manipulator)
        if tick == 400:
            server.enqueue(CmdRelease("Dig2"), StationRole.Manipulator)
        t = server.sim_time
        packet = server.run_tick()
        if 100 <= tick < 400:
            assert packet.owner is ControlOwner.PathfinderLocomotion
            raw = retarget(retarget(sample_clip(clip, t), stage1), server.stage2)
            assert np.array_equal(
                packet.avatar_pose.local_rotations[1:], raw.local_rotations[1:]
            ), f"limb rotations diverged at tick {tick}"
            locomotion_frames += 1
        if tick == 400:
            assert packet.owner is ControlOwner.MocaptorFull
            assert np.all(np.abs(packet.disposition.position - preset.position) < 1e-6)
            assert abs(wrap_deg(packet.disposition.facing_deg - preset.yaw_deg)) < 1e-6
    assert locomotion_frames == 300
    report(5, "owner table + 300 locomotion frames with bitwise limb retention; "
              "post-release root == preset < 1e-6")


def test_06_space_rotation_closed_loop():
    rng = np.random.default_rng(6)
    neutral = neutral_skeleton()
    for _ in range(1_000):
        avatar = rng.uniform(-10, 10, size=2)
        actor = rng.uniform(-10, 10, size=2)
        if np.linalg.norm(actor - avatar) < 1e-3:
            continue
        current = float(rng.uniform(-180, 180))
        target = solve_disposition(avatar, actor)
        theta = disposition_correction(current, target)
        assert abs(wrap_deg(current + theta - target)) < 1e-6
    pose = Pose(random_unit_quat(rng, len(neutral)), rng.normal(size=3))
    out = rotate_space_B(pose, 123.0, [0.5, -2.0])
    assert np.array_equal(out.local_rotations[1:], pose.local_rotations[1:])
    report(6, "1,000 correction loops < 1e-6 deg; non-root rotations bitwise stable")


def test_07_end_to_end_determinism(tmp_path):
    assets = fixtures.write_demo_assets(str(tmp_path))
    logs = []
    for run in (1, 2):
        log = os.path.join(str(tmp_path), f"run{run}.log")
        cmd = [
            sys.executable, "-m", "stagelink.cli",
            "--scene", assets["scene"], "--script", assets["script"],
            "--record", log, "--max-ticks", "600", "--fast",
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0, proc.stderr
        logs.append(open(log, "rb").read())
    assert logs[0] == logs[1], "packet logs differ between identical runs"
    assert len(logs[0]) > 100_000
    report(7, f"two CLI runs produced byte-identical {len(logs[0])}-byte packet logs")


def test_08_tick_budget(tmp_path):
    # default-scale scene: one 32-joint device stream, 23-joint neutral,
    # 40-joint avatar, 100x100 navmesh, one takeover mid-run
    scene_text = """
[scene]
name = budget
[stage]
bounds = 0 0 25 25
cell_size = 0.25
[presets]
mark = 20 20 0
[avatar]
rig = demo40
"""
    scene_path = tmp_path / "budget.ini"
    scene_path.write_text(scene_text)
    scene = load_scene(str(scene_path))
    assert scene.cell_size == 0.25
    server = StageServer(scene, SessionConfig(tick_rate=60))
    assert server.mesh.width == 100 and server.mesh.height == 100
    from stagelink.device import FrameMailbox

    mailbox = FrameMailbox()
    server.add_mocap_input("suit", mailbox, "device32")
    server.autowire_routes()
    rng = np.random.default_rng(8)
    base = random_unit_quat(rng, 32)
    for tick in range(900):
        wob = math.sin(tick / 17.0) * 0.02
        quats = base.copy()
        quats[:, 0] += wob
        quats /= np.linalg.norm(quats, axis=1)[:, None]
        mailbox.offer(
            DeviceFrame("suit", 32, quats, np.array([12.0, 0.95, 12.0]), tick + 1, tick / 60),
            float(tick),
        )
        if tick == 450:
            server.enqueue(CmdTakeover(20.0, 20.0), StationRole.Manipulator)
        server.run_tick()
    stats = server.tick_stats()
    assert stats["median_ms"] < 4.0, f"median {stats['median_ms']:.2f} ms exceeds 4 ms"
    assert stats["p99_ms"] < 16.0, f"p99 {stats['p99_ms']:.2f} ms exceeds 16 ms"
    report(8, f"900 ticks at default scale: median {stats['median_ms']:.2f} ms, "
              f"p99 {stats['p99_ms']:.2f} ms (budget 4/16)")


def test_09_bus_fifo_under_load():
    sender = BusSession(Station(1, StationRole.Server, "127.0.0.1:0"), listen=True)
    receiver = BusSession(Station(2, StationRole.Console, "127.0.0.1:0"), listen=True)
    try:
        assert receiver.connect_peer(sender.listen_address)
        got = []
        receiver.subscribe("load/*", lambda env: got.append(env.seq))
        deadline = time.time() + 5
        while (not sender.peers() or not receiver.peers()) and time.time() < deadline:
            time.sleep(0.01)
        receiver.sync()
        for k in range(10_000):
            sender.publish("load/event", {"k": k})
        deadline = time.time() + 30
        while len(got) < 10_000 and time.time() < deadline:
            time.sleep(0.05)
        assert len(got) == 10_000, f"received {len(got)} of 10,000"
        assert all(b > a for a, b in zip(got, got[1:])), "seq not strictly increasing"
    finally:
        sender.close()
        receiver.close()
    report(9, "10,000 events delivered in order, strictly increasing seq, zero drops")
