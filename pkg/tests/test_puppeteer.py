import numpy as np
import pytest

from conftest import random_unit_quat
from stagelink.puppeteer import (
    BodyRegion,
    DuplicateInput,
    GamepadMapper,
    InputKind,
    Puppeteer,
    PuppeteerConfig,
    PuppeteerError,
    RefMoveDelta,
    RegionStatus,
    apply_ref_move,
)
from stagelink.rigs import region_indices
from stagelink.skeleton import Pose, quats_close


def random_pose(rng, skeleton):
    return Pose(random_unit_quat(rng, len(skeleton)), rng.normal(size=3))


class TestRegistry:
    def test_register_and_duplicate(self, neutral):
        pup = Puppeteer(neutral)
        handle = pup.register_input("neuron1", InputKind.MocapStream)
        assert handle.latest is None
        assert handle.regions == frozenset(BodyRegion)
        with pytest.raises(DuplicateInput):
            pup.register_input("neuron1", InputKind.Replay)

    def test_region_limited_input(self, neutral):
        pup = Puppeteer(neutral)
        handle = pup.register_input("pad1", InputKind.Gamepad, {BodyRegion.Root})
        assert handle.regions == frozenset({BodyRegion.Root})

    def test_config_weight_validation(self):
        with pytest.raises(PuppeteerError, match="sum"):
            PuppeteerConfig({BodyRegion.Root: (("a", 0.4), ("b", 0.4))})
        with pytest.raises(PuppeteerError, match="negative"):
            PuppeteerConfig({BodyRegion.Root: (("a", -0.5), ("b", 1.5))})

    def test_config_unknown_input_rejected(self, neutral):
        pup = Puppeteer(neutral)
        pup.register_input("a", InputKind.Replay)
        with pytest.raises(PuppeteerError, match="unknown input"):
            pup.set_config(PuppeteerConfig.solo("ghost"))


class TestBlend:
    def test_single_source_passthrough(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("solo", InputKind.Replay)
        pup.set_config(PuppeteerConfig.solo("solo"))
        pose = random_pose(rng, neutral)
        result = pup.blend({"solo": pose})
        assert np.array_equal(result.pose.local_rotations, pose.local_rotations)
        assert np.array_equal(result.pose.root_translation, pose.root_translation)
        assert all(s is RegionStatus.Ok for s in result.region_status.values())

    def test_identical_poses_blend_to_that_pose_exactly(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("a", InputKind.Replay)
        pup.register_input("b", InputKind.Replay)
        routes = {r: (("a", 0.3), ("b", 0.7)) for r in BodyRegion}
        pup.set_config(PuppeteerConfig(routes))
        pose = random_pose(rng, neutral)
        twin = pose.copy()
        result = pup.blend({"a": pose, "b": twin})
        assert np.array_equal(result.pose.local_rotations, pose.local_rotations)
        assert np.allclose(result.pose.root_translation, pose.root_translation, atol=1e-12)

    def test_regional_routing_is_exact(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("arms", InputKind.MocapStream)
        pup.register_input("body", InputKind.MocapStream)
        routes = {r: (("body", 1.0),) for r in BodyRegion}
        routes[BodyRegion.LeftArm] = (("arms", 1.0),)
        routes[BodyRegion.RightArm] = (("arms", 1.0),)
        pup.set_config(PuppeteerConfig(routes))
        pose_a, pose_b = random_pose(rng, neutral), random_pose(rng, neutral)
        result = pup.blend({"arms": pose_a, "body": pose_b})
        idx = region_indices(neutral)
        arm_idx = np.concatenate([idx[BodyRegion.LeftArm], idx[BodyRegion.RightArm]])
        for j in range(len(neutral)):
            source = pose_a if j in arm_idx else pose_b
            assert np.array_equal(result.pose.local_rotations[j], source.local_rotations[j])

    def test_regional_isolation(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("arms", InputKind.MocapStream)
        pup.register_input("body", InputKind.MocapStream)
        routes = {r: (("body", 1.0),) for r in BodyRegion}
        routes[BodyRegion.LeftArm] = (("arms", 1.0),)
        pup.set_config(PuppeteerConfig(routes))
        body = random_pose(rng, neutral)
        out1 = pup.blend({"arms": random_pose(rng, neutral), "body": body})
        out2 = pup.blend({"arms": random_pose(rng, neutral), "body": body})
        idx = region_indices(neutral)
        for region, indices in idx.items():
            if region is BodyRegion.LeftArm:
                continue
            for j in indices:
                assert np.array_equal(
                    out1.pose.local_rotations[j], out2.pose.local_rotations[j]
                )

    def test_blend_deterministic(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("a", InputKind.Replay)
        pup.register_input("b", InputKind.Replay)
        routes = {r: (("a", 0.25), ("b", 0.75)) for r in BodyRegion}
        pup.set_config(PuppeteerConfig(routes))
        snaps = {"a": random_pose(rng, neutral), "b": random_pose(rng, neutral)}
        r1 = pup.blend(snaps)
        r2 = pup.blend(snaps)
        assert np.array_equal(r1.pose.local_rotations, r2.pose.local_rotations)
        assert np.array_equal(r1.pose.root_translation, r2.pose.root_translation)

    def test_two_mocaptors_drive_one_avatar(self, neutral, rng):
        # one performer owns the upper body, the second the lower body
        pup = Puppeteer(neutral)
        pup.register_input("mocapA", InputKind.MocapStream)
        pup.register_input("mocapB", InputKind.MocapStream)
        upper = (BodyRegion.Spine, BodyRegion.Head, BodyRegion.LeftArm,
                 BodyRegion.RightArm, BodyRegion.LeftHand, BodyRegion.RightHand)
        routes = {r: (("mocapA", 1.0),) for r in upper}
        for r in (BodyRegion.Root, BodyRegion.LeftLeg, BodyRegion.RightLeg):
            routes[r] = (("mocapB", 1.0),)
        pup.set_config(PuppeteerConfig(routes))
        a, b = random_pose(rng, neutral), random_pose(rng, neutral)
        result = pup.blend({"mocapA": a, "mocapB": b})
        idx = region_indices(neutral)
        assert np.array_equal(
            result.pose.local_rotations[idx[BodyRegion.LeftArm]],
            a.local_rotations[idx[BodyRegion.LeftArm]],
        )
        assert np.array_equal(
            result.pose.local_rotations[idx[BodyRegion.LeftLeg]],
            b.local_rotations[idx[BodyRegion.LeftLeg]],
        )
        assert np.array_equal(result.pose.root_translation, b.root_translation)

    def test_missing_data_holds_then_rests(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("feed", InputKind.MocapStream)
        pup.set_config(PuppeteerConfig.solo("feed"))
        # nothing yet: rest pose, flagged
        r0 = pup.blend({})
        assert all(s is RegionStatus.Rest for s in r0.region_status.values())
        assert np.allclose(r0.pose.root_translation, neutral.rest_root_translation())
        # data arrives
        pose = random_pose(rng, neutral)
        r1 = pup.blend({"feed": pose})
        assert all(s is RegionStatus.Ok for s in r1.region_status.values())
        # dropout: hold the last blended value, flagged
        r2 = pup.blend({})
        assert all(s is RegionStatus.Held for s in r2.region_status.values())
        assert np.array_equal(r2.pose.local_rotations, r1.pose.local_rotations)
        assert np.array_equal(r2.pose.root_translation, r1.pose.root_translation)

    def test_partial_sources_flagged(self, neutral, rng):
        pup = Puppeteer(neutral)
        pup.register_input("a", InputKind.Replay)
        pup.register_input("b", InputKind.Replay)
        pup.set_config(PuppeteerConfig({r: (("a", 0.5), ("b", 0.5)) for r in BodyRegion}))
        pose = random_pose(rng, neutral)
        result = pup.blend({"a": pose})
        assert all(s is RegionStatus.Partial for s in result.region_status.values())
        # the available source carries full weight
        assert np.array_equal(result.pose.local_rotations, pose.local_rotations)


class TestRefMove:
    def test_zero_delta_is_identity(self, neutral, rng):
        pose = random_pose(rng, neutral)
        out = apply_ref_move(pose, RefMoveDelta(np.zeros(3), 0.0))
        assert np.array_equal(out.local_rotations, pose.local_rotations)
        assert np.array_equal(out.root_translation, pose.root_translation)

    def test_yaw_180_reverses_facing_in_place(self, neutral):
        from stagelink.stagespace import facing_of

        pose = Pose.rest(neutral)
        pose.root_translation = np.array([2.0, 0.9, -1.0])
        out = apply_ref_move(pose, RefMoveDelta(np.zeros(3), 180.0))
        assert np.array_equal(out.root_translation, pose.root_translation)
        assert abs(abs(facing_of(out.local_rotations[0])) - 180.0) < 1e-9

    def test_translation_leaves_rotations_bit_identical(self, neutral, rng):
        pose = random_pose(rng, neutral)
        out = apply_ref_move(pose, RefMoveDelta(np.array([0.0, 0.0, 1.0]), 0.0))
        assert np.array_equal(out.local_rotations, pose.local_rotations)
        assert out.root_translation[2] == pose.root_translation[2] + 1.0

    def test_invertibility(self, neutral, rng):
        pose = random_pose(rng, neutral)
        delta = RefMoveDelta(rng.normal(size=3), 73.0)
        back = apply_ref_move(apply_ref_move(pose, delta), delta.inverted())
        assert np.all(np.abs(back.root_translation - pose.root_translation) < 1e-6)
        for j in range(len(neutral)):
            assert quats_close(back.local_rotations[j], pose.local_rotations[j], tol=1e-6)


class TestGamepad:
    def test_dead_zone(self):
        mapper = GamepadMapper()
        delta = mapper.delta(0.05, -0.09, 0.0, dt=1.0)
        assert np.all(delta.translation == 0.0) and delta.yaw_deg == 0.0
        assert mapper.is_idle(0.05, -0.09, 0.0)

    def test_sticks_scale_with_dt(self):
        mapper = GamepadMapper(translate_speed=2.0, yaw_speed=90.0)
        delta = mapper.delta(0.0, 1.0, -1.0, dt=0.5)
        assert np.allclose(delta.translation, [1.0, 0.0, 0.0])
        assert delta.yaw_deg == 45.0
