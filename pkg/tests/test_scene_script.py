import numpy as np
import pytest

from stagelink.commands import CmdRelease, CmdSetMode, CmdStop, CmdTakeover
from stagelink.scene import SceneError, load_profile, load_scene, resolve_rig
from stagelink.script import ScriptError, parse_script


class TestScene:
    def test_demo_scene_loads(self, demo_assets):
        scene = load_scene(demo_assets["scene"])
        assert scene.name == "demo"
        assert scene.stage_bounds.x1 == 12.0
        assert len(scene.obstacles) == 2
        assert scene.zones.get("gate").release_yaw_deg == 90.0
        assert "Dig2" in scene.presets
        assert scene.composition.mode == "Fixed"
        assert len(scene.avatar) == 40
        assert [i.id for i in scene.inputs] == ["replayA"]
        assert set(scene.puppeteer_routes) == {
            "Root", "Spine", "Head", "LeftArm", "RightArm",
            "LeftHand", "RightHand", "LeftLeg", "RightLeg",
        }
        roles = [s.role.value for _, s in scene.stations]
        assert roles == ["Server", "Director", "Manipulator"]
        assert np.allclose(scene.calibration.b_to_d.offset, [5.0, 5.0])

    def test_missing_file(self):
        with pytest.raises(SceneError, match="not found"):
            load_scene("/nonexistent/scene.ini")

    def test_missing_stage_section(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[scene]\nname = x\n")
        with pytest.raises(SceneError, match="stage"):
            load_scene(str(p))

    def test_two_directors_rejected(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text(
            "[stage]\nbounds = 0 0 4 4\n"
            "[stations]\na = Director\nb = Director\n"
        )
        with pytest.raises(SceneError, match="Director"):
            load_scene(str(p))

    def test_bad_similarity(self, tmp_path):
        p = tmp_path / "bad.ini"
        p.write_text("[stage]\nbounds = 0 0 4 4\n[spaces]\nb_to_d = 0 0 0 0\n")
        with pytest.raises(SceneError, match="scale"):
            load_scene(str(p))

    def test_builtin_rigs_resolve(self):
        assert len(resolve_rig("neutral")) == 23
        assert len(resolve_rig("device32")) == 32
        assert len(resolve_rig("demo40")) == 40
        with pytest.raises(SceneError):
            resolve_rig("bogus77")

    def test_profile_file(self, tmp_path):
        p = tmp_path / "avatar.prof"
        p.write_text(
            "[profile]\nrig = demo40\nheight = 2.5\n"
            "[aliases]\nHips = Hips\nSpine1 = Spine1\n"
        )
        rig_ref, aliases, height = load_profile(str(p))
        assert rig_ref == "demo40"
        assert aliases == {"Hips": "Hips", "Spine1": "Spine1"}
        assert height == 2.5


class TestScript:
    def test_parse_demo_script(self, demo_assets):
        with open(demo_assets["script"]) as fh:
            schedule = parse_script(fh.read())
        assert isinstance(schedule[100][0], CmdTakeover)
        assert isinstance(schedule[400][0], CmdRelease)
        assert schedule[400][0].preset_name == "Dig2"
        assert isinstance(schedule[450][0], CmdSetMode)
        assert isinstance(schedule[590][0], CmdStop)

    def test_comments_and_blanks(self):
        schedule = parse_script("# nothing\n\n10 mode Fixed  # trailing\n")
        assert isinstance(schedule[10][0], CmdSetMode)

    def test_bad_tick(self):
        with pytest.raises(ScriptError, match="tick index"):
            parse_script("abc takeover 1 2\n")

    def test_unknown_verb(self):
        with pytest.raises(ScriptError, match="unknown command"):
            parse_script("5 dance\n")

    def test_wrong_arity(self):
        with pytest.raises(ScriptError, match="takeover"):
            parse_script("5 takeover 1\n")

    def test_error_has_line(self):
        try:
            parse_script("1 mode Fixed\n2 bogus\n")
        except ScriptError as exc:
            assert exc.line == 2
        else:
            pytest.fail("expected ScriptError")

    def test_multiple_commands_one_tick(self):
        schedule = parse_script("7 actor 1 2\n7 face_actor\n")
        assert len(schedule[7]) == 2
