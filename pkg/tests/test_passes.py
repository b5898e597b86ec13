"""End-to-end tests of the generation passes against the scripted backends."""

import numpy as np
import pytest

import scenex as sx
from scenex.core.errors import UsageError
from scenex.core.geometry import Aabb3
from scenex.core.scene import EventKind, ObjectCategory, ObjectSpec, make_instance
from scenex.perception.mock import MockBackends, MockScript
from scenex.pipeline.passes import LiftedDetection, build_backends, initial_scene

# a 3 m room seen from its (3, 3) corner; the cube sits well inside the centered mask
OTTOMAN = {
    "name": "ottoman",
    "description": "a grey ottoman",
    "box": {"min": [0.375, 0.375, 0.0], "max": [1.125, 1.125, 0.75]},
}


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("SCENEX_SEED", raising=False)


def kinds(scene, kind):
    return [ev for ev in scene.pass_log if ev.kind is kind]


def closure_config(output_dir):
    return sx.make_config(
        {
            "room": {"extent": [3.0, 3.0]},
            "seed": 7,
            "output_dir": str(output_dir),
            "views": {"max_views": 1, "width": 768, "height": 768, "eye_height": 1.35, "look_height": 0.375},
            "gateway": {"min_count_room": 1, "samples_per_view": 1, "max_attempts": 1},
            "scoring": {"delta_floor": 0.001},
            "search": {"grid_step": 0.01},
            "small_objects": {"enabled": False},
        }
    )


def closure_backends():
    return sx.mock_backends(MockScript.model_validate({"world": [OTTOMAN], "depth_scale": 0.5, "depth_offset": 2.0}))


def test_mock_run_recovers_scripted_geometry(tmp_path):
    """A scripted object comes back where it was, at its size."""
    sleeps = []
    path = sx.generate(closure_config(tmp_path), closure_backends(), sx.demo_catalog(), sleep=sleeps.append)
    scene = sx.load_scene(path)

    assert sleeps == []
    assert len(kinds(scene, EventKind.OBJECT_LIFTED)) == 1
    assert [inst.name for inst in scene.instances] == ["ottoman"]
    box = scene.instances[0].world_bbox
    truth = Aabb3(OTTOMAN["box"]["min"], OTTOMAN["box"]["max"])
    assert np.linalg.norm(np.subtract(box.center, truth.center)) <= 0.02
    rel = np.abs(np.subtract(box.dims, truth.dims)) / np.asarray(truth.dims)
    assert rel.max() <= 0.05
    assert (tmp_path / "layout.events.jsonl").exists()


def test_mock_run_is_byte_identical(tmp_path):
    """Repeated runs with the same seed write the same scene bytes."""
    outputs = []
    for k in range(3):
        path = sx.generate(closure_config(tmp_path / f"run{k}"), closure_backends(), sx.demo_catalog())
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def low_res_config(**gateway):
    return sx.make_config(
        {
            "room": {"extent": [4.0, 4.0]},
            "views": {"width": 64, "height": 64},
            "gateway": {"samples_per_view": 1, "max_attempts": 2, "min_count_room": 1, **gateway},
        }
    )


def test_full_room_stops_before_first_view():
    """Occupancy above the threshold skips every remaining view."""
    room = sx.Room(extent=(4.0, 4.0))
    platform = make_instance("platform_000", ObjectSpec("platform"), "p", (3.8, 3.8, 0.2), (2.0, 2.0, 0.0))
    scene = sx.SceneState(room=room, instances=(platform,))
    out = sx.run_furniture_pass(scene, low_res_config(), sx.mock_backends(), sx.demo_catalog())

    assert kinds(out, EventKind.VIEW_SELECTED) == []
    skipped = kinds(out, EventKind.VIEW_SKIPPED)
    assert [ev.payload["view"] for ev in skipped] == [0, 1, 2]
    assert all(ev.payload["reason"] == "occupancy" for ev in skipped)
    assert out.instances == scene.instances


def test_occupancy_stops_after_first_view(tmp_path):
    """Once the first view fills the room past the threshold the remaining views are skipped."""
    room = sx.Room(extent=(3.0, 3.0))
    # flat rugs on the camera side leave the ottoman's corner clear: 6.15 of 9 m2 covered
    rugs = (
        make_instance("rug_000", ObjectSpec("rug"), "r", (1.5, 3.0, 0.05), (2.25, 1.5, 0.0)),
        make_instance("rug_001", ObjectSpec("rug"), "r", (1.5, 1.1, 0.05), (0.75, 2.45, 0.0)),
    )
    scene = sx.SceneState(room=room, instances=rugs)
    assert sx.occupancy(scene) < 0.7
    config = closure_config(tmp_path)
    config = config.model_copy(update={"views": config.views.model_copy(update={"max_views": 3})})
    out = sx.run_furniture_pass(scene, config, closure_backends(), sx.demo_catalog())

    assert [inst.name for inst in out.instances] == ["rug", "rug", "ottoman"]
    assert [ev.payload["view"] for ev in kinds(out, EventKind.VIEW_SELECTED)] == [0]
    skipped = kinds(out, EventKind.VIEW_SKIPPED)
    assert [ev.payload["view"] for ev in skipped] == [1, 2]
    assert all(ev.payload["reason"] == "occupancy" for ev in skipped)
    assert all(ev.payload["occupancy"] > 0.7 for ev in skipped)
    assert sx.occupancy(out) > 0.7



def test_empty_room_uses_every_view():
    """A room that stays empty is looked at from all three views."""
    scene = sx.SceneState(room=sx.Room(extent=(4.0, 4.0)))
    sleeps = []
    out = sx.run_furniture_pass(scene, low_res_config(), sx.mock_backends(), sx.demo_catalog(), sleep=sleeps.append)

    assert [ev.payload["view"] for ev in kinds(out, EventKind.VIEW_SELECTED)] == [0, 1, 2]
    assert len(kinds(out, EventKind.INPAINT_REJECTED)) == 6
    assert out.instances == ()
    assert [ev.ordinal for ev in out.pass_log] == list(range(len(out.pass_log)))


def test_too_few_objects_are_rejected():
    """Frames showing fewer objects than required are regenerated, then given up."""
    cube = {"name": "crate", "box": {"min": [0.5, 0.5, 0.0], "max": [1.5, 1.5, 1.0]}}
    backends = sx.mock_backends(MockScript.model_validate({"world": [cube]}))
    config = low_res_config(min_count_room=3)
    config = config.model_copy(update={"views": config.views.model_copy(update={"max_views": 1})})
    out = sx.run_furniture_pass(sx.SceneState(room=sx.Room(extent=(4.0, 4.0))), config, backends, sx.demo_catalog())

    rejected = kinds(out, EventKind.INPAINT_REJECTED)
    assert len(rejected) == 2
    assert rejected[0].payload["reason"] == "fewer than 3 objects recognized"
    assert kinds(out, EventKind.INPAINT_ACCEPTED) == []
    assert out.instances == ()


def test_small_object_rests_on_table():
    """A scripted vase on a table is lifted and set on the tabletop."""
    room = sx.Room(extent=(4.0, 4.0))
    table = make_instance("dining_table_000", ObjectSpec("dining table"), "t", (1.6, 0.9, 0.75), (2.0, 2.0, 0.0))
    vase = {"name": "vase", "category": "small-object", "box": {"min": [1.92, 1.92, 0.75], "max": [2.08, 2.08, 0.91]}}
    config = sx.make_config(
        {
            "room": {"extent": [4.0, 4.0]},
            "views": {"width": 512, "height": 512},
            "gateway": {"samples_per_view": 1, "max_attempts": 1, "min_count_small": 1},
        }
    )
    backends = sx.mock_backends(MockScript.model_validate({"world": [vase], "depth_scale": 1.5, "depth_offset": 0.5}))
    scene = sx.SceneState(room=room, instances=(table,))
    out = sx.run_small_object_pass(scene, config, backends, sx.demo_catalog())

    small = out.by_category(ObjectCategory.SMALL)
    assert [inst.name for inst in small] == ["vase"]
    vase_inst = small[0]
    assert vase_inst.support_id == "dining_table_000"
    assert vase_inst.world_bbox.min[2] == pytest.approx(0.75, abs=1e-3)
    assert np.hypot(vase_inst.position[0] - 2.0, vase_inst.position[1] - 2.0) <= 0.02
    assert sx.validate_scene(out) == []
    assert [ev.payload["receptacle"] for ev in kinds(out, EventKind.VIEW_SELECTED)] == ["dining_table_000"]


def test_small_object_pass_without_furniture():
    """With nothing to put things on the pass leaves the scene alone."""
    scene = sx.SceneState(room=sx.Room(extent=(4.0, 4.0)))
    config = sx.make_config({"room": {"extent": [4.0, 4.0]}})
    assert sx.run_small_object_pass(scene, config, sx.mock_backends()) is scene


def test_place_lifted_floor_and_wall_objects():
    """Floor objects are searched, wall objects go on their wall, outsiders are skipped."""
    scene = sx.SceneState(room=sx.Room(extent=(4.0, 4.0)))
    config = sx.make_config({"room": {"extent": [4.0, 4.0]}})
    lifted = [
        LiftedDetection("sofa", ObjectCategory.FLOOR, Aabb3((1.0, 0.0, 0.0), (3.0, 0.9, 0.85)), "a grey sofa"),
        LiftedDetection("painting", ObjectCategory.WALL, Aabb3((1.5, 3.96, 1.2), (2.4, 4.0, 1.8))),
        LiftedDetection("lamp", ObjectCategory.FLOOR, Aabb3((5.0, 5.0, 0.0), (5.3, 5.3, 1.5))),
    ]
    events = []
    out, sets = sx.place_lifted(scene, lifted, config, sx.demo_catalog(), events=events, tag={"view": 0})

    assert sorted(inst.id for inst in out.instances) == ["painting_000", "sofa_000"]
    assert [cs.order for cs in sets] == [("sofa_000",), ("painting_000",)]
    painting = out.get("painting_000")
    assert painting.category == ObjectCategory.WALL
    assert painting.world_bbox.max[1] == pytest.approx(4.0)
    assert painting.world_bbox.center[2] == pytest.approx(1.5)
    skipped = [ev for ev in events if ev.kind is EventKind.OBJECT_SKIPPED]
    assert [(ev.payload["name"], ev.payload["reason"], ev.payload["view"]) for ev in skipped] == [
        ("lamp", "outside-room", 0)
    ]
    assert sx.validate_scene(out) == []


def test_wall_detection_away_from_walls_goes_on_floor():
    """A wall-object detection in mid-room is placed standing on the floor."""
    scene = sx.SceneState(room=sx.Room(extent=(4.0, 4.0)))
    config = sx.make_config({"room": {"extent": [4.0, 4.0]}})
    lifted = [LiftedDetection("mirror", ObjectCategory.WALL, Aabb3((1.8, 2.0, 0.5), (2.4, 2.1, 1.4)))]
    out, _ = sx.place_lifted(scene, lifted, config, sx.demo_catalog())

    mirror = out.get("mirror_000")
    assert mirror.category == ObjectCategory.FLOOR
    assert mirror.world_bbox.min[2] == 0.0
    assert mirror.world_bbox.dims[2] == pytest.approx(1.4)


def test_build_backends_and_initial_scene(tmp_path, monkeypatch):
    """Mock scripts select the offline backends; scene files seed the run."""
    script = tmp_path / "mock.yaml"
    script.write_text("seed: 2\n", encoding="utf-8")
    config = sx.make_config({"room": {"extent": [4.0, 4.0]}, "mock_script": str(script)})
    assert isinstance(build_backends(config).inpainter, MockBackends)

    for name in ("SCENEX_INPAINT_URL", "SCENEX_DEPTH_URL", "SCENEX_ANNOTATE_URL", "SCENEX_DETECT_URL"):
        monkeypatch.delenv(name, raising=False)
    with pytest.raises(UsageError):
        build_backends(sx.make_config({"room": {"extent": [4.0, 4.0]}}))

    room = sx.Room(extent=(5.0, 4.0))
    table = make_instance("table_000", ObjectSpec("table"), "t", (1.2, 0.8, 0.75), (2.0, 2.0, 0.0))
    start = sx.save_scene(sx.SceneState(room=room, instances=(table,)), tmp_path / "start.scene.json")
    scene = initial_scene(sx.make_config({"scene_file": str(start), "seed": 11}))
    assert scene.room == room
    assert scene.rng_seed == 11
    assert [inst.id for inst in scene.instances] == ["table_000"]
