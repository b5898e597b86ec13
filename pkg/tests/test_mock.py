"""Tests for the scripted offline perception backends."""

import numpy as np
import pytest
from pydantic import ValidationError

import scenex as sx
from scenex.core.errors import ServiceError
from scenex.core.render import render_rgb
from scenex.core.scene import ObjectSpec, make_instance
from scenex.perception.gateway import GatewaySettings, InpaintRequest, inpaint, parse_annotation_lines
from scenex.perception.mock import MockBackends, MockScript, load_mock_script, mock_backends
from scenex.perception.views import MaskProvenance

STOOL = {"name": "stool", "description": "a wooden stool", "box": {"min": [1.8, 1.8, 0.0], "max": [2.2, 2.2, 0.4]}}
CUP = {"name": "cup", "category": "small-object", "box": {"min": [1.9, 1.9, 0.4], "max": [2.0, 2.0, 0.5]}}


def room_request():
    """First room view of an empty 4x4 room with its central mask."""
    room = sx.Room(extent=(4.0, 4.0))
    cam = sx.room_views(room, width=100, height=100).cameras[0]
    depth, ids = sx.rasterize(sx.SceneState(room=room), cam)
    mask = sx.build_inpaint_mask(MaskProvenance.ROOM_CENTERED, (depth, ids), cam)
    return InpaintRequest(render_rgb(depth, ids), mask, "a room", camera=cam, depth=depth), room


def test_inpaint_reveals_world_objects_inside_mask():
    """A scripted floor object inside the masked region is painted in."""
    request, _ = room_request()
    mock = MockBackends(MockScript.model_validate({"world": [STOOL, CUP]}))
    image = mock.inpaint(request).image

    sprites = mock.sprites_of(image)
    assert [obj.name for obj, _ in sprites] == ["stool"]
    mask = sprites[0][1]
    assert mask.sum() >= 20
    assert not (mask & ~request.mask.binary()).any()
    outside = ~request.mask.binary()
    np.testing.assert_array_equal(image[outside], request.image[outside])


def test_depth_is_affine_in_true_depth():
    """Estimated depth is scale times the true depth plus offset."""
    request, room = room_request()
    mock = MockBackends(MockScript.model_validate({"world": [STOOL], "depth_scale": 0.5, "depth_offset": 2.0}))
    image = mock.inpaint(request).image
    estimate = mock.estimate_depth(image)

    stool = make_instance("stool_000", ObjectSpec("stool"), "box", (0.4, 0.4, 0.4), (2.0, 2.0, 0.0))
    truth, _ = sx.rasterize(sx.SceneState(room=room, instances=(stool,)), request.camera)
    np.testing.assert_allclose(estimate, 0.5 * truth.values + 2.0, atol=1e-6)


def test_annotate_and_detect_describe_sprites():
    """Annotation lines and detections follow the stamped sprites."""
    request, _ = room_request()
    mock = MockBackends(MockScript.model_validate({"world": [STOOL]}))
    image = mock.inpaint(request).image

    parsed = parse_annotation_lines(mock.annotate(image, "what is here?"))
    assert [(a.name, a.description) for a in parsed] == [("stool", "a wooden stool")]

    dets = mock.detect(image, ["Stool", "lamp"])
    assert len(dets) == 1
    c0, r0, c1, r1 = dets[0].box
    rows, cols = np.nonzero(dets[0].mask)
    assert (c0, r0) == (cols.min(), rows.min())
    assert (c1, r1) == (cols.max() + 1, rows.max() + 1)
    assert mock.detect(image, ["lamp"]) == []


def test_scripted_failure_is_retried():
    """A failing call is retried by the gateway and the next call succeeds."""
    request, _ = room_request()
    backends = mock_backends(MockScript.model_validate({"world": [STOOL], "calls": {0: {"fail": True}}}))
    with pytest.raises(ServiceError):
        backends.inpainter.inpaint(request)
    sleeps = []
    out = inpaint(request, backends.inpainter, GatewaySettings(attempts=2), sleep=sleeps.append)
    assert sleeps == []
    assert backends.inpainter.sprites_of(out.image)


def test_explicit_call_objects_and_annotation():
    """Per-call objects replace the world and may carry a fixed annotation."""
    request, _ = room_request()
    script = MockScript.model_validate({"calls": [{"objects": [STOOL], "annotation": "nothing to see"}]})
    mock = MockBackends(script)
    image = mock.inpaint(request).image
    assert [obj.name for obj, _ in mock.sprites_of(image)] == ["stool"]
    assert mock.annotate(image, "?") == "nothing to see"


def test_unknown_image_has_no_truth():
    """Depth of an image the mock never produced is a service error."""
    with pytest.raises(ServiceError):
        MockBackends().estimate_depth(np.zeros((4, 4, 3), dtype=np.uint8))


def test_seeded_depth_corruption_is_reproducible():
    """Scale and offset are drawn from the script seed when not given."""
    a, b = MockBackends(MockScript(seed=4)), MockBackends(MockScript(seed=4))
    assert (a.depth_scale, a.depth_offset) == (b.depth_scale, b.depth_offset)
    assert 0.3 <= a.depth_scale <= 2.0
    assert 0.0 <= a.depth_offset <= 3.0


def test_text_answers_follow_script():
    """Limits, face-to pairs and receptacles come from the script."""
    mock = MockBackends(
        MockScript(limits="reached limit: sofa\nlacking: lamp", face_to=[("sofa", "tv"), ("chair", "desk")])
    )
    assert mock.complete("?").startswith("reached limit: sofa")
    assert mock.face_to(["sofa", "tv", "chair"], "") == [("sofa", "tv")]
    assert mock.receptacles(["coffee table", "sofa", "bookshelf"]) == ["coffee table", "bookshelf"]
    assert MockBackends(MockScript(receptacles=["sofa"])).receptacles(["sofa", "table"]) == ["sofa"]
    assert MockBackends().complete("?") == "reached limit: none\nlacking: none"


def test_load_mock_script(tmp_path):
    """Scripts load from YAML; call lists become index maps."""
    path = tmp_path / "script.yaml"
    path.write_text(
        "seed: 3\n"
        "depth_scale: 1.5\n"
        "calls:\n"
        "  - fail: true\n"
        "  - objects:\n"
        "      - name: lamp\n"
        "        box: {min: [0, 0, 0], max: [0.3, 0.3, 1.5]}\n",
        encoding="utf-8",
    )
    script = load_mock_script(path)
    assert script.seed == 3
    assert script.calls[0].fail
    assert script.calls[1].objects[0].name == "lamp"
    with pytest.raises(ValidationError):
        MockScript(depth_scale=-1.0)
