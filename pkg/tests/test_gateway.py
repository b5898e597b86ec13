"""Tests for the perception service contracts and prompt handling."""

import numpy as np
import pytest

import scenex as sx
from scenex.core.errors import AnnotationError, PromptBuildError, ServiceError
from scenex.core.scene import ObjectCategory, ObjectSpec, make_instance
from scenex.perception.gateway import (
    RECOGNITION_PROMPT,
    Detection,
    GatewaySettings,
    InpaintRequest,
    InpaintResponse,
    PromptPair,
    accept_image,
    annotate_objects,
    build_prompts,
    call_with_retry,
    detect_segment,
    estimate_depth,
    find_receptacles,
    inpaint,
    inventory_prompt,
    parse_annotation_lines,
    parse_limits_response,
    receptacle_kind,
)
from scenex.perception.views import InpaintMask, MaskProvenance, ViewKind


class FlakyInpainter:
    """Fails a number of times, then paints everything white."""

    def __init__(self, failures=0):
        self.failures = failures
        self.calls = 0

    def inpaint(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise ServiceError("busy")
        return InpaintResponse(np.full_like(request.image, 255))


class ScriptedAnnotator:
    def __init__(self, annotate_reply="", complete_reply="", receptacles=None, fail=False):
        self.annotate_reply = annotate_reply
        self.complete_reply = complete_reply
        self.receptacle_names = receptacles or []
        self.fail = fail
        self.prompts = []

    def annotate(self, image, prompt):
        self.prompts.append(prompt)
        return self.annotate_reply

    def complete(self, prompt):
        self.prompts.append(prompt)
        if self.fail:
            raise ServiceError("offline")
        return self.complete_reply

    def face_to(self, names, scene_summary):
        return []

    def receptacles(self, names):
        if self.fail:
            raise ServiceError("offline")
        return self.receptacle_names


class FixedDetector:
    def __init__(self, detections):
        self.detections = detections

    def detect(self, image, tags):
        return self.detections


class ConstantDepth:
    def __init__(self, shape, value=2.0):
        self.shape = shape
        self.value = value

    def estimate_depth(self, image):
        return np.full(self.shape, self.value)


def no_sleep(seconds):
    pass


def box_detection(name, box, shape=(8, 8), category=ObjectCategory.FLOOR):
    mask = np.zeros(shape, dtype=bool)
    c0, r0, c1, r1 = box
    mask[r0:r1, c0:c1] = True
    return Detection(name, f"a {name}", category, box, mask)


def test_retry_backs_off_exponentially():
    """Two failures cost two sleeps of growing length."""
    sleeps = []
    backend = FlakyInpainter(failures=2)
    result = call_with_retry(lambda: backend.inpaint(request()), attempts=3, backoff_s=0.5, sleep=sleeps.append)
    assert result.image.max() == 255
    assert sleeps == [0.5, 1.0]


def test_retry_gives_up_with_service_error():
    """Exhausted retries raise ServiceError."""
    sleeps = []
    backend = FlakyInpainter(failures=10)
    with pytest.raises(ServiceError):
        call_with_retry(lambda: backend.inpaint(request()), attempts=3, backoff_s=0.1, sleep=sleeps.append)
    assert backend.calls == 3
    assert len(sleeps) == 2


def request(mask_weights=None):
    weights = np.zeros((8, 8)) if mask_weights is None else mask_weights
    image = np.full((8, 8, 3), 40, dtype=np.uint8)
    return InpaintRequest(image, InpaintMask(weights, MaskProvenance.ROOM_CENTERED), "a room")


def test_inpaint_preserves_unmasked_pixels():
    """Only pixels with positive mask weight may change."""
    weights = np.zeros((8, 8))
    weights[2:6, 2:6] = 0.5
    out = inpaint(request(weights), FlakyInpainter(), sleep=no_sleep)
    assert (out.image[2:6, 2:6] == 255).all()
    assert (out.image[0] == 40).all()
    assert out.image.dtype == np.uint8


def test_inpaint_skips_backend_for_empty_mask():
    """An all-zero mask returns the input without calling the service."""
    backend = FlakyInpainter()
    out = inpaint(request(), backend, sleep=no_sleep)
    assert backend.calls == 0
    assert (out.image == 40).all()


def test_inpaint_request_checks_shapes():
    """Image and mask must agree in size."""
    with pytest.raises(ValueError):
        InpaintRequest(np.zeros((8, 8, 3)), InpaintMask(np.zeros((4, 4)), MaskProvenance.ROOM_CENTERED), "x")


def test_estimate_depth_converts_ray_length():
    """Ray-length estimates become z-depth when configured."""
    cam = sx.camera_from_lookat((0, 0, 1), (1, 0, 1), width=8, height=6)
    image = np.zeros((6, 8, 3), dtype=np.uint8)
    z = estimate_depth(image, ConstantDepth((6, 8)), GatewaySettings(depth_is_ray_length=True), cam, no_sleep)
    assert z.values[0, 0] < 2.0
    plain = estimate_depth(image, ConstantDepth((6, 8)), sleep=no_sleep)
    assert (plain.values == 2.0).all()
    with pytest.raises(ServiceError):
        estimate_depth(image, ConstantDepth((3, 3)), sleep=no_sleep)


def test_parse_annotation_lines():
    """Well-formed lines parse; malformed ones are dropped."""
    text = "\n".join(
        [
            "Table: A big yellow table | floor-object",
            "- painting: an abstract canvas | Wall-Object",
            "this line has no category",
            "",
            "lamp: brass floor lamp | ceiling-object",
        ]
    )
    parsed = parse_annotation_lines(text)
    assert [(a.name, a.category) for a in parsed] == [
        ("table", ObjectCategory.FLOOR),
        ("painting", ObjectCategory.WALL),
    ]
    assert parsed[0].description == "A big yellow table"


def test_annotate_objects_requires_a_parseable_line():
    """A reply with no object line is an annotation error."""
    annotator = ScriptedAnnotator(annotate_reply="I see a room.")
    with pytest.raises(AnnotationError):
        annotate_objects(np.zeros((4, 4, 3)), annotator, sleep=no_sleep)
    assert annotator.prompts == [RECOGNITION_PROMPT]


def test_detect_segment_makes_masks_disjoint():
    """Later detections lose pixels already claimed; unrequested tags are dropped."""
    detector = FixedDetector(
        [
            box_detection("sofa", (0, 0, 4, 4)),
            box_detection("table", (2, 2, 6, 6)),
            box_detection("plant", (6, 6, 8, 8)),
            box_detection("chair", (0, 0, 2, 2)),
        ]
    )
    out = detect_segment(np.zeros((8, 8, 3)), ["sofa", "Table", "chair"], detector, sleep=no_sleep)
    assert [d.name for d in out] == ["sofa", "table"]
    assert out[1].mask.sum() == 16 - 4
    assert not (out[0].mask & out[1].mask).any()
    with pytest.raises(ValueError):
        detect_segment(np.zeros((8, 8, 3)), ["", " "], detector, sleep=no_sleep)


def test_detection_validation():
    """Detections are floor or wall objects with masks inside their box."""
    with pytest.raises(ValueError):
        box_detection("cup", (0, 0, 2, 2), category=ObjectCategory.SMALL)
    mask = np.zeros((8, 8), dtype=bool)
    mask[5, 5] = True
    with pytest.raises(ValueError):
        Detection("sofa", "", ObjectCategory.FLOOR, (0, 0, 4, 4), mask)


def test_inventory_prompt_and_limits_reply():
    """The limits exchange lists the inventory and parses two lines back."""
    prompt = inventory_prompt([("chair", 2), ("sofa", 1)])
    assert "2 chair, 1 sofa" in prompt
    assert "nothing yet" in inventory_prompt([])

    reached, lacking = parse_limits_response("Reached limit: Sofa, none\nlacking: lamp, rug")
    assert reached == ["sofa"]
    assert lacking == ["lamp", "rug"]
    with pytest.raises(PromptBuildError):
        parse_limits_response("lacking: lamp")


def test_build_prompts():
    """Positive prompt is caption plus lacking objects; negative lists the full ones."""
    annotator = ScriptedAnnotator(complete_reply="reached limit: sofa\nlacking: lamp, plant")
    pair = build_prompts([("sofa", 1)], "a cozy living room", annotator, sleep=no_sleep)
    assert pair.positive == "a cozy living room, lamp, plant"
    assert pair.negative == "sofa"
    assert pair.lacking == ("lamp", "plant")

    assert build_prompts([], "a bedroom").positive == "a bedroom"


def test_build_prompts_fallback_and_conflicts():
    """Failures fall back to the caption only when allowed; conflicting lists raise."""
    offline = ScriptedAnnotator(fail=True)
    with pytest.raises(PromptBuildError):
        build_prompts([], "a bedroom", offline, settings=GatewaySettings(attempts=1), sleep=no_sleep)
    pair = build_prompts([], "a bedroom", offline, fallback=True, settings=GatewaySettings(attempts=1), sleep=no_sleep)
    assert pair == PromptPair("a bedroom")

    both = ScriptedAnnotator(complete_reply="reached limit: lamp\nlacking: lamp")
    with pytest.raises(PromptBuildError):
        build_prompts([], "a bedroom", both, sleep=no_sleep)


def test_accept_image_threshold():
    """Frames need at least min_count recognized objects."""
    dets = [box_detection("sofa", (0, 0, 2, 2)), box_detection("table", (4, 4, 6, 6))]
    assert accept_image(dets, 2)
    assert not accept_image(dets, 3)
    assert accept_image([], 0)
    with pytest.raises(ValueError):
        accept_image(dets, -1)


def receptacle_scene():
    room = sx.Room(extent=(5.0, 5.0))
    items = [
        ("side_table", (0.5, 0.5, 0.6), (1.0, 1.0)),
        ("dining table", (1.6, 0.9, 0.75), (3.0, 3.0)),
        ("bookshelf", (1.0, 0.35, 1.8), (4.0, 0.5)),
        ("sofa", (2.0, 0.9, 0.85), (2.5, 4.3)),
    ]
    instances = [
        make_instance(f"obj_{k:03d}", ObjectSpec(name), "box", dims, (x, y, 0.0))
        for k, (name, dims, (x, y)) in enumerate(items)
    ]
    return sx.SceneState(room=room, instances=tuple(instances))


def test_find_receptacles_by_name_largest_first():
    """Without an annotator, tables and shelves qualify, biggest footprint first."""
    assert find_receptacles(receptacle_scene()) == ["obj_001", "obj_002", "obj_000"]


def test_find_receptacles_asks_annotator():
    """The annotator's choice wins; a failing annotator falls back to names."""
    scene = receptacle_scene()
    assert find_receptacles(scene, ScriptedAnnotator(receptacles=["Sofa"])) == ["obj_003"]
    assert find_receptacles(scene, ScriptedAnnotator(fail=True)) == ["obj_001", "obj_002", "obj_000"]


def test_receptacle_kind():
    """Shelves and cabinets are filled from the front; everything else from above."""
    assert receptacle_kind("Bookshelf") is ViewKind.INSIDE
    assert receptacle_kind("kitchen cabinet") is ViewKind.INSIDE
    assert receptacle_kind("coffee table") is ViewKind.ON_TOP
