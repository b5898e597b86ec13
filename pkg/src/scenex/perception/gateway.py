"""Contracts and client-side logic for the external perception services.

Four services stand behind the pipeline: an inpainter, a monocular depth
estimator, a vision-language annotator and an open-vocabulary detector.
Any object implementing the matching protocol can be plugged in; see
``scenex.perception.mock`` for the scripted offline backends and
``scenex.perception.remote`` for HTTP clients.
"""

import logging
import re
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Protocol, Sequence, Tuple, TypeVar

import numpy as np

from scenex.core.errors import (
    AnnotationError,
    PromptBuildError,
    ServiceError,
)
from scenex.core.geometry import CameraView, DepthMap
from scenex.core.render import footprint_of
from scenex.core.scene import ObjectCategory, SceneState
from scenex.perception.lift import ray_to_z_depth
from scenex.perception.views import InpaintMask, ViewKind

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF_S = 0.5
DEFAULT_TIMEOUT_S = 120.0
DEFAULT_MIN_COUNT_ROOM = 2
DEFAULT_MIN_COUNT_SMALL = 3
DEFAULT_MAX_ATTEMPTS = 4
DEFAULT_SAMPLES_PER_VIEW = 2

RECOGNITION_PROMPT = (
    "Detect all objects in the picture, generate a description for each object, "
    "and classify each one as a floor-object or a wall-object. Answer with one "
    "object per line in the form\n"
    "name: description | floor-object/wall-object\n"
    "For example:\n"
    "table: A big yellow table | floor-object"
)

RECEPTACLE_WORDS = (
    "table", "desk", "shelf", "shelves", "bookcase", "bookshelf", "cabinet",
    "dresser", "counter", "nightstand", "sideboard", "stand",
)
INSIDE_WORDS = ("shelf", "shelves", "bookcase", "bookshelf", "cabinet")
SEATING_WORDS = ("chair", "sofa", "couch", "stool", "bench", "armchair", "seat")
TABLE_WORDS = ("table", "desk")

_LINE_RE = re.compile(
    r"^\s*(?P<name>[^:|]+?)\s*:\s*(?P<desc>[^|]+?)\s*\|\s*(?P<cat>floor-object|wall-object|small-object)\s*$",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class GatewaySettings:
    attempts: int = DEFAULT_ATTEMPTS
    backoff_s: float = DEFAULT_BACKOFF_S
    timeout_s: float = DEFAULT_TIMEOUT_S
    min_count_room: int = DEFAULT_MIN_COUNT_ROOM
    min_count_small: int = DEFAULT_MIN_COUNT_SMALL
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    samples_per_view: int = DEFAULT_SAMPLES_PER_VIEW
    depth_is_ray_length: bool = False


@dataclass(frozen=True, eq=False)
class InpaintRequest:
    """
    Inpainting job. ``camera`` and ``depth`` describe the rendered frame; they
    are never sent over the wire but let simulated backends reason about
    geometry.
    """

    image: np.ndarray
    mask: InpaintMask
    prompt: str
    negative_prompt: str = ""
    seed: int = 0
    camera: Optional[CameraView] = None
    depth: Optional[DepthMap] = None

    def __post_init__(self):
        image = np.asarray(self.image)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {image.shape}")
        if image.shape[:2] != self.mask.weights.shape:
            raise ValueError(
                f"mask shape {self.mask.weights.shape} does not match image {image.shape[:2]}"
            )
        object.__setattr__(self, "image", image.astype(np.uint8))


@dataclass(frozen=True, eq=False)
class InpaintResponse:
    image: np.ndarray


@dataclass(frozen=True)
class ObjectAnnotation:
    name: str
    description: str
    category: ObjectCategory


@dataclass(frozen=True, eq=False)
class Detection:
    """One detected instance. ``box`` is (col0, row0, col1, row1), end exclusive."""

    name: str
    description: str
    category: ObjectCategory
    box: Tuple[int, int, int, int]
    mask: np.ndarray

    def __post_init__(self):
        category = ObjectCategory(self.category)
        if category not in (ObjectCategory.FLOOR, ObjectCategory.WALL):
            raise ValueError(f"detections are floor or wall objects, got {category.value}")
        object.__setattr__(self, "category", category)
        mask = np.asarray(self.mask, dtype=bool)
        c0, r0, c1, r1 = (int(v) for v in self.box)
        inside = np.zeros_like(mask)
        inside[r0:r1, c0:c1] = True
        if (mask & ~inside).any():
            raise ValueError(f"mask of {self.name} extends outside its box {self.box}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "box", (c0, r0, c1, r1))


@dataclass(frozen=True)
class PromptPair:
    positive: str
    negative: str = ""
    lacking: Tuple[str, ...] = ()
    reached: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.positive.strip():
            raise PromptBuildError("positive prompt must not be empty")
        overlap = set(self.lacking) & set(self.reached)
        if overlap:
            raise PromptBuildError(f"objects both lacking and at limit: {sorted(overlap)}")


class InpaintBackend(Protocol):
    def inpaint(self, request: InpaintRequest) -> InpaintResponse: ...


class DepthBackend(Protocol):
    def estimate_depth(self, image: np.ndarray) -> np.ndarray: ...


class AnnotatorBackend(Protocol):
    def annotate(self, image: np.ndarray, prompt: str) -> str: ...

    def complete(self, prompt: str) -> str: ...

    def face_to(self, names: Sequence[str], scene_summary: str) -> List[Tuple[str, str]]: ...

    def receptacles(self, names: Sequence[str]) -> List[str]: ...


class DetectorBackend(Protocol):
    def detect(self, image: np.ndarray, tags: Sequence[str]) -> List[Detection]: ...


@dataclass
class Backends:
    """The four services a pipeline run talks to."""

    inpainter: InpaintBackend
    depth: DepthBackend
    annotator: AnnotatorBackend
    detector: DetectorBackend
    settings: GatewaySettings = field(default_factory=GatewaySettings)


def call_with_retry(
    fn: Callable[[], T],
    attempts: int = DEFAULT_ATTEMPTS,
    backoff_s: float = DEFAULT_BACKOFF_S,
    what: str = "service call",
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """
    Run ``fn`` up to ``attempts`` times with exponential backoff.

    Raises:
        ServiceError: every attempt failed.
    """
    last: Optional[Exception] = None
    for attempt in range(attempts):
        try:
            return fn()
        except (ServiceError, ConnectionError, TimeoutError, OSError) as exc:
            last = exc
            logger.warning("%s failed (attempt %d/%d): %s", what, attempt + 1, attempts, exc)
            if attempt + 1 < attempts:
                sleep(backoff_s * (2 ** attempt))
    raise ServiceError(f"{what} failed after {attempts} attempts: {last}") from last


def inpaint(
    req: InpaintRequest,
    backend: InpaintBackend,
    settings: GatewaySettings = GatewaySettings(),
    sleep: Callable[[float], None] = time.sleep,
) -> InpaintResponse:
    """
    Inpaint ``req.image`` inside ``req.mask``.

    Pixels with zero mask weight are copied from the request, so they are
    preserved whatever the backend returns. An all-zero mask skips the call.
    """
    zero = req.mask.weights <= 0.0
    if zero.all():
        return InpaintResponse(req.image.copy())
    resp = call_with_retry(
        lambda: backend.inpaint(req), settings.attempts, settings.backoff_s, "inpaint", sleep
    )
    out = np.asarray(resp.image)
    if out.shape != req.image.shape:
        raise ServiceError(f"inpaint returned shape {out.shape}, expected {req.image.shape}")
    out = np.where(zero[..., None], req.image, out).astype(np.uint8)
    return InpaintResponse(out)


def estimate_depth(
    image: np.ndarray,
    backend: DepthBackend,
    settings: GatewaySettings = GatewaySettings(),
    cam: Optional[CameraView] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> DepthMap:
    """Relative depth of ``image`` as z-depth (converted from ray length if configured)."""
    raw = call_with_retry(
        lambda: backend.estimate_depth(image), settings.attempts, settings.backoff_s, "depth", sleep
    )
    raw = np.asarray(raw, dtype=float)
    if raw.shape != image.shape[:2]:
        raise ServiceError(f"depth returned shape {raw.shape}, expected {image.shape[:2]}")
    depth = DepthMap(raw)
    if settings.depth_is_ray_length:
        if cam is None:
            raise ValueError("ray-length depth needs the camera for conversion")
        depth = ray_to_z_depth(depth, cam)
    valid_values = depth.values[depth.valid]
    if valid_values.size and valid_values.max() == valid_values.min():
        logger.warning("depth estimate is constant; rescaling will fall back to a mean shift")
    return depth


def parse_annotation_lines(text: str) -> List[ObjectAnnotation]:
    """Parse ``name: description | category`` lines, dropping malformed ones."""
    out = []
    for raw in text.splitlines():
        line = raw.strip().lstrip("-*").strip()
        if not line:
            continue
        match = _LINE_RE.match(line)
        if match is None:
            logger.warning("dropping malformed annotation line: %r", raw)
            continue
        out.append(
            ObjectAnnotation(
                name=match.group("name").strip().lower(),
                description=match.group("desc").strip(),
                category=ObjectCategory(match.group("cat").lower()),
            )
        )
    return out


def annotate_objects(
    image: np.ndarray,
    backend: AnnotatorBackend,
    settings: GatewaySettings = GatewaySettings(),
    sleep: Callable[[float], None] = time.sleep,
) -> List[ObjectAnnotation]:
    """
    Ask the annotator which objects an image shows.

    Raises:
        AnnotationError: no line of the reply could be parsed.
    """
    text = call_with_retry(
        lambda: backend.annotate(image, RECOGNITION_PROMPT),
        settings.attempts,
        settings.backoff_s,
        "annotate",
        sleep,
    )
    parsed = parse_annotation_lines(text)
    if not parsed:
        raise AnnotationError("annotator reply contained no parseable object line")
    return parsed


def detect_segment(
    image: np.ndarray,
    tags: Sequence[str],
    backend: DetectorBackend,
    settings: GatewaySettings = GatewaySettings(),
    sleep: Callable[[float], None] = time.sleep,
) -> List[Detection]:
    """
    Boxes and masks for every instance of the given tags.

    Masks are made disjoint in output order: a pixel claimed by an earlier
    detection is removed from later ones.
    """
    tags = [t for t in tags if t and t.strip()]
    if not tags:
        raise ValueError("detect_segment needs at least one tag")
    wanted = {t.strip().lower() for t in tags}
    raw = call_with_retry(
        lambda: backend.detect(image, list(tags)), settings.attempts, settings.backoff_s, "detect", sleep
    )
    claimed = np.zeros(image.shape[:2], dtype=bool)
    out = []
    for det in raw:
        if det.name.strip().lower() not in wanted:
            continue
        mask = det.mask & ~claimed
        if not mask.any():
            continue
        claimed |= mask
        out.append(Detection(det.name, det.description, det.category, det.box, mask))
    return out


def inventory_prompt(inventory: Sequence[Tuple[str, int]]) -> str:
    """Prompt asking which objects are at their limit and which are missing."""
    if inventory:
        listing = ", ".join(f"{count} {name}" for name, count in inventory)
    else:
        listing = "nothing yet"
    return (
        f"The room currently contains: {listing}.\n"
        "List which objects have already reached their potential limits, and "
        "the objects that are still lacking. Answer in exactly two lines:\n"
        "reached limit: object A, object B\n"
        "lacking: object C, object D"
    )


def _split_names(text: str) -> List[str]:
    names = [n.strip().lower() for n in text.split(",")]
    return [n for n in names if n and n not in ("none", "-")]


def parse_limits_response(text: str) -> Tuple[List[str], List[str]]:
    """
    Parse the two-line ``reached limit:`` / ``lacking:`` reply.

    Raises:
        PromptBuildError: either line is missing.
    """
    reached, lacking = None, None
    for line in text.splitlines():
        key, sep, rest = line.partition(":")
        if not sep:
            continue
        key = key.strip().lower()
        if key == "reached limit":
            reached = _split_names(rest)
        elif key == "lacking":
            lacking = _split_names(rest)
    if reached is None or lacking is None:
        raise PromptBuildError(f"cannot parse limits reply: {text!r}")
    return reached, lacking


def build_prompts(
    inventory: Sequence[Tuple[str, int]],
    room_caption: str,
    backend: Optional[AnnotatorBackend] = None,
    fallback: bool = False,
    settings: GatewaySettings = GatewaySettings(),
    sleep: Callable[[float], None] = time.sleep,
) -> PromptPair:
    """
    Positive and negative inpainting prompts from the current inventory.

    Positive is the caption followed by the lacking objects; negative lists
    the objects that reached their limit.

    Raises:
        PromptBuildError: unparseable reply (unless ``fallback``), or an
            object reported both lacking and at its limit.
    """
    caption = room_caption.strip()
    if backend is None:
        return PromptPair(caption)
    try:
        text = call_with_retry(
            lambda: backend.complete(inventory_prompt(inventory)),
            settings.attempts,
            settings.backoff_s,
            "limits",
            sleep,
        )
        reached, lacking = parse_limits_response(text)
    except (PromptBuildError, ServiceError) as exc:
        if not fallback:
            raise PromptBuildError(str(exc)) from exc
        logger.warning("prompt builder falling back to caption only: %s", exc)
        return PromptPair(caption)
    positive = ", ".join([caption] + lacking) if caption else ", ".join(lacking)
    return PromptPair(
        positive=positive,
        negative=", ".join(reached),
        lacking=tuple(lacking),
        reached=tuple(reached),
    )


def accept_image(detections: Sequence[Detection], min_count: int) -> bool:
    """True iff at least ``min_count`` objects were recognized."""
    if min_count < 0:
        raise ValueError(f"min_count must be non-negative, got {min_count}")
    return len(detections) >= min_count


def receptacle_kind(name: str) -> ViewKind:
    lowered = name.lower()
    return ViewKind.INSIDE if any(w in lowered for w in INSIDE_WORDS) else ViewKind.ON_TOP


def find_receptacles(
    scene: SceneState,
    annotator: Optional[AnnotatorBackend] = None,
) -> List[str]:
    """
    Ids of floor objects that can hold small objects, largest footprint first.

    The annotator picks receptacles by name; without one (or when it fails)
    tables, desks, shelves and cabinets qualify by name.
    """
    floor = scene.by_category(ObjectCategory.FLOOR)
    names = sorted({inst.name for inst in floor})
    chosen = None
    if annotator is not None and names:
        try:
            chosen = {n.strip().lower() for n in annotator.receptacles(names)}
        except (ServiceError, ConnectionError, TimeoutError, OSError) as exc:
            logger.warning("receptacle query failed, using name heuristic: %s", exc)
    if chosen is None:
        chosen = {n for n in names if any(w in n.lower() for w in RECEPTACLE_WORDS)}
    picked = [inst for inst in floor if inst.name.lower() in chosen]
    picked.sort(key=lambda i: (-footprint_of(i).area, i.id))
    return [inst.id for inst in picked]
