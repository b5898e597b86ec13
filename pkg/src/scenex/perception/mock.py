"""Scripted offline backends for closed-loop runs and tests.

A mock script describes ground-truth boxes. The inpainter ray-casts them into
the masked part of the frame as flat-colored sprites and remembers, per
output image, the true depth and the sprite masks. The depth, annotator and
detector backends answer from that memory, so a full pipeline run can be
checked against known geometry.

Two ways to script objects:

- ``world``: objects waiting to be revealed. A world object is stamped when
  its visible pixels lie inside the mask (``coverage``); small objects only
  appear in cube-fill masks, furniture only in room masks.
- ``calls``: explicit per-call objects keyed by inpaint call index; these
  override ``world`` for that call and are clipped to the mask.
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field, field_validator

from scenex.core.errors import ServiceError
from scenex.core.geometry import Aabb3, camera_rays
from scenex.core.render import _box_depth
from scenex.core.scene import ObjectCategory
from scenex.layout.assets import name_color
from scenex.perception.gateway import (
    RECEPTACLE_WORDS,
    Backends,
    Detection,
    GatewaySettings,
    InpaintRequest,
    InpaintResponse,
)
from scenex.perception.views import MaskProvenance

logger = logging.getLogger(__name__)

DEFAULT_COVERAGE = 0.98
DEFAULT_MIN_SPRITE_PIXELS = 20


class ScriptBox(BaseModel):
    min: Tuple[float, float, float]
    max: Tuple[float, float, float]

    def to_aabb(self) -> Aabb3:
        return Aabb3(self.min, self.max)


class ScriptObject(BaseModel):
    name: str
    description: str = ""
    category: Literal["floor-object", "wall-object", "small-object"] = "floor-object"
    box: ScriptBox
    color: Optional[Tuple[int, int, int]] = None

    def rgb(self) -> np.ndarray:
        if self.color is not None:
            return np.array(self.color, dtype=np.uint8)
        return name_color(self.name)


class ScriptCall(BaseModel):
    objects: List[ScriptObject] = Field(default_factory=list)
    fail: bool = False
    annotation: Optional[str] = None


class MockScript(BaseModel):
    seed: int = 0
    depth_scale: Optional[float] = None
    depth_offset: Optional[float] = None
    coverage: float = DEFAULT_COVERAGE
    min_sprite_pixels: int = DEFAULT_MIN_SPRITE_PIXELS
    world: List[ScriptObject] = Field(default_factory=list)
    calls: Dict[int, ScriptCall] = Field(default_factory=dict)
    limits: Optional[str] = None
    face_to: List[Tuple[str, str]] = Field(default_factory=list)
    receptacles: Optional[List[str]] = None

    @field_validator("calls", mode="before")
    @classmethod
    def _calls_from_list(cls, value):
        if isinstance(value, list):
            return {k: v for k, v in enumerate(value)}
        return value

    @field_validator("depth_scale")
    @classmethod
    def _positive_scale(cls, value):
        if value is not None and value <= 0:
            raise ValueError("depth_scale must be positive")
        return value


def load_mock_script(path: Union[str, Path]) -> MockScript:
    """Read a mock script from YAML or JSON."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return MockScript.model_validate(data)


@dataclass
class _Sprite:
    obj: ScriptObject
    mask: np.ndarray


@dataclass
class _FrameTruth:
    depth: np.ndarray
    valid: np.ndarray
    sprites: List[_Sprite]
    annotation: Optional[str] = None


def _digest(image: np.ndarray) -> str:
    arr = np.ascontiguousarray(image, dtype=np.uint8)
    h = hashlib.sha1(arr.tobytes())
    h.update(str(arr.shape).encode("ascii"))
    return h.hexdigest()


def _detection_category(category: str) -> ObjectCategory:
    return ObjectCategory.WALL if category == "wall-object" else ObjectCategory.FLOOR


class MockBackends:
    """Inpainter, depth estimator, annotator and detector driven by a script."""

    def __init__(self, script: Optional[MockScript] = None):
        self.script = script or MockScript()
        rng = np.random.default_rng(self.script.seed)
        drawn_scale, drawn_offset = rng.uniform(0.3, 2.0), rng.uniform(0.0, 3.0)
        self.depth_scale = (
            self.script.depth_scale if self.script.depth_scale is not None else float(drawn_scale)
        )
        self.depth_offset = (
            self.script.depth_offset if self.script.depth_offset is not None else float(drawn_offset)
        )
        self.calls = 0
        self._frames: Dict[str, _FrameTruth] = {}

    # -- inpainting ---------------------------------------------------------

    def inpaint(self, request: InpaintRequest) -> InpaintResponse:
        index = self.calls
        self.calls += 1
        call = self.script.calls.get(index)
        if call is not None and call.fail:
            raise ServiceError(f"scripted failure on inpaint call {index}")
        if call is not None:
            objects, reveal = call.objects, False
        else:
            wanted = (
                {"small-object"}
                if request.mask.provenance is MaskProvenance.CUBE_FILL
                else {"floor-object", "wall-object"}
            )
            objects, reveal = [o for o in self.script.world if o.category in wanted], True
        image, truth = self._stamp(request, objects, reveal)
        if call is not None:
            truth.annotation = call.annotation
        self._frames[_digest(image)] = truth
        return InpaintResponse(image)

    def _stamp(self, request: InpaintRequest, objects: Sequence[ScriptObject], reveal: bool):
        image = request.image.copy()
        h, w = image.shape[:2]
        if request.camera is None or request.depth is None:
            valid = np.zeros((h, w), dtype=bool)
            return image, _FrameTruth(np.zeros((h, w)), valid, [])

        cam = request.camera
        base = np.where(request.depth.valid, request.depth.values, np.inf)
        allowed = request.mask.weights > 0.5
        dirs = camera_rays(cam).reshape(-1, 3)
        eye = np.asarray(cam.eye, dtype=float)

        current = base.copy()
        owner = np.full((h, w), -1, dtype=np.int64)
        stamped: List[ScriptObject] = []
        for obj in objects:
            t = _box_depth(eye, dirs, obj.box.to_aabb()).reshape(h, w)
            visible = t < base - 1e-6
            n_visible = int(visible.sum())
            if n_visible == 0:
                continue
            if reveal:
                inside = float(allowed[visible].mean())
                if n_visible < self.script.min_sprite_pixels or inside < self.script.coverage:
                    continue
            draw = visible & allowed & (t < current)
            if not draw.any():
                continue
            current = np.where(draw, t, current)
            owner = np.where(draw, len(stamped), owner)
            stamped.append(obj)

        sprites = []
        for k, obj in enumerate(stamped):
            mask = owner == k
            if mask.any():
                image[mask] = obj.rgb()
                sprites.append(_Sprite(obj, mask))
        valid = np.isfinite(current)
        return image, _FrameTruth(np.where(valid, current, 0.0), valid, sprites)

    def _truth(self, image: np.ndarray) -> _FrameTruth:
        truth = self._frames.get(_digest(image))
        if truth is None:
            raise ServiceError("mock backend has no ground truth for this image")
        return truth

    def sprites_of(self, image: np.ndarray) -> List[Tuple[ScriptObject, np.ndarray]]:
        """Ground-truth sprites of an image this mock produced."""
        return [(s.obj, s.mask) for s in self._truth(image).sprites]

    # -- depth --------------------------------------------------------------

    def estimate_depth(self, image: np.ndarray) -> np.ndarray:
        truth = self._truth(image)
        return np.where(truth.valid, self.depth_scale * truth.depth + self.depth_offset, 0.0)

    # -- annotator ----------------------------------------------------------

    def annotate(self, image: np.ndarray, prompt: str) -> str:
        truth = self._truth(image)
        if truth.annotation is not None:
            return truth.annotation
        lines = []
        for sprite in truth.sprites:
            category = _detection_category(sprite.obj.category).value
            description = sprite.obj.description or f"a {sprite.obj.name}"
            lines.append(f"{sprite.obj.name}: {description} | {category}")
        return "\n".join(lines)

    def complete(self, prompt: str) -> str:
        if self.script.limits is not None:
            return self.script.limits
        return "reached limit: none\nlacking: none"

    def face_to(self, names: Sequence[str], scene_summary: str) -> List[Tuple[str, str]]:
        present = set(names)
        return [(s, t) for s, t in self.script.face_to if s in present and t in present]

    def receptacles(self, names: Sequence[str]) -> List[str]:
        if self.script.receptacles is not None:
            return [n for n in names if n in set(self.script.receptacles)]
        return [n for n in names if any(w in n.lower() for w in RECEPTACLE_WORDS)]

    # -- detector -----------------------------------------------------------

    def detect(self, image: np.ndarray, tags: Sequence[str]) -> List[Detection]:
        wanted = {t.strip().lower() for t in tags}
        out = []
        for sprite in self._truth(image).sprites:
            if sprite.obj.name.lower() not in wanted:
                continue
            rows, cols = np.nonzero(sprite.mask)
            box = (int(cols.min()), int(rows.min()), int(cols.max()) + 1, int(rows.max()) + 1)
            out.append(
                Detection(
                    name=sprite.obj.name,
                    description=sprite.obj.description,
                    category=_detection_category(sprite.obj.category),
                    box=box,
                    mask=sprite.mask.copy(),
                )
            )
        return out


def mock_backends(
    script: Optional[MockScript] = None,
    settings: GatewaySettings = GatewaySettings(),
) -> Backends:
    """A Backends bundle whose four services share one MockBackends."""
    mock = MockBackends(script)
    return Backends(inpainter=mock, depth=mock, annotator=mock, detector=mock, settings=settings)
