"""Camera selection, inpaint masks and mask softening."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from scenex.core.errors import DegenerateViewError, EmptyMaskError
from scenex.core.geometry import (
    DEFAULT_FOV_DEG,
    DEFAULT_RESOLUTION,
    Aabb3,
    CameraView,
    DepthMap,
    camera_from_lookat,
    camera_rays,
    project_points,
)
from scenex.core.render import InstanceIdMap, _box_depth, occupancy
from scenex.core.scene import ObjectInstance, Room, SceneState, front_vector

logger = logging.getLogger(__name__)

DEFAULT_EYE_HEIGHT = 1.8
DEFAULT_LOOK_HEIGHT = 0.5
DEFAULT_OCCUPANCY_THRESHOLD = 0.7
DEFAULT_MAX_VIEWS = 3
DEFAULT_VIEW_MARGIN = 1.2
DEFAULT_ON_TOP_PITCH_DEG = 30.0

# softening at 512x512, scaled with resolution
DEFAULT_EROSION_RADIUS_PX = 4
DEFAULT_BLUR_SIGMA_PX = 8.0
BLUR_TRUNCATE = 3.0


class ViewKind(str, Enum):
    ON_TOP = "on-top"
    INSIDE = "inside"


class MaskProvenance(str, Enum):
    ROOM_CENTERED = "room-centered"
    CUBE_FILL = "cube-fill"


@dataclass(frozen=True)
class MaskSettings:
    """Tunables for mask construction and softening."""

    center_width_frac: float = 0.7
    center_height_frac: float = 0.6
    cube_shrink: float = 0.9
    cube_top_height: float = 0.35
    erosion_radius_px: Optional[int] = None
    blur_sigma_px: Optional[float] = None

    def softening(self, width: int, height: int) -> Tuple[int, float]:
        radius, sigma = scaled_softening(width, height)
        if self.erosion_radius_px is not None:
            radius = self.erosion_radius_px
        if self.blur_sigma_px is not None:
            sigma = self.blur_sigma_px
        return radius, sigma


@dataclass(frozen=True, eq=False)
class InpaintMask:
    """Per-pixel inpaint weight (1 = inpaint, 0 = keep)."""

    weights: np.ndarray
    provenance: MaskProvenance
    excluded_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {w.shape}")
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise ValueError("mask weights must lie in [0, 1]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "provenance", MaskProvenance(self.provenance))
        object.__setattr__(self, "excluded_ids", tuple(self.excluded_ids))

    @property
    def height(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    def binary(self, level: float = 0.5) -> np.ndarray:
        return self.weights >= level


@dataclass(frozen=True)
class ViewPlan:
    cameras: Tuple[CameraView, ...]
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD
    max_views: int = DEFAULT_MAX_VIEWS

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if not 1 <= len(self.cameras):
            raise ValueError("a view plan needs at least one camera")


def room_views(
    room: Room,
    eye_height: float = DEFAULT_EYE_HEIGHT,
    look_height: float = DEFAULT_LOOK_HEIGHT,
    fov_deg: float = DEFAULT_FOV_DEG,
    width: int = DEFAULT_RESOLUTION,
    height: int = DEFAULT_RESOLUTION,
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD,
    max_views: int = DEFAULT_MAX_VIEWS,
) -> ViewPlan:
    """
    The three room views: back-right corner, front-middle, back-left corner.

    Examples:
        >>> plan = room_views(Room(extent=(4.0, 4.0)))
        >>> plan.cameras[0].eye, plan.cameras[0].target
        ((4.0, 4.0, 1.8), (0.0, 0.0, 0.5))
    """
    x0, y0, x1, y1 = room.bounds
    xm = (x0 + x1) / 2.0
    poses = [
        ((x1, y1, eye_height), (x0, y0, look_height)),
        ((xm, y0, eye_height), (xm, y1, look_height)),
        ((x0, y1, eye_height), (x1, y0, look_height)),
    ]
    cameras = tuple(
        camera_from_lookat(eye, target, fov_deg=fov_deg, width=width, height=height)
        for eye, target in poses
    )
    return ViewPlan(cameras[:max_views], occupancy_threshold, max_views)


def should_continue(
    scene: SceneState,
    views_used: int,
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD,
    max_views: int = DEFAULT_MAX_VIEWS,
    occupancy_value: Optional[float] = None,
) -> bool:
    """True while floor occupancy is at most the threshold and views remain."""
    occ = occupancy(scene) if occupancy_value is None else occupancy_value
    return occ <= occupancy_threshold and views_used < max_views


def _frames_box(cam: CameraView, box: Aabb3) -> bool:
    u, v, d = project_points(box.corners(), cam)
    if not np.all(np.isfinite(d)):
        return False
    return bool(np.all((u >= 0) & (u <= cam.width) & (v >= 0) & (v <= cam.height)))


def object_view(
    instance: ObjectInstance,
    kind: ViewKind,
    fov_deg: float = DEFAULT_FOV_DEG,
    width: int = DEFAULT_RESOLUTION,
    height: int = DEFAULT_RESOLUTION,
    pitch_deg: float = DEFAULT_ON_TOP_PITCH_DEG,
    margin: float = DEFAULT_VIEW_MARGIN,
) -> CameraView:
    """
    Camera framing one piece of furniture.

    ``on-top`` looks down at the top face, tilted ``pitch_deg`` so the camera
    sits on the object's front side. ``inside`` looks horizontally into the
    front at the bbox center. The base eye distance is
    ``(max lateral extent / 2) / tan(fov / 2) * margin``; it grows by 10% steps
    until all eight bbox corners project into the frame.

    Raises:
        DegenerateViewError: the bbox has a zero extent.
    """
    kind = ViewKind(kind)
    box = instance.world_bbox
    dims = box.dims
    if min(dims) <= 0.0:
        raise DegenerateViewError(f"cannot frame zero-extent bbox {dims} of {instance.id}")

    cx, cy, cz = box.center
    front = front_vector(instance.yaw)
    half_fov = math.radians(fov_deg) / 2.0
    # narrower of the two fields of view bounds what fits
    vfov_half = math.atan((height / 2.0) / ((width / 2.0) / math.tan(half_fov)))
    tan_half = math.tan(min(half_fov, vfov_half))

    if kind is ViewKind.ON_TOP:
        lateral = max(dims[0], dims[1])
        pitch = math.radians(pitch_deg)
        forward = np.array(
            [-math.sin(pitch) * front[0], -math.sin(pitch) * front[1], -math.cos(pitch)]
        )
        anchor = np.array([cx, cy, box.max[2]])
    else:
        across = abs(front[1]) * dims[0] + abs(front[0]) * dims[1]
        along = abs(front[0]) * dims[0] + abs(front[1]) * dims[1]
        lateral = max(across, dims[2])
        forward = np.array([-front[0], -front[1], 0.0])
        anchor = np.array([cx + front[0] * along / 2.0, cy + front[1] * along / 2.0, cz])

    distance = (lateral / 2.0) / tan_half * margin
    for _ in range(64):
        eye = anchor - distance * forward
        cam = camera_from_lookat(
            tuple(eye), tuple(anchor), fov_deg=fov_deg, width=width, height=height
        )
        if _frames_box(cam, box):
            return cam
        distance *= 1.1
    raise DegenerateViewError(f"could not frame {instance.id} within the image")


def cube_fill_box(
    support: ObjectInstance,
    kind: ViewKind,
    shrink: float = 0.9,
    top_height: float = 0.35,
) -> Aabb3:
    """Virtual cube used to mask where small objects may appear."""
    kind = ViewKind(kind)
    box = support.world_bbox
    cx, cy, cz = box.center
    dx, dy, dz = box.dims
    if kind is ViewKind.ON_TOP:
        hx, hy = shrink * dx / 2.0, shrink * dy / 2.0
        return Aabb3((cx - hx, cy - hy, box.max[2]), (cx + hx, cy + hy, box.max[2] + top_height))
    hx, hy, hz = shrink * dx / 2.0, shrink * dy / 2.0, shrink * dz / 2.0
    return Aabb3((cx - hx, cy - hy, cz - hz), (cx + hx, cy + hy, cz + hz))


def build_inpaint_mask(
    kind: MaskProvenance,
    frame: Tuple[DepthMap, InstanceIdMap],
    cam: CameraView,
    target: Optional[ObjectInstance] = None,
    view_kind: ViewKind = ViewKind.ON_TOP,
    settings: MaskSettings = MaskSettings(),
) -> InpaintMask:
    """
    Binary inpaint mask for a rendered frame.

    Pixels showing an existing object are removed and listed in
    ``excluded_ids``. For cube filling the receptacle ``target`` itself stays
    maskable.

    Raises:
        EmptyMaskError: nothing is left to inpaint.
    """
    kind = MaskProvenance(kind)
    depth, ids = frame
    h, w = ids.ids.shape

    if kind is MaskProvenance.ROOM_CENTERED:
        cols = np.arange(w) + 0.5
        rows = np.arange(h) + 0.5
        half_w = settings.center_width_frac * w / 2.0
        half_h = settings.center_height_frac * h / 2.0
        in_cols = np.abs(cols - w / 2.0) <= half_w
        in_rows = np.abs(rows - h / 2.0) <= half_h
        region = in_rows[:, None] & in_cols[None, :]
        keep = None
    else:
        if target is None:
            raise ValueError("cube-fill masks need the receptacle instance as target")
        cube = cube_fill_box(
            target, view_kind, shrink=settings.cube_shrink, top_height=settings.cube_top_height
        )
        dirs = camera_rays(cam).reshape(-1, 3)
        cube_t = _box_depth(np.asarray(cam.eye, dtype=float), dirs, cube).reshape(h, w)
        hit = np.isfinite(cube_t)
        own = ids.pixels_of(target.id)
        nearer = hit & (~depth.valid | (cube_t <= depth.values + 1e-6))
        region = hit & (nearer | own)
        keep = target.id

    objects = ids.ids >= 0
    if keep is not None:
        objects &= ~ids.pixels_of(keep)
    excluded = ids.visible_ids(region & objects)
    weights = (region & ~objects).astype(float)
    if not weights.any():
        raise EmptyMaskError(f"{kind.value} mask is empty after excluding {list(excluded)}")
    return InpaintMask(weights, kind, excluded)


def scaled_softening(width: int, height: int) -> Tuple[int, float]:
    """Default (erosion radius, blur sigma) scaled from the 512x512 values."""
    factor = math.sqrt(width * height) / 512.0
    return int(round(DEFAULT_EROSION_RADIUS_PX * factor)), DEFAULT_BLUR_SIGMA_PX * factor


def _disc(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def soften_mask(mask: InpaintMask, erosion_radius_px: int, blur_sigma_px: float) -> InpaintMask:
    """
    Erode the mask by a disc, then blur it with a Gaussian (truncated at 3 sigma).

    With radius 0 and sigma 0 the mask is returned unchanged.
    """
    if erosion_radius_px < 0 or blur_sigma_px < 0:
        raise ValueError("erosion radius and blur sigma must be non-negative")
    weights = mask.weights
    if erosion_radius_px > 0:
        eroded = ndimage.binary_erosion(
            mask.binary(), structure=_disc(int(erosion_radius_px)), border_value=0
        )
        weights = eroded.astype(float)
    if blur_sigma_px > 0:
        weights = ndimage.gaussian_filter(
            weights, sigma=blur_sigma_px, mode="constant", cval=0.0, truncate=BLUR_TRUNCATE
        )
    return InpaintMask(np.clip(weights, 0.0, 1.0), mask.provenance, mask.excluded_ids)
