"""Minimal ray-cast renderer for ground-truth depth and instance-id buffers.

The room shell is drawn one-sided: only the inner faces of the floor, the
ceiling and the four walls are visible, so a camera standing on a wall plane
(the corner views) still sees the room interior.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np

from scenex.core.geometry import Aabb3, CameraView, DepthMap, camera_rays, project_points
from scenex.core.scene import ObjectCategory, ObjectInstance, Room, SceneState

logger = logging.getLogger(__name__)

FLOOR_ID = -1
CEILING_ID = -2
WALL_IDS = (-10, -11, -12, -13)
BACKGROUND_ID = -100

DEFAULT_OCCUPANCY_RESOLUTION = 512
DEFAULT_VISIBILITY_SAMPLES = 200

_T_EPS = 1e-9

Mesh = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class InstanceIdMap:
    """Per-pixel owner of the visible surface.

    ``ids[row, col] >= 0`` indexes ``instance_ids``; negative values are the
    shell sentinels above.
    """

    ids: np.ndarray
    instance_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int32)
        if ids.ndim != 2:
            raise ValueError(f"id map must be 2D, got shape {ids.shape}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "instance_ids", tuple(self.instance_ids))
        if ids.size and ids.max() >= len(self.instance_ids):
            raise ValueError(f"id {ids.max()} has no instance (only {len(self.instance_ids)})")

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    def index_of(self, instance_id: str) -> int:
        try:
            return self.instance_ids.index(instance_id)
        except ValueError:
            raise KeyError(f"instance {instance_id!r} is not in this frame") from None

    def pixels_of(self, instance_id: str) -> np.ndarray:
        if instance_id not in self.instance_ids:
            return np.zeros(self.ids.shape, dtype=bool)
        return self.ids == self.index_of(instance_id)

    def object_mask(self) -> np.ndarray:
        return self.ids >= 0

    def visible_ids(self, where: Optional[np.ndarray] = None) -> Tuple[str, ...]:
        """Instance ids with at least one pixel (inside ``where`` if given)."""
        ids = self.ids if where is None else self.ids[np.asarray(where, dtype=bool)]
        present = np.unique(ids[ids >= 0])
        return tuple(self.instance_ids[k] for k in present)


@dataclass(frozen=True)
class Footprint:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def area(self) -> float:
        return max(0.0, self.xmax - self.xmin) * max(0.0, self.ymax - self.ymin)

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)

    def gap(self, other: "Footprint") -> float:
        """Euclidean distance between the two rectangles (0 if they touch)."""
        gx = max(0.0, max(self.xmin, other.xmin) - min(self.xmax, other.xmax))
        gy = max(0.0, max(self.ymin, other.ymin) - min(self.ymax, other.ymax))
        return float(np.hypot(gx, gy))

    def overlap_area(self, other: "Footprint") -> float:
        ox = min(self.xmax, other.xmax) - max(self.xmin, other.xmin)
        oy = min(self.ymax, other.ymax) - max(self.ymin, other.ymin)
        return max(0.0, ox) * max(0.0, oy)


def footprint_of(obj: Union[ObjectInstance, Aabb3]) -> Footprint:
    box = obj.world_bbox if isinstance(obj, ObjectInstance) else obj
    return Footprint(box.min[0], box.min[1], box.max[0], box.max[1])


def _slab(origin: np.ndarray, dirs: np.ndarray, lo: Sequence[float], hi: Sequence[float]):
    """Vectorized slab test; returns (t_near, t_far) for each ray."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    zero = np.abs(dirs) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.where(zero, 1.0, dirs)
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    inside = (origin >= lo) & (origin <= hi)
    tmin = np.where(zero, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(zero, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
    return tmin.max(axis=-1), tmax.min(axis=-1)


def _box_depth(origin: np.ndarray, dirs: np.ndarray, box: Aabb3) -> np.ndarray:
    t_near, t_far = _slab(origin, dirs, box.min, box.max)
    hit = (t_near <= t_far) & (t_near > _T_EPS)
    return np.where(hit, t_near, np.inf)


def box_mesh(box: Aabb3) -> Mesh:
    """Triangle mesh (12 faces) of an AABB."""
    vertices = box.corners()
    # corner index = 4*ix + 2*iy + iz
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # x min
            [4, 6, 7], [4, 7, 5],  # x max
            [0, 4, 5], [0, 5, 1],  # y min
            [2, 3, 7], [2, 7, 6],  # y max
            [0, 2, 6], [0, 6, 4],  # z min
            [1, 5, 7], [1, 7, 3],  # z max
        ]
    )
    return vertices, faces


def _mesh_depth(origin: np.ndarray, dirs: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Nearest Moller-Trumbore hit per ray; inf where the mesh is missed."""
    vertices, faces = (np.asarray(m) for m in mesh)
    best = np.full(dirs.shape[0], np.inf)
    for tri in faces:
        v0, v1, v2 = vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]
        e1, e2 = v1 - v0, v2 - v0
        p = np.cross(dirs, e2)
        det = p @ e1
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = origin - v0
        a = (p @ s) * inv
        qv = np.cross(s, e1)
        b = (dirs @ qv) * inv
        t = (qv @ e2) * inv
        hit = ok & (a >= 0) & (b >= 0) & (a + b <= 1) & (t > _T_EPS)
        best = np.where(hit & (t < best), t, best)
    return best


def _shell_hits(origin: np.ndarray, dirs: np.ndarray, room: Room):
    """Depth and sentinel id of the nearest inner shell face per ray."""
    x0, y0, x1, y1 = room.bounds
    h = room.wall_height
    lo = np.array([x0, y0, 0.0])
    hi = np.array([x1, y1, h])
    # (axis, plane value, inward sign, id)
    faces = [
        (2, 0.0, 1.0, FLOOR_ID),
        (2, h, -1.0, CEILING_ID),
        (1, y0, 1.0, WALL_IDS[0]),
        (0, x1, -1.0, WALL_IDS[1]),
        (1, y1, -1.0, WALL_IDS[2]),
        (0, x0, 1.0, WALL_IDS[3]),
    ]
    depth = np.full(dirs.shape[0], np.inf)
    ids = np.full(dirs.shape[0], BACKGROUND_ID, dtype=np.int32)
    tol = 1e-9
    for axis, value, inward, sentinel in faces:
        d = dirs[:, axis]
        front = d * inward < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(front, (value - origin[axis]) / np.where(front, d, 1.0), np.inf)
            pts = origin + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        within = np.ones_like(front)
        for other in range(3):
            if other != axis:
                within &= (pts[:, other] >= lo[other] - tol) & (pts[:, other] <= hi[other] + tol)
        hit = front & within & (t > _T_EPS) & (t < depth)
        depth = np.where(hit, t, depth)
        ids = np.where(hit, sentinel, ids)
    return depth, ids


def rasterize(
    scene: SceneState,
    cam: CameraView,
    meshes: Optional[Mapping[str, Mesh]] = None,
) -> Tuple[DepthMap, InstanceIdMap]:
    """
    Render z-depth and instance ids of ``scene`` seen from ``cam``.

    Instances are drawn as their world bbox unless ``meshes`` maps the
    instance id to a world-space triangle mesh ``(vertices, faces)``.
    Z-buffer ties go to the instance listed first.

    Returns:
        (DepthMap, InstanceIdMap) of shape (cam.height, cam.width)
    """
    dirs = camera_rays(cam).reshape(-1, 3)
    origin = np.asarray(cam.eye, dtype=float)
    depth, ids = _shell_hits(origin, dirs, scene.room)
    meshes = meshes or {}

    for index, inst in enumerate(scene.instances):
        box_t = _box_depth(origin, dirs, inst.world_bbox)
        if inst.id in meshes:
            candidates = np.isfinite(box_t)
            t = np.full_like(box_t, np.inf)
            if candidates.any():
                t[candidates] = _mesh_depth(origin, dirs[candidates], meshes[inst.id])
        else:
            t = box_t
        closer = t < depth
        depth = np.where(closer, t, depth)
        ids = np.where(closer, index, ids)

    shape = (cam.height, cam.width)
    valid = np.isfinite(depth)
    depth_map = DepthMap(np.where(valid, depth, 0.0).reshape(shape), valid.reshape(shape))
    id_map = InstanceIdMap(ids.reshape(shape), tuple(i.id for i in scene.instances))
    return depth_map, id_map


def ray_aabb_depth(cam: CameraView, u: float, v: float, box: Aabb3) -> Optional[float]:
    """Analytic z-depth at which the ray through (u, v) enters ``box``."""
    cx, cy = cam.principal
    direction = (
        cam.right * (u - cx) / cam.focal + cam.down * (v - cy) / cam.focal + cam.forward
    )
    t = _box_depth(np.asarray(cam.eye, dtype=float), direction.reshape(1, 3), box)[0]
    return None if not np.isfinite(t) else float(t)


def render_rgb(depth: DepthMap, id_map: InstanceIdMap) -> np.ndarray:
    """Flat-shaded uint8 RGB image of a rendered frame."""
    palette = matplotlib.colormaps["tab20"]
    ids = id_map.ids
    rgb = np.zeros(ids.shape + (3,), dtype=float)
    rgb[ids == FLOOR_ID] = (0.58, 0.52, 0.46)
    rgb[ids == CEILING_ID] = (0.95, 0.95, 0.93)
    for k, wall_id in enumerate(WALL_IDS):
        rgb[ids == wall_id] = (0.86 - 0.03 * k, 0.84 - 0.03 * k, 0.80 - 0.03 * k)
    for k in np.unique(ids[ids >= 0]):
        rgb[ids == k] = palette(int(k) % 20)[:3]
    if depth.valid.any():
        d = depth.values
        lo, hi = d[depth.valid].min(), d[depth.valid].max()
        shade = 1.0 - 0.35 * (d - lo) / max(hi - lo, 1e-9)
        rgb *= np.where(depth.valid, shade, 1.0)[..., None]
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


def floor_visibility(
    room: Room, cam: CameraView, samples: int = DEFAULT_VISIBILITY_SAMPLES
) -> float:
    """
    Fraction of the floor visible from ``cam``, on a samples x samples grid.

    The shell is one-sided, so a floor point inside the room is visible iff
    it projects into the image in front of the camera.
    """
    x0, y0, x1, y1 = room.bounds
    if cam.eye[2] <= 0.0:
        return 0.0
    xs = x0 + (np.arange(samples) + 0.5) * (x1 - x0) / samples
    ys = y0 + (np.arange(samples) + 0.5) * (y1 - y0) / samples
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    u, v, d = project_points(pts, cam)
    with np.errstate(invalid="ignore"):
        seen = np.isfinite(d) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    return float(seen.mean())


def occupancy(scene: SceneState, resolution: int = DEFAULT_OCCUPANCY_RESOLUTION) -> float:
    """
    Fraction of the floor covered by the union of floor-object footprints.

    Computed on a resolution x resolution grid of cell centers; wall and
    small objects do not count.
    """
    x0, y0, x1, y1 = scene.room.bounds
    cell_x = (x1 - x0) / resolution
    cell_y = (y1 - y0) / resolution
    covered = np.zeros((resolution, resolution), dtype=bool)
    for inst in scene.instances:
        if inst.category != ObjectCategory.FLOOR:
            continue
        fp = footprint_of(inst)
        i_lo = max(0, int(np.ceil((fp.xmin - x0) / cell_x - 0.5 - 1e-9)))
        i_hi = min(resolution - 1, int(np.floor((fp.xmax - x0) / cell_x - 0.5 + 1e-9)))
        j_lo = max(0, int(np.ceil((fp.ymin - y0) / cell_y - 0.5 - 1e-9)))
        j_hi = min(resolution - 1, int(np.floor((fp.ymax - y0) / cell_y - 0.5 + 1e-9)))
        if i_lo <= i_hi and j_lo <= j_hi:
            covered[j_lo : j_hi + 1, i_lo : i_hi + 1] = True
    return float(covered.mean())
