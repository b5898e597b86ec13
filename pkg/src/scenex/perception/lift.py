"""Depth rescaling and lifting of segmented instances to 3D boxes."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import DBSCAN

from scenex.core.errors import (
    DegenerateScaleError,
    InsufficientReferenceError,
    NoClusterError,
)
from scenex.core.geometry import (
    Aabb3,
    CameraView,
    DepthMap,
    PointCloud,
    aabb_of,
    backproject_pixels,
    camera_rays,
)
from scenex.core.render import InstanceIdMap
from scenex.perception.views import InpaintMask

logger = logging.getLogger(__name__)

DEFAULT_EPS_FRACTION = 0.05
DEFAULT_MIN_PTS_FRACTION = 0.01
DEFAULT_MIN_PTS_FLOOR = 4


class ReferenceMode(str, Enum):
    ROOM = "room-context"
    FURNITURE = "furniture-context"


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """Reference pixels as an (n, 2) array of (row, col)."""

    pixels: np.ndarray
    mode: ReferenceMode

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if len(px) < 2:
            raise InsufficientReferenceError(f"need at least 2 reference pixels, got {len(px)}")
        if len(np.unique(px, axis=0)) != len(px):
            raise ValueError("reference pixels must be distinct")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "mode", ReferenceMode(self.mode))

    def __len__(self) -> int:
        return len(self.pixels)

    def take(self, raster: np.ndarray) -> np.ndarray:
        return raster[self.pixels[:, 0], self.pixels[:, 1]]


@dataclass(frozen=True)
class RescaleStats:
    max_r: float
    min_r: float
    max_e: float
    min_e: float
    scale: float
    shift: float
    fallback: bool = False


@dataclass(frozen=True)
class ClusterParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if int(self.min_pts) < 1:
            raise ValueError(f"min_pts must be at least 1, got {self.min_pts}")
        object.__setattr__(self, "min_pts", int(self.min_pts))


def default_cluster_params(n_points: int, diagonal: float) -> ClusterParams:
    """eps = 5% of the cloud diagonal, min_pts = max(4, 1% of the cloud)."""
    eps = DEFAULT_EPS_FRACTION * diagonal if diagonal > 0 else 1e-6
    min_pts = max(DEFAULT_MIN_PTS_FLOOR, int(DEFAULT_MIN_PTS_FRACTION * n_points))
    return ClusterParams(eps=eps, min_pts=min_pts)


def select_reference_pixels(
    mode: ReferenceMode,
    instance_id_map: InstanceIdMap,
    inpaint_mask: InpaintMask,
    furniture_id: Optional[str] = None,
    depth_maps: Iterable[DepthMap] = (),
) -> ReferenceSet:
    """
    Pixels whose ground-truth depth anchors the rescale.

    ``room-context`` takes every pixel outside the mask; ``furniture-context``
    only the receptacle's own unmasked pixels. Pixels invalid in any of
    ``depth_maps`` are skipped. Order is row-major.

    Raises:
        InsufficientReferenceError: fewer than two eligible pixels.
    """
    mode = ReferenceMode(mode)
    eligible = inpaint_mask.weights <= 0.0
    if mode is ReferenceMode.FURNITURE:
        if furniture_id is None:
            raise ValueError("furniture-context references need a furniture_id")
        eligible &= instance_id_map.pixels_of(furniture_id)
    for depth in depth_maps:
        eligible &= depth.valid
    rows, cols = np.nonzero(eligible)
    if len(rows) < 2:
        raise InsufficientReferenceError(
            f"{mode.value}: only {len(rows)} unmasked reference pixel(s)"
        )
    return ReferenceSet(np.stack([rows, cols], axis=1), mode)


def rescale_depth(
    D_e: DepthMap,
    D_r: DepthMap,
    P_r: ReferenceSet,
    fallback: bool = False,
) -> Tuple[DepthMap, RescaleStats]:
    """
    Align relative depth ``D_e`` to metric depth ``D_r`` on the reference pixels.

    The estimate is scaled so its range over ``P_r`` matches that of ``D_r``
    and shifted so the means match.

    Args:
        D_e: Estimated (relative) depth
        D_r: Rendered ground-truth depth
        P_r: Reference pixels
        fallback: On a constant estimate, align by mean shift instead of raising

    Returns:
        (rescaled depth, stats)

    Raises:
        DegenerateScaleError: ``D_e`` is constant over ``P_r`` and fallback is off.

    Examples:
        >>> D, stats = rescale_depth(estimate, rendered, refs)
        >>> stats.scale
        2.0
    """
    if D_e.values.shape != D_r.values.shape:
        raise ValueError(f"depth shapes differ: {D_e.values.shape} vs {D_r.values.shape}")
    ref_r = P_r.take(D_r.values)
    ref_e = P_r.take(D_e.values)
    if not (P_r.take(D_r.valid).all() and P_r.take(D_e.valid).all()):
        raise InsufficientReferenceError("reference pixels must be valid in both depth maps")

    max_r, min_r = float(ref_r.max()), float(ref_r.min())
    max_e, min_e = float(ref_e.max()), float(ref_e.min())
    mean_r, mean_e = float(ref_r.mean()), float(ref_e.mean())

    if max_e == min_e:
        if not fallback:
            raise DegenerateScaleError(f"estimated depth is constant ({max_e}) on references")
        logger.warning("constant depth estimate on %d references; shift-only alignment", len(P_r))
        scale, used_fallback = 1.0, True
    else:
        scale, used_fallback = (max_r - min_r) / (max_e - min_e), False

    shift = mean_r - mean_e * scale
    out = (D_e.values - mean_e) * scale + mean_r
    stats = RescaleStats(max_r, min_r, max_e, min_e, scale, shift, used_fallback)
    return DepthMap(out, valid=D_e.valid & (out > 0)), stats


def ray_to_z_depth(depth: DepthMap, cam: CameraView) -> DepthMap:
    """Convert depth measured along each pixel ray to z-depth."""
    norms = np.linalg.norm(camera_rays(cam), axis=-1)
    return DepthMap(depth.values / norms, valid=depth.valid)


def _largest_cluster(labels: np.ndarray) -> Optional[np.ndarray]:
    """Indices of the largest cluster; ties go to the cluster seen first."""
    best, best_key = None, None
    for label in np.unique(labels[labels >= 0]):
        members = np.flatnonzero(labels == label)
        key = (-len(members), members[0])
        if best_key is None or key < best_key:
            best, best_key = members, key
    return best


def cluster_points(points: np.ndarray, params: ClusterParams) -> np.ndarray:
    """Indices of the retained (largest) density cluster, in input order.

    Raises:
        NoClusterError: no cluster reaches ``params.min_pts``.
    """
    if len(points) < params.min_pts:
        raise NoClusterError(f"{len(points)} points cannot form a cluster of {params.min_pts}")
    labels = DBSCAN(eps=params.eps, min_samples=params.min_pts).fit_predict(points)
    kept = _largest_cluster(labels)
    if kept is None:
        raise NoClusterError(
            f"no dense cluster among {len(points)} points (eps={params.eps:.4f}, min_pts={params.min_pts})"
        )
    return kept


def lift_instance(
    D_rescaled: DepthMap,
    cam: CameraView,
    instance_mask: np.ndarray,
    params: Optional[ClusterParams] = None,
) -> Tuple[PointCloud, Aabb3]:
    """
    Back-project one instance mask, drop outliers and fit its box.

    Args:
        D_rescaled: Metric z-depth
        cam: Camera the depth was rendered from
        instance_mask: (H, W) boolean mask of the instance
        params: Density clustering settings; scale-relative defaults if omitted

    Returns:
        (retained cloud, its axis-aligned box)
    """
    mask = np.asarray(instance_mask, dtype=bool) & D_rescaled.valid
    rows, cols = np.nonzero(mask)
    points = backproject_pixels(cols + 0.5, rows + 0.5, D_rescaled.values[rows, cols], cam)
    if params is None:
        if len(points) == 0:
            raise NoClusterError("instance mask has no valid depth pixels")
        diagonal = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
        params = default_cluster_params(len(points), diagonal)
    kept = cluster_points(points, params)
    if len(kept) < len(points):
        logger.debug("dropped %d outlier point(s) of %d", len(points) - len(kept), len(points))
    cloud = PointCloud(points[kept])
    return cloud, aabb_of(cloud)


@dataclass(frozen=True)
class LiftedObject:
    index: int
    name: str
    box: Aabb3
    n_points: int


def lift_detections(
    D_rescaled: DepthMap,
    cam: CameraView,
    masks: Sequence[Tuple[str, np.ndarray]],
    params: Optional[ClusterParams] = None,
) -> Tuple[list, list]:
    """
    Lift every (name, mask) pair of a frame.

    Returns:
        (lifted objects, [(index, name, reason)] for dropped ones)
    """
    lifted, dropped = [], []
    for index, (name, mask) in enumerate(masks):
        try:
            cloud, box = lift_instance(D_rescaled, cam, mask, params)
        except NoClusterError as exc:
            logger.warning("dropping %s: %s", name, exc)
            dropped.append((index, name, str(exc)))
            continue
        lifted.append(LiftedObject(index, name, box, len(cloud)))
    return lifted, dropped
