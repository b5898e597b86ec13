"""Camera model, projection / back-projection and AABB utilities.

Conventions used throughout scenex:

- World frame is right-handed with +z up; the floor is the plane z = 0.
- Pixel (col, row) has its center at (col + 0.5, row + 0.5). ``project`` and
  ``backproject`` work on continuous image coordinates, so the principal
  point is exactly (width / 2, height / 2).
- ``fov_deg`` is the horizontal field of view; pixels are square, so the
  vertical field of view follows from the aspect ratio.
- Depth is z-depth (distance along the camera forward axis), not ray length.
- Raster arrays are indexed ``[row, col]`` with shape ``(height, width)``.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from scenex.core.errors import DegenerateViewError, EmptyCloudError

Vec3 = Tuple[float, float, float]

DEFAULT_UP: Vec3 = (0.0, 0.0, 1.0)
DEFAULT_FOV_DEG = 84.0
DEFAULT_RESOLUTION = 512

DEPTH_MAGIC = b"DPTH"
_DEPTH_HEADER = struct.Struct("<4sIII")

_EPS = 1e-12


def _vec3(value: Sequence[float], name: str) -> Vec3:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be three finite numbers, got {value!r}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned 3D box in meters."""

    min: Vec3
    max: Vec3

    def __post_init__(self):
        lo = _vec3(self.min, "Aabb3.min")
        hi = _vec3(self.max, "Aabb3.max")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"Aabb3 min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def center(self) -> Vec3:
        return tuple((a + b) / 2.0 for a, b in zip(self.min, self.max))

    @property
    def dims(self) -> Vec3:
        return tuple(b - a for a, b in zip(self.min, self.max))

    @property
    def footprint_area(self) -> float:
        dx, dy, _ = self.dims
        return dx * dy

    def inflate(self, margin: float) -> "Aabb3":
        return Aabb3(
            tuple(a - margin for a in self.min), tuple(b + margin for b in self.max)
        )

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(
            np.all(p >= np.asarray(self.min) - tol)
            and np.all(p <= np.asarray(self.max) + tol)
        )

    def corners(self) -> np.ndarray:
        """Return the 8 corners as an (8, 3) array."""
        xs, ys, zs = zip(self.min, self.max)
        return np.array([[x, y, z] for x in xs for y in ys for z in zs], dtype=float)


@dataclass(frozen=True)
class CameraView:
    """Pinhole camera defined by a look-at pose.

    Camera axes: ``right`` (image +u), ``down`` (image +v) and ``forward``.
    """

    eye: Vec3
    target: Vec3
    up: Vec3 = DEFAULT_UP
    fov_deg: float = DEFAULT_FOV_DEG
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        eye = _vec3(self.eye, "eye")
        target = _vec3(self.target, "target")
        up = _vec3(self.up, "up")
        object.__setattr__(self, "eye", eye)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "up", up)

        if not 0.0 < float(self.fov_deg) < 180.0:
            raise DegenerateViewError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise DegenerateViewError(
                f"resolution must be at least 1x1, got {self.width}x{self.height}"
            )
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

        direction = np.subtract(target, eye)
        if np.linalg.norm(direction) < _EPS:
            raise DegenerateViewError(f"eye and target coincide at {eye}")
        forward = direction / np.linalg.norm(direction)
        up_arr = np.asarray(up)
        if np.linalg.norm(up_arr) < _EPS:
            raise DegenerateViewError("up vector has zero length")
        right = np.cross(forward, up_arr / np.linalg.norm(up_arr))
        if np.linalg.norm(right) < 1e-9:
            raise DegenerateViewError(
                f"view direction {tuple(forward)} is parallel to up {up}"
            )

    @property
    def forward(self) -> np.ndarray:
        d = np.subtract(self.target, self.eye)
        return d / np.linalg.norm(d)

    @property
    def right(self) -> np.ndarray:
        up = np.asarray(self.up) / np.linalg.norm(self.up)
        r = np.cross(self.forward, up)
        return r / np.linalg.norm(r)

    @property
    def down(self) -> np.ndarray:
        return np.cross(self.forward, self.right)

    @property
    def focal(self) -> float:
        """Focal length in pixels (shared by both axes)."""
        return (self.width / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)

    @property
    def principal(self) -> Tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)

    @property
    def vertical_fov_deg(self) -> float:
        return float(np.degrees(2.0 * np.arctan((self.height / 2.0) / self.focal)))

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are right, down, forward."""
        return np.stack([self.right, self.down, self.forward])


def camera_from_lookat(
    eye: Sequence[float],
    target: Sequence[float],
    fov_deg: float = DEFAULT_FOV_DEG,
    width: int = DEFAULT_RESOLUTION,
    height: int = DEFAULT_RESOLUTION,
    up: Sequence[float] = DEFAULT_UP,
) -> CameraView:
    """
    Build a camera looking from ``eye`` at ``target``.

    Raises:
        DegenerateViewError: eye == target, forward parallel to up, or bad
            fov / resolution.

    Examples:
        >>> cam = camera_from_lookat((4, 4, 1.8), (0, 0, 0.5))
        >>> cam.width, cam.height
        (512, 512)
    """
    return CameraView(
        eye=tuple(eye),
        target=tuple(target),
        up=tuple(up),
        fov_deg=fov_deg,
        width=width,
        height=height,
    )


def intrinsics(cam: CameraView) -> np.ndarray:
    """Return the 3x3 pinhole matrix K for continuous image coordinates."""
    cx, cy = cam.principal
    f = cam.focal
    return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])


def backproject(pixel: Sequence[float], depth: float, cam: CameraView) -> np.ndarray:
    """
    Lift continuous image coordinate ``(u, v)`` at z-depth ``depth`` to world.

    Raises:
        ValueError: depth is not positive or the pixel lies outside the image.
    """
    u, v = float(pixel[0]), float(pixel[1])
    if not depth > 0 or not np.isfinite(depth):
        raise ValueError(f"depth must be positive and finite, got {depth}")
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        raise ValueError(
            f"pixel ({u}, {v}) outside image {cam.width}x{cam.height}"
        )
    return backproject_pixels(np.array([u]), np.array([v]), np.array([depth]), cam)[0]


def backproject_pixels(
    u: np.ndarray, v: np.ndarray, depth: np.ndarray, cam: CameraView
) -> np.ndarray:
    """Vectorized back-projection; returns an (N, 3) array of world points."""
    cx, cy = cam.principal
    f = cam.focal
    depth = np.asarray(depth, dtype=float)
    xc = (np.asarray(u, dtype=float) - cx) / f * depth
    yc = (np.asarray(v, dtype=float) - cy) / f * depth
    cam_pts = np.stack([xc, yc, depth], axis=-1)
    return np.asarray(cam.eye) + cam_pts @ cam.rotation()


def project(point: Sequence[float], cam: CameraView) -> Optional[Tuple[float, float, float]]:
    """
    Project a world point to ``(u, v, depth)``.

    Returns ``None`` when the point lies at or behind the eye plane.
    """
    u, v, d = project_points(np.asarray(point, dtype=float).reshape(1, 3), cam)
    if not np.isfinite(d[0]):
        return None
    return (float(u[0]), float(v[0]), float(d[0]))


def project_points(points: np.ndarray, cam: CameraView):
    """Vectorized projection; behind-camera points get NaN coordinates."""
    rel = np.asarray(points, dtype=float) - np.asarray(cam.eye)
    cam_pts = rel @ cam.rotation().T
    z = cam_pts[:, 2]
    ok = z > 1e-12
    safe = np.where(ok, z, 1.0)
    cx, cy = cam.principal
    u = np.where(ok, cx + cam.focal * cam_pts[:, 0] / safe, np.nan)
    v = np.where(ok, cy + cam.focal * cam_pts[:, 1] / safe, np.nan)
    d = np.where(ok, z, np.nan)
    return u, v, d


def camera_rays(cam: CameraView) -> np.ndarray:
    """
    Per-pixel world ray directions at pixel centers, shape (H, W, 3).

    Directions are scaled so that their forward component is 1; a hit at
    parameter ``t`` along a ray therefore has z-depth ``t``.
    """
    cx, cy = cam.principal
    cols = (np.arange(cam.width) + 0.5 - cx) / cam.focal
    rows = (np.arange(cam.height) + 0.5 - cy) / cam.focal
    xn, yn = np.meshgrid(cols, rows)
    dirs_cam = np.stack([xn, yn, np.ones_like(xn)], axis=-1)
    return dirs_cam @ cam.rotation()


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel z-depth raster with a validity mask (shape (H, W))."""

    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"depth values must be 2D, got shape {values.shape}")
        ok = np.isfinite(values) & (values > 0)
        if self.valid is None:
            valid = ok
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != values.shape:
                raise ValueError(
                    f"validity mask shape {valid.shape} != depth shape {values.shape}"
                )
            valid = valid & ok
        object.__setattr__(self, "values", np.where(valid, values, 0.0))
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-frame points, shape (N, 3)."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


def aabb_of(cloud: Union[PointCloud, np.ndarray]) -> Aabb3:
    """
    Tightest axis-aligned box containing every point.

    Raises:
        EmptyCloudError: the cloud has no points.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    pts = pts.reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyCloudError("cannot bound an empty point cloud")
    return Aabb3(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


def aabb_intersects(a: Aabb3, b: Aabb3, margin: float = 0.0) -> bool:
    """
    True iff the boxes, each inflated by ``margin``, overlap with positive
    volume on all three axes. Shared faces do not count as overlap.
    """
    return all(
        a.min[k] - margin < b.max[k] + margin and b.min[k] - margin < a.max[k] + margin
        for k in range(3)
    )


def save_depth(path: Union[str, Path], depth: DepthMap) -> Path:
    """Write ``depth`` in the DPTH debug raster format.

    Invalid pixels are stored as NaN.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raster = np.where(depth.valid, depth.values, np.nan).astype("<f4")
    header = _DEPTH_HEADER.pack(DEPTH_MAGIC, depth.width, depth.height, 0)
    path.write_bytes(header + raster.tobytes(order="C"))
    return path


def load_depth(path: Union[str, Path]) -> DepthMap:
    """Read a DPTH raster written by ``save_depth``."""
    data = Path(path).read_bytes()
    if len(data) < _DEPTH_HEADER.size:
        raise ValueError(f"{path}: truncated DPTH header")
    magic, width, height, _ = _DEPTH_HEADER.unpack_from(data)
    if magic != DEPTH_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {DEPTH_MAGIC!r}")
    expected = width * height * 4
    body = data[_DEPTH_HEADER.size :]
    if len(body) != expected:
        raise ValueError(f"{path}: expected {expected} raster bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(height, width).astype(float)
    return DepthMap(np.nan_to_num(values, nan=0.0), valid=np.isfinite(values))
