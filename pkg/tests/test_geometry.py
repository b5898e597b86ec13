"""Tests for the camera model and AABB helpers."""

import numpy as np
import pytest

import scenex as sx
from scenex.core.errors import DegenerateViewError, EmptyCloudError
from scenex.core.geometry import (
    Aabb3,
    DepthMap,
    PointCloud,
    aabb_intersects,
    aabb_of,
    backproject,
    camera_rays,
    intrinsics,
    project,
)


def random_camera(rng):
    """Camera at a random eye looking at a random target inside a 6 m room."""
    while True:
        eye = rng.uniform([0.2, 0.2, 0.5], [5.8, 5.8, 2.5])
        target = rng.uniform([0.2, 0.2, 0.0], [5.8, 5.8, 1.5])
        d = target - eye
        if np.linalg.norm(d) > 0.5 and abs(d[2]) / np.linalg.norm(d) < 0.95:
            break
    fov = rng.uniform(40.0, 100.0)
    return sx.camera_from_lookat(eye, target, fov_deg=fov, width=320, height=240)


def test_default_camera_focal():
    """512 px at 84 degrees gives a focal length near 284.3 px."""
    cam = sx.camera_from_lookat((4, 4, 1.8), (0, 0, 0.5))
    assert cam.width == 512 and cam.height == 512
    assert cam.focal == pytest.approx(256.0 / np.tan(np.radians(42.0)))
    assert cam.focal == pytest.approx(284.3, abs=0.1)
    K = intrinsics(cam)
    assert K[0, 2] == 256.0 and K[1, 2] == 256.0


def test_camera_axes_orthonormal():
    """right, down and forward form an orthonormal frame with down pointing below the horizon."""
    cam = sx.camera_from_lookat((1, 1, 1.8), (3, 2, 0.5))
    R = cam.rotation()
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert cam.down[2] < 0
    assert abs(cam.right[2]) < 1e-12


def test_degenerate_views_rejected():
    """Coincident eye and target, or a view along up, cannot build a camera."""
    with pytest.raises(DegenerateViewError):
        sx.camera_from_lookat((1, 1, 1), (1, 1, 1))
    with pytest.raises(DegenerateViewError):
        sx.camera_from_lookat((1, 1, 3), (1, 1, 0))
    with pytest.raises(DegenerateViewError):
        sx.camera_from_lookat((0, 0, 1), (1, 1, 1), fov_deg=180.0)
    with pytest.raises(DegenerateViewError):
        sx.camera_from_lookat((0, 0, 1), (1, 1, 1), width=0)


def test_projection_round_trip():
    """Back-projecting then projecting returns the pixel and depth."""
    rng = np.random.default_rng(7)
    for _ in range(200):
        cam = random_camera(rng)
        u = rng.uniform(0, cam.width)
        v = rng.uniform(0, cam.height)
        d = rng.uniform(0.1, 10.0)
        point = backproject((u, v), d, cam)
        pu, pv, pd = project(point, cam)
        assert pu == pytest.approx(u, abs=1e-6)
        assert pv == pytest.approx(v, abs=1e-6)
        assert pd == pytest.approx(d, rel=1e-9)


def test_project_behind_camera_is_none():
    """Points behind the eye plane do not project."""
    cam = sx.camera_from_lookat((0, 0, 1), (1, 0, 1))
    assert project((-1.0, 0.0, 1.0), cam) is None


def test_backproject_rejects_bad_input():
    """Non-positive depth and pixels off the image raise ValueError."""
    cam = sx.camera_from_lookat((0, 0, 1), (1, 0, 1), width=64, height=48)
    with pytest.raises(ValueError):
        backproject((10, 10), 0.0, cam)
    with pytest.raises(ValueError):
        backproject((64.0, 10), 1.0, cam)


def test_camera_rays_have_unit_forward_component():
    """A hit at parameter t along a pixel ray has z-depth t and lands on that pixel center."""
    cam = sx.camera_from_lookat((0.5, 0.5, 1.6), (3, 2, 0.4), width=40, height=30)
    rays = camera_rays(cam)
    assert rays.shape == (30, 40, 3)
    np.testing.assert_allclose(rays @ cam.forward, 1.0, atol=1e-12)

    row, col, t = 7, 22, 2.5
    u, v, d = project(np.asarray(cam.eye) + t * rays[row, col], cam)
    assert u == pytest.approx(col + 0.5)
    assert v == pytest.approx(row + 0.5)
    assert d == pytest.approx(t)


def test_aabb_of_and_empty_cloud():
    """The bounding box is the per-axis min and max; an empty cloud has none."""
    pts = np.array([[0.0, 1.0, 2.0], [1.0, -1.0, 0.5], [0.5, 0.0, 3.0]])
    box = aabb_of(PointCloud(pts))
    assert box.min == (0.0, -1.0, 0.5)
    assert box.max == (1.0, 1.0, 3.0)
    assert box.dims == (1.0, 2.0, 2.5)
    with pytest.raises(EmptyCloudError):
        aabb_of(PointCloud())


def test_aabb_rejects_inverted_bounds():
    """min above max on any axis is invalid."""
    with pytest.raises(ValueError):
        Aabb3((0, 0, 1), (1, 1, 0))


def test_touching_boxes_do_not_intersect():
    """Shared faces are not an overlap; a margin turns them into one."""
    a = Aabb3((0, 0, 0), (1, 1, 1))
    b = Aabb3((1, 0, 0), (2, 1, 1))
    assert not aabb_intersects(a, b)
    assert aabb_intersects(a, b, margin=0.01)
    assert aabb_intersects(a, Aabb3((0.5, 0.5, 0.5), (1.5, 1.5, 1.5)))


def test_depth_raster_file(tmp_path):
    """Depth files keep values and mark invalid pixels."""
    values = np.arange(12, dtype=float).reshape(3, 4) * 0.25
    depth = DepthMap(values)
    path = sx.save_depth(tmp_path / "view0.depth", depth)
    assert path.read_bytes()[:4] == b"DPTH"

    loaded = sx.load_depth(path)
    assert loaded.values.shape == (3, 4)
    assert not loaded.valid[0, 0]
    assert loaded.valid[2, 3]
    np.testing.assert_allclose(loaded.values[loaded.valid], values[depth.valid])


def test_load_depth_rejects_bad_magic(tmp_path):
    """Files without the DPTH magic are refused."""
    path = tmp_path / "bad.depth"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        sx.load_depth(path)
