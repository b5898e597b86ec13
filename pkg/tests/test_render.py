"""Tests for the ray-cast renderer, occupancy and floor visibility."""

import time

import numpy as np
import pytest

import scenex as sx
from scenex.core.geometry import Aabb3
from scenex.core.render import (
    FLOOR_ID,
    WALL_IDS,
    box_mesh,
    footprint_of,
    ray_aabb_depth,
    render_rgb,
)
from scenex.core.scene import ObjectCategory, ObjectSpec, make_instance


def box_instance(id, lo, hi, category=ObjectCategory.FLOOR):
    """Instance whose world bbox is exactly the box lo..hi."""
    dims = [b - a for a, b in zip(lo, hi)]
    position = ((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, lo[2])
    return make_instance(id, ObjectSpec(id.split("_")[0], category=category), "box", dims, position)


def frontal_setup():
    """Camera looking along +x at a box 1.5 m ahead."""
    room = sx.Room(extent=(4.0, 4.0))
    box = box_instance("crate_000", (2.0, 1.5, 0.5), (2.5, 2.5, 1.5))
    cam = sx.camera_from_lookat((0.5, 2.013, 1.0), (3.5, 2.013, 1.0), fov_deg=60, width=64, height=48)
    return sx.SceneState(room=room, instances=(box,)), cam


def test_rasterize_box_depth_and_ids():
    """The box face nearest the camera owns the center pixel at its z-depth."""
    scene, cam = frontal_setup()
    depth, ids = sx.rasterize(scene, cam)
    assert depth.values.shape == (48, 64)
    assert ids.ids[24, 32] == 0
    assert depth.values[24, 32] == pytest.approx(1.5)
    assert ray_aabb_depth(cam, 32.5, 24.5, scene.instances[0].world_bbox) == pytest.approx(1.5)
    assert ids.visible_ids() == ("crate_000",)


def test_rasterize_matches_analytic_ray_depth():
    """Every box pixel agrees with the analytic slab depth at its center."""
    scene, cam = frontal_setup()
    depth, ids = sx.rasterize(scene, cam)
    box = scene.instances[0].world_bbox
    rows, cols = np.nonzero(ids.pixels_of("crate_000"))
    assert len(rows) > 50
    for r, c in zip(rows[::7], cols[::7]):
        assert depth.values[r, c] == pytest.approx(ray_aabb_depth(cam, c + 0.5, r + 0.5, box), abs=1e-9)


def test_shell_surrounds_empty_room():
    """Without furniture every pixel sees a wall, the floor or the ceiling."""
    scene, cam = frontal_setup()
    depth, ids = sx.rasterize(sx.SceneState(room=scene.room), cam)
    assert depth.valid.all()
    assert (ids.ids < 0).all()
    assert ids.ids[24, 32] == WALL_IDS[1]
    assert depth.values[24, 32] == pytest.approx(3.5)
    assert ids.ids[47, 32] == FLOOR_ID


def test_nearer_box_occludes_and_ties_go_first():
    """Closer surfaces win; identical boxes resolve to the first listed."""
    scene, cam = frontal_setup()
    near = box_instance("panel_000", (1.5, 1.9, 0.9), (1.6, 2.1, 1.1))
    twin = box_instance("twin_000", (2.0, 1.5, 0.5), (2.5, 2.5, 1.5))
    scene = sx.SceneState(room=scene.room, instances=scene.instances + (near, twin))
    depth, ids = sx.rasterize(scene, cam)
    assert ids.instance_ids[ids.ids[24, 32]] == "panel_000"
    assert depth.values[24, 32] == pytest.approx(1.0)
    assert "twin_000" not in ids.visible_ids()


def test_mesh_rendering_matches_box():
    """A triangle mesh of the bbox renders the same depth as the bbox."""
    scene, cam = frontal_setup()
    inst = scene.instances[0]
    plain, _ = sx.rasterize(scene, cam)
    meshed, _ = sx.rasterize(scene, cam, meshes={inst.id: box_mesh(inst.world_bbox)})
    np.testing.assert_allclose(meshed.values, plain.values, atol=1e-9)


def test_render_rgb_is_uint8_image():
    """RGB renders have one byte per channel."""
    scene, cam = frontal_setup()
    rgb = render_rgb(*sx.rasterize(scene, cam))
    assert rgb.shape == (48, 64, 3)
    assert rgb.dtype == np.uint8


def test_occupancy_counts_floor_objects_only():
    """A 2x2 footprint covers a quarter of a 4x4 floor; wall and small objects do not count."""
    room = sx.Room(extent=(4.0, 4.0))
    bed = box_instance("bed_000", (1.0, 1.0, 0.0), (3.0, 3.0, 0.5))
    overlap = box_instance("rug_000", (1.5, 1.5, 0.0), (2.5, 2.5, 0.01))
    shelf = box_instance("shelf_000", (0.0, 0.0, 1.0), (2.0, 0.3, 1.3), ObjectCategory.WALL)
    cup = box_instance("cup_000", (3.5, 3.5, 0.0), (3.6, 3.6, 0.1), ObjectCategory.SMALL)
    scene = sx.SceneState(room=room, instances=(bed, overlap, shelf, cup))
    assert sx.occupancy(scene) == pytest.approx(0.25)
    assert sx.occupancy(sx.SceneState(room=room)) == 0.0


def test_footprint_gap_and_overlap():
    """Footprint gap is the rectangle distance; overlap is the shared area."""
    a = footprint_of(Aabb3((0, 0, 0), (1, 1, 1)))
    b = footprint_of(Aabb3((2, 2, 0), (3, 3, 1)))
    c = footprint_of(Aabb3((0.5, 0.5, 0), (2, 2, 1)))
    assert a.gap(b) == pytest.approx(np.sqrt(2))
    assert a.gap(c) == 0.0
    assert a.overlap_area(c) == pytest.approx(0.25)


@pytest.mark.parametrize("side,minimum", [(3.0, 0.85), (4.0, 0.85), (6.0, 0.90)])
def test_corner_view_sees_most_of_the_floor(side, minimum):
    """
    The first corner view covers most of a square floor.

    At the default pose about 0.87 of a 3-4 m floor is visible; the
    bounds leave a little room under that value.
    """
    room = sx.Room(extent=(side, side))
    cam = sx.room_views(room).cameras[0]
    start = time.perf_counter()
    visible = sx.floor_visibility(room, cam)
    assert time.perf_counter() - start < 1.0
    assert minimum <= visible <= 1.0


def test_floor_visibility_blind_below_floor():
    """A camera on or below the floor sees nothing."""
    room = sx.Room(extent=(4.0, 4.0))
    cam = sx.camera_from_lookat((2.0, 2.0, 0.0), (3.0, 3.0, 0.0))
    assert sx.floor_visibility(room, cam) == 0.0
