"""Tests for candidate enumeration, scoring and the layout search."""

import logging
import math
import time

import numpy as np
import pytest

import scenex as sx
from scenex.core.errors import OversizeError
from scenex.core.geometry import Aabb3
from scenex.core.scene import ObjectCategory, ObjectSpec, Opening, make_instance, slugify
from scenex.layout.constraints import derive_floor_constraints, derive_wall_constraints
from scenex.layout.placer import (
    Candidate,
    LayoutItem,
    ScoringWeights,
    check_hard_constraints,
    enumerate_candidates,
    place_small_object,
    place_wall_objects,
    score_placement,
    small_object_scale,
    support_surface,
)

DUMMY_BOX = Aabb3((0, 0, 0), (1, 1, 1))


def layout_for(boxes, room, names=None):
    """Constraints and layout items for floor boxes, sizes taken from the boxes."""
    names = names or [f"item{k}" for k in range(len(boxes))]
    dets = [(ObjectSpec(n), b) for n, b in zip(names, boxes)]
    cs = derive_floor_constraints(dets, room)
    ids = [f"{slugify(n)}_{k:02d}" for k, n in enumerate(names)]
    by_id = {sid: LayoutItem(sid, spec, "box", b.dims) for sid, (spec, b) in zip(ids, dets)}
    return cs, [by_id[sid] for sid in cs.order]


def random_boxes(rng, n, cells=4, side=5.0):
    """Non-overlapping boxes, one per random grid cell."""
    pitch = side / cells
    out = []
    for cell in rng.permutation(cells * cells)[:n]:
        cx, cy = pitch * (0.5 + cell % cells), pitch * (0.5 + cell // cells)
        w, d = rng.uniform(0.3, pitch - 0.1, size=2)
        h = rng.uniform(0.3, 1.5)
        out.append(Aabb3((cx - w / 2, cy - d / 2, 0.0), (cx + w / 2, cy + d / 2, h)))
    return out


def boxes_overlap(a, b, tol=1e-9):
    return all(a.min[k] < b.max[k] - tol and b.min[k] < a.max[k] - tol for k in range(3))


def exhaustive(items, cs, scene, grid_step, placed=()):
    """Best (placed count, total score) over every assignment."""
    if not items:
        return (0, 0.0)
    item, rest = items[0], items[1:]
    cands = enumerate_candidates(item, cs, scene, grid_step, placed=placed)
    if not cands:
        return exhaustive(rest, cs, scene, grid_step, placed)
    best = None
    for cand in cands:
        inst = make_instance(
            item.id, item.spec, item.asset_id, item.asset_dims, (*cand.position, cand.base_z), cand.yaw, item.scale
        )
        n, total = exhaustive(rest, cs, scene, grid_step, placed + (inst,))
        key = (n + 1, total + score_placement(cand))
        if best is None or key > best:
            best = key
    return best


def test_score_hand_values():
    """At the reference with nothing placed the score is 1/0.01 + 1."""
    weights = ScoringWeights(w_rotation=0.0)
    at_reference = Candidate((2.0, 2.0), 0.0, DUMMY_BOX, delta_cur=0.0)
    assert score_placement(at_reference, weights) == pytest.approx(101.0, abs=1e-12)

    rotated = ScoringWeights(w_rotation=5.0)
    plain = score_placement(Candidate((2.0, 2.0), 0.0, DUMMY_BOX, delta_cur=0.3), rotated)
    facing = score_placement(Candidate((2.0, 2.0), 0.0, DUMMY_BOX, delta_cur=0.3, rotation_hits=1), rotated)
    assert facing - plain == pytest.approx(5.0, abs=1e-12)

    spread = Candidate((2.0, 2.0), 0.0, DUMMY_BOX, delta_cur=0.5, placed_distances=(("a", 1.5), ("b", 2.0)))
    heavy = ScoringWeights(object_weights={"b": 2.0})
    assert score_placement(spread, heavy) == pytest.approx(1.0 * (1.5 + 2 * 2.0 + 1 / 0.5 + 1.0), abs=1e-12)


def test_score_monotonicity():
    """Closer to the reference and farther from peers both score higher."""
    near = Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.1)
    far = Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.5)
    assert score_placement(near) > score_placement(far)
    cramped = Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.5, placed_distances=(("a", 0.4),))
    roomy = Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.5, placed_distances=(("a", 0.9),))
    assert score_placement(roomy) > score_placement(cramped)
    clamped = Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.001)
    assert score_placement(clamped) == score_placement(Candidate((0, 0), 0.0, DUMMY_BOX, delta_cur=0.01))


def test_argmax_invariant_under_uniform_weight_scaling():
    """Scaling every term of the score by one factor never changes the winner."""
    rng = np.random.default_rng(17)
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        cands = [
            Candidate(
                (0.0, 0.0),
                0.0,
                DUMMY_BOX,
                delta_cur=float(rng.uniform(0.0, 3.0)),
                placed_distances=tuple((key, float(rng.uniform(0.0, 4.0))) for key in "abc"[: int(rng.integers(0, 4))]),
                rotation_hits=int(rng.integers(0, 3)),
                relation_hits=int(rng.integers(0, 3)),
            )
            for _ in range(n)
        ]
        base = ScoringWeights(
            w_loc=float(rng.uniform(0.1, 2)),
            w_rotation=float(rng.uniform(0, 6)),
            w_relation=float(rng.uniform(0, 2)),
            object_weights={"a": float(rng.uniform(0.5, 2)), "b": 1.0, "c": float(rng.uniform(0.5, 2))},
        )
        k = float(rng.uniform(0.1, 10.0))
        outer = ScoringWeights(
            w_loc=base.w_loc * k,
            w_rotation=base.w_rotation * k,
            w_relation=base.w_relation * k,
            object_weights=base.object_weights,
        )
        inner = ScoringWeights(
            w_loc=base.w_loc,
            w_rotation=base.w_rotation * k,
            w_relation=base.w_relation * k,
            w_cur=base.w_cur * k,
            c=base.c * k,
            object_weights={key: v * k for key, v in base.object_weights.items()},
        )
        winner = int(np.argmax([score_placement(c, base) for c in cands]))
        assert int(np.argmax([score_placement(c, outer) for c in cands])) == winner
        assert int(np.argmax([score_placement(c, inner) for c in cands])) == winner


def test_weights_validation():
    """Negative term weights and non-positive constants are rejected."""
    with pytest.raises(ValueError):
        ScoringWeights(w_loc=-1.0)
    with pytest.raises(ValueError):
        ScoringWeights(c=0.0)
    with pytest.raises(ValueError):
        ScoringWeights(delta_floor=0.0)


def test_edge_constrained_candidates_hug_walls():
    """Every candidate of an Edge object is within 0.30 m of a wall."""
    room = sx.Room(extent=(4.0, 4.0))
    cs, items = layout_for([Aabb3((0.05, 1.5, 0.0), (2.05, 2.4, 0.85))], room, ["sofa"])
    cands = enumerate_candidates(items[0], cs, sx.SceneState(room=room))
    assert cands
    for cand in cands:
        assert min(room.wall_distances(cand.bbox)) < 0.30
        assert cand.bbox.dims[0] >= cand.bbox.dims[1]
    scores = [score_placement(c) for c in cands]
    assert all(a >= b - 1e-9 for a, b in zip(scores, scores[1:]))
    assert cands[0].delta_cur == min(c.delta_cur for c in cands)


def test_middle_candidates_form_centered_grid():
    """A Middle object alone gets a grid symmetric about the room center."""
    room = sx.Room(extent=(4.0, 4.0))
    cs, items = layout_for([Aabb3((1.5, 1.5, 0.0), (2.5, 2.5, 0.5))], room, ["rug"])
    cands = enumerate_candidates(items[0], cs, sx.SceneState(room=room))
    xs = sorted({c.position[0] for c in cands})
    ys = sorted({c.position[1] for c in cands})
    assert xs == ys
    assert xs == pytest.approx([round(1.3 + 0.1 * k, 9) for k in range(15)])
    assert cands[0].position == (2.0, 2.0)


def test_oversized_object_has_no_candidates():
    """An object larger than the room cannot be placed and is skipped."""
    room = sx.Room(extent=(4.0, 4.0))
    cs, items = layout_for([Aabb3((0.0, 0.0, 0.0), (3.9, 3.9, 0.5))], room, ["stage"])
    big = LayoutItem(items[0].id, items[0].spec, "box", (5.0, 5.0, 0.5))
    assert enumerate_candidates(big, cs, sx.SceneState(room=room)) == []
    solution = sx.dfs_place([big], cs, sx.SceneState(room=room))
    assert solution.skipped == (big.id,)
    assert solution.instances == ()


def test_single_feasible_position():
    """A snug room leaves one position; the yaw tie goes to zero."""
    room = sx.Room(extent=(1.0, 0.6))
    cs, items = layout_for([Aabb3((0.0, 0.0, 0.0), (1.0, 0.6, 0.5))], room, ["bed"])
    cands = enumerate_candidates(items[0], cs, sx.SceneState(room=room))
    assert {c.position for c in cands} == {(0.5, 0.3)}
    solution = sx.dfs_place(items, cs, sx.SceneState(room=room))
    assert solution.instances[0].position == (0.5, 0.3, 0.0)
    assert solution.instances[0].yaw == 0.0


def exhaustive_instances(count, seed, max_candidates=50):
    """Small random problems of 2-3 objects whose candidate lists fit within ``max_candidates``."""
    rng = np.random.default_rng(seed)
    room = sx.Room(extent=(2.0, 1.5))
    scene = sx.SceneState(room=room)
    out = []
    while len(out) < count:
        boxes = random_boxes(rng, int(rng.integers(2, 4)), cells=2, side=1.5)
        cs, items = layout_for(boxes, room)
        widest = max(len(enumerate_candidates(it, cs, scene, 0.5)) for it in items)
        if 0 < widest <= max_candidates:
            out.append((cs, items, scene, widest))
    return out


def test_dfs_matches_exhaustive_search():
    """With branch covering every candidate list the default budget still finds the optimum."""
    ratios = []
    for cs, items, scene, widest in exhaustive_instances(50, seed=0):
        n, total = exhaustive(items, cs, scene, 0.5)
        solution = sx.dfs_place(items, cs, scene, branch=widest, grid_step=0.5)
        assert len(solution.instances) == n
        assert solution.total_score == pytest.approx(total, rel=1e-9, abs=1e-9)
        assert solution.pruned == 0
        tight = sx.dfs_place(items, cs, scene, branch=widest, grid_step=0.5, max_nodes=1)
        assert tight.instances == solution.instances

        greedy = sx.dfs_place(items, cs, scene, grid_step=0.5)
        if len(greedy.instances) == n and total > 0:
            ratios.append(greedy.total_score / total)
    assert ratios and max(ratios) <= 1.0 + 1e-9
    logging.getLogger(__name__).info("branch=3 mean score ratio %.4f over %d instances", np.mean(ratios), len(ratios))


def test_random_layouts_are_valid():
    """Random rooms of 5-15 objects place without collisions, each within two seconds."""
    rng = np.random.default_rng(7)
    room = sx.Room(extent=(5.0, 5.0), openings=(Opening(wall=0, offset=0.2, width=0.9, height=2.0),))
    for _ in range(100):
        cs, items = layout_for(random_boxes(rng, int(rng.integers(5, 16))), room)
        started = time.perf_counter()
        solution = sx.dfs_place(items, cs, sx.SceneState(room=room))
        assert time.perf_counter() - started < 2.0
        assert len(solution.instances) + len(solution.skipped) == len(items)
        placed = solution.instances
        for k, a in enumerate(placed):
            box = a.world_bbox
            assert box.min[0] >= -1e-9 and box.min[1] >= -1e-9
            assert box.max[0] <= 5.0 + 1e-9 and box.max[1] <= 5.0 + 1e-9
            for b in placed[k + 1:]:
                assert not boxes_overlap(box, b.world_bbox)



def test_search_is_deterministic_and_budgeted():
    """Repeated runs agree; the node budget prunes siblings."""
    rng = np.random.default_rng(2)
    room = sx.Room(extent=(5.0, 5.0))
    cs, items = layout_for(random_boxes(rng, 6), room)
    first = sx.dfs_place(items, cs, sx.SceneState(room=room), max_nodes=20)
    second = sx.dfs_place(items, cs, sx.SceneState(room=room), max_nodes=20)
    assert first.instances == second.instances
    assert first.nodes_expanded <= 20 + len(items)
    assert first.pruned > 0
    assert len(first.instances) + len(first.skipped) == len(items)

    with pytest.raises(ValueError):
        sx.dfs_place(items, cs, sx.SceneState(room=room), branch=0)


def wall_scene(openings=()):
    room = sx.Room(extent=(4.0, 4.0), openings=openings)
    cabinet = make_instance("cabinet_000", ObjectSpec("cabinet"), "box", (1.0, 0.45, 0.8), (1.5, 0.225, 0.0))
    return sx.SceneState(room=room, instances=(cabinet,))


def test_tv_lands_above_cabinet():
    """A TV with Above(cabinet) stays within the cabinet's span, at its height."""
    scene = wall_scene()
    cabinet = scene.instances[0]
    tv_spec = ObjectSpec("tv", category=ObjectCategory.WALL)
    cs = derive_wall_constraints(
        [(tv_spec, Aabb3((1.3, 0.0, 1.2), (2.1, 0.08, 1.7)))],
        [(cabinet.id, cabinet.world_bbox)],
        scene.room,
        ids=["tv_000"],
    )
    item = LayoutItem("tv_000", tv_spec, "tv", (0.8, 0.08, 0.5))
    solution = place_wall_objects([item], cs, scene)
    tv = solution.instances[0]
    assert 1.0 <= tv.position[0] <= 2.0
    assert tv.position[0] == pytest.approx(1.7)
    assert tv.world_bbox.center[2] == pytest.approx(1.45)
    assert tv.yaw == 0.0
    for cand in enumerate_candidates(item, cs, scene):
        assert 1.0 - 1e-6 <= cand.position[0] <= 2.0 + 1e-6


def test_painting_avoids_window():
    """Window slots are filtered; between equally near slots the one farther from the cabinet wins."""
    window = Opening(wall=1, offset=2.0, width=1.0, height=1.2, bottom=0.9, kind="window")
    scene = wall_scene((window,))
    spec = ObjectSpec("painting", category=ObjectCategory.WALL)
    cs = derive_wall_constraints(
        [(spec, Aabb3((3.95, 2.0, 1.2), (4.0, 3.0, 1.8)))], [], scene.room, ids=["painting_000"]
    )
    item = LayoutItem("painting_000", spec, "art", (1.0, 0.05, 0.6))
    cands = enumerate_candidates(item, cs, scene)
    assert cands
    for cand in cands:
        assert cand.bbox.max[1] <= 2.0 + 1e-9 or cand.bbox.min[1] >= 3.0 - 1e-9
    painting = place_wall_objects([item], cs, scene).instances[0]
    assert painting.position[:2] == pytest.approx((3.975, 3.5))
    assert painting.yaw == pytest.approx(math.pi / 2)


def test_painting_on_empty_wall_sits_at_reference():
    """Without obstacles a wall object lands on its location reference."""
    scene = wall_scene()
    spec = ObjectSpec("painting", category=ObjectCategory.WALL)
    cs = derive_wall_constraints(
        [(spec, Aabb3((3.95, 2.0, 1.2), (4.0, 3.0, 1.8)))], [], scene.room, ids=["painting_000"]
    )
    item = LayoutItem("painting_000", spec, "art", (1.0, 0.05, 0.6))
    painting = place_wall_objects([item], cs, scene).instances[0]
    assert painting.position[:2] == pytest.approx((3.975, 2.5))
    with pytest.raises(ValueError):
        place_wall_objects([LayoutItem("chair_000", ObjectSpec("chair"), "c", (0.5, 0.5, 0.9))], cs, scene)


def test_small_object_scale_examples():
    """Only the two axes across the view direction set the scale."""
    assert small_object_scale((0.2, 0.5, 0.3), (0.1, 0.1, 0.15), (0, 1, 0)) == 2.0
    assert small_object_scale((0.2, 9.0, 0.3), (0.1, 0.1, 0.15), (0, -1, 0)) == 2.0
    assert small_object_scale((0.1, 0.1, 0.15), (0.1, 0.1, 0.15), (0.3, 0.9, -0.2)) == 1.0
    with pytest.raises(ValueError):
        small_object_scale((0.1, 0.1, 0.1), (0.1, 0.1, 0.1), (0, 0, 0))


def test_small_object_rests_on_support():
    """A floating detection is snapped down onto the table top."""
    table = make_instance("table_000", ObjectSpec("table"), "box", (1.2, 0.8, 0.75), (2.0, 2.0, 0.0))
    cup_spec = ObjectSpec("cup", category=ObjectCategory.SMALL)
    target = Aabb3((1.9, 1.95, 0.8), (2.1, 2.05, 0.95))
    cup = place_small_object(target, (0.1, 0.1, 0.15), (0, 1, 0), table, cup_spec, "cup_000", "mug")
    assert cup.support_id == "table_000"
    assert abs(cup.world_bbox.min[2] - 0.75) <= 1e-3
    assert cup.position[:2] == pytest.approx((2.0, 2.0))
    assert cup.scale[0] == pytest.approx(math.sqrt(2.0))

    with pytest.raises(OversizeError):
        place_small_object(Aabb3((1.0, 1.9, 0.8), (3.0, 2.1, 1.8)), (0.1, 0.1, 0.1), (0, 1, 0), table, cup_spec, "x")


def test_small_object_yaw_follows_long_axis():
    """A long asset turns a quarter when the detection is long along y."""
    table = make_instance("table_000", ObjectSpec("table"), "box", (1.2, 1.2, 0.75), (2.0, 2.0, 0.0))
    spec = ObjectSpec("book", category=ObjectCategory.SMALL)
    book = place_small_object(
        Aabb3((1.95, 1.85, 0.75), (2.05, 2.15, 0.8)), (0.3, 0.1, 0.05), (1, 0, 0), table, spec, "book_000"
    )
    assert book.yaw == pytest.approx(math.pi / 2)
    assert book.world_bbox.dims[1] > book.world_bbox.dims[0]


def test_support_surface_tiers():
    """Shelf interiors snap to tiers below the detection; tops snap to the top."""
    shelf = make_instance("shelf_000", ObjectSpec("shelf"), "box", (1.0, 0.4, 1.8), (1.0, 3.0, 0.0))
    assert support_surface(shelf, Aabb3((0.8, 2.9, 0.72), (0.9, 3.0, 0.9))) == pytest.approx(0.7)
    assert support_surface(shelf, Aabb3((0.8, 2.9, 1.78), (0.9, 3.0, 1.9))) == pytest.approx(1.8)
    assert support_surface(shelf, Aabb3((0.8, 2.9, 0.02), (0.9, 3.0, 0.2))) == pytest.approx(0.0)
