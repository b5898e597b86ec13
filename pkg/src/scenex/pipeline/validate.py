"""Post-run scene checks, recomputed from instance poses rather than trusted from the placer."""

import itertools
import math
from typing import List, Sequence

from scenex.core.geometry import Aabb3
from scenex.core.scene import ObjectCategory, SceneState, world_bbox_of
from scenex.layout.constraints import ConstraintSet, ConstraintThresholds
from scenex.layout.placer import check_hard_constraints

BBOX_TOL = 1e-9
SUPPORT_TOL = 1e-3


def _overlap(a: Aabb3, b: Aabb3, tol: float = BBOX_TOL) -> bool:
    return all(a.min[k] < b.max[k] - tol and b.min[k] < a.max[k] - tol for k in range(3))


def _yaw_close(a: float, b: float) -> bool:
    return abs((a - b + math.pi) % (2.0 * math.pi) - math.pi) < 1e-6


def validate_scene(
    scene: SceneState,
    constraint_sets: Sequence[ConstraintSet] = (),
    thresholds: ConstraintThresholds = ConstraintThresholds(),
) -> List[str]:
    """
    Problems found in a scene; an empty list means it is valid.

    Checks unique ids, room containment, bbox consistency with the pose,
    pairwise disjointness of floor and wall objects, wall-object orientation
    and small objects resting within their support. Hard constraints in
    ``constraint_sets`` are re-checked for every instance they name.
    """
    problems = []
    room = scene.room
    x0, y0, x1, y1 = room.bounds

    ids = [inst.id for inst in scene.instances]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        problems.append(f"duplicate id {dup}")

    by_id = {inst.id: inst for inst in scene.instances}
    for inst in scene.instances:
        box = inst.world_bbox
        if (
            box.min[0] < x0 - BBOX_TOL
            or box.min[1] < y0 - BBOX_TOL
            or box.max[0] > x1 + BBOX_TOL
            or box.max[1] > y1 + BBOX_TOL
            or box.min[2] < -BBOX_TOL
            or box.max[2] > room.wall_height + BBOX_TOL
        ):
            problems.append(f"{inst.id} leaves the room: {box.min}..{box.max}")

        expected = world_bbox_of(inst.asset_dims, inst.position, inst.yaw, inst.scale)
        drift = max(
            max(abs(a - b) for a, b in zip(expected.min, box.min)),
            max(abs(a - b) for a, b in zip(expected.max, box.max)),
        )
        if drift > BBOX_TOL:
            problems.append(f"{inst.id} bbox disagrees with its pose by {drift:.3g} m")

        if inst.category == ObjectCategory.WALL:
            gaps = room.wall_distances(box)
            wall = min(range(4), key=lambda w: (abs(gaps[w]), w))
            facing_away = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)[wall]
            if abs(gaps[wall]) > BBOX_TOL:
                problems.append(f"{inst.id} does not touch wall {wall}")
            if not _yaw_close(inst.yaw, facing_away):
                problems.append(f"{inst.id} does not face away from wall {wall}")

        if inst.category == ObjectCategory.SMALL:
            support = by_id.get(inst.support_id) if inst.support_id else None
            if support is None:
                problems.append(f"{inst.id} has no support in the scene")
            else:
                sb = support.world_bbox
                if not (sb.min[2] - SUPPORT_TOL <= box.min[2] <= sb.max[2] + SUPPORT_TOL):
                    problems.append(f"{inst.id} base {box.min[2]:.3f} is off support {support.id}")

    solid = [i for i in scene.instances if i.category != ObjectCategory.SMALL]
    for a, b in itertools.combinations(solid, 2):
        if _overlap(a.world_bbox, b.world_bbox):
            problems.append(f"{a.id} collides with {b.id}")

    targets = {inst.id: inst.world_bbox for inst in scene.instances}
    for cs in constraint_sets:
        for sid in cs.order:
            inst = by_id.get(sid)
            if inst is not None:
                problems.extend(check_hard_constraints(inst, cs.of(sid), room, thresholds, targets))
    return problems
