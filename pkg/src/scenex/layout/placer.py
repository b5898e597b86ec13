"""Discrete layout search.

Every object is tried at grid positions and a handful of yaws. Candidates
breaking a hard constraint, leaving the room or colliding with something
already placed are dropped; the rest are scored and a greedy depth-first
search keeps the ``branch`` best at every depth.

Score of a candidate::

    w_loc * (sum_i w_i * d_i + w_cur / max(d_cur, delta_floor) + c)
        + w_rotation * (satisfied FaceTo count)
        + w_relation * (satisfied relation count)

where ``d_cur`` is the distance to the object's own location reference and
``d_i`` the distances to every object already placed.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from scenex.core.errors import OversizeError
from scenex.core.geometry import Aabb3, Vec3
from scenex.core.scene import (
    TWO_PI,
    WALL_NORMALS,
    WALL_YAWS,
    ObjectCategory,
    ObjectInstance,
    ObjectSpec,
    Room,
    SceneState,
    make_instance,
    q3,
    rotated_half_extents,
)
from scenex.layout.constraints import (
    RELATION_KINDS,
    Constraint,
    ConstraintKind,
    ConstraintSet,
    ConstraintThresholds,
    along_wall_span,
    hard_satisfied,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID_STEP = 0.1
DEFAULT_BRANCH = 3
DEFAULT_MAX_NODES = 200
DEFAULT_OVERSIZE_TOL = 0.2
DEFAULT_SHELF_SPACING = 0.35
TOP_SURFACE_TOL = 0.05
CANONICAL_YAWS = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)
# boxes must interpenetrate by more than this to count as colliding
OVERLAP_TOL = 1e-9
_YAW_TOL = 1e-6


@dataclass(frozen=True)
class ScoringWeights:
    w_loc: float = 1.0
    w_rotation: float = 5.0
    w_cur: float = 1.0
    c: float = 1.0
    delta_floor: float = 0.01
    w_relation: float = 1.0
    object_weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.w_loc < 0 or self.w_rotation < 0 or self.w_relation < 0:
            raise ValueError(
                f"term weights must be non-negative, got w_loc={self.w_loc}, "
                f"w_rotation={self.w_rotation}, w_relation={self.w_relation}"
            )
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.delta_floor > 0:
            raise ValueError(f"delta_floor must be positive, got {self.delta_floor}")

    def weight_of(self, instance_id: str) -> float:
        return float(self.object_weights.get(instance_id, 1.0))


@dataclass(frozen=True)
class LayoutItem:
    """An object waiting to be placed, with its chosen asset."""

    id: str
    spec: ObjectSpec
    asset_id: str
    asset_dims: Vec3
    scale: Vec3 = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "asset_dims", q3(self.asset_dims))
        object.__setattr__(self, "scale", q3(self.scale))
        if min(self.asset_dims) <= 0 or min(self.scale) <= 0:
            raise ValueError(f"{self.id}: asset dims and scale must be positive")

    @property
    def dims(self) -> Vec3:
        return tuple(d * s for d, s in zip(self.asset_dims, self.scale))


@dataclass(frozen=True)
class Candidate:
    position: Tuple[float, float]
    yaw: float
    bbox: Aabb3
    base_z: float = 0.0
    delta_cur: float = 0.0
    placed_distances: Tuple[Tuple[str, float], ...] = ()
    rotation_hits: int = 0
    relation_hits: int = 0


@dataclass(frozen=True)
class PlacementSolution:
    instances: Tuple[ObjectInstance, ...] = ()
    chosen: Mapping[str, Candidate] = field(default_factory=dict)
    scores: Mapping[str, float] = field(default_factory=dict)
    total_score: float = 0.0
    nodes_expanded: int = 0
    pruned: int = 0
    skipped: Tuple[str, ...] = ()


def _score(sum_dw, delta_cur, rot_hits, rel_hits, weights: ScoringWeights):
    return (
        weights.w_loc
        * (sum_dw + weights.w_cur / np.maximum(delta_cur, weights.delta_floor) + weights.c)
        + weights.w_rotation * rot_hits
        + weights.w_relation * rel_hits
    )


def score_placement(candidate: Candidate, weights: ScoringWeights = ScoringWeights()) -> float:
    """
    Soft score of one candidate; higher is better.

    Examples:
        >>> score_placement(Candidate((2.0, 2.0), 0.0, box, delta_cur=0.0))
        101.0
    """
    sum_dw = sum(weights.weight_of(pid) * d for pid, d in candidate.placed_distances)
    return float(
        _score(sum_dw, candidate.delta_cur, candidate.rotation_hits, candidate.relation_hits, weights)
    )


# ---------------------------------------------------------------------------
# candidate tables
# ---------------------------------------------------------------------------


@dataclass
class _Table:
    """Surviving candidates of one object as parallel arrays."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    yaw: np.ndarray
    delta_cur: np.ndarray
    rot: np.ndarray
    rel: np.ndarray
    score: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    def ranked(self) -> np.ndarray:
        """Indices by score descending, ties by (x, y, yaw)."""
        return np.lexsort((self.yaw, self.y, self.x, -self.score))


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + np.arange(n + 1) * step, 9)


def _norm_yaw(yaw: np.ndarray) -> np.ndarray:
    out = np.round(np.mod(yaw, TWO_PI), 9)
    return np.where(out >= round(TWO_PI, 9), 0.0, out) + 0.0


def _rot_abs(yaw: np.ndarray):
    c, s = np.abs(np.cos(yaw)), np.abs(np.sin(yaw))
    c = np.where(c < 1e-12, 0.0, np.where(c > 1.0 - 1e-12, 1.0, c))
    s = np.where(s < 1e-12, 0.0, np.where(s > 1.0 - 1e-12, 1.0, s))
    return c, s


def _boxes(x, y, z, yaw, dims):
    c, s = _rot_abs(yaw)
    hx = c * dims[0] / 2.0 + s * dims[1] / 2.0
    hy = s * dims[0] / 2.0 + c * dims[1] / 2.0
    lo = np.round(np.stack([x - hx, y - hy, z], axis=1), 9)
    hi = np.round(np.stack([x + hx, y + hy, z + dims[2]], axis=1), 9)
    return lo, hi


def _collides(lo: np.ndarray, hi: np.ndarray, obstacles: Sequence[Aabb3]) -> np.ndarray:
    hit = np.zeros(len(lo), dtype=bool)
    for box in obstacles:
        bmin, bmax = np.asarray(box.min), np.asarray(box.max)
        hit |= np.all((lo < bmax - OVERLAP_TOL) & (bmin < hi - OVERLAP_TOL), axis=1)
    return hit


def _wall_gaps(lo: np.ndarray, hi: np.ndarray, room: Room) -> np.ndarray:
    x0, y0, x1, y1 = room.bounds
    return np.stack([lo[:, 1] - y0, x1 - hi[:, 0], y1 - hi[:, 1], lo[:, 0] - x0], axis=1)


def _global_mask(
    kind: ConstraintKind, lo: np.ndarray, hi: np.ndarray, room: Room, th: ConstraintThresholds
) -> np.ndarray:
    gaps = _wall_gaps(lo, hi, room)
    fx, fy = hi[:, 0] - lo[:, 0], hi[:, 1] - lo[:, 1]
    if kind is ConstraintKind.EDGE:
        return np.any(gaps < th.edge_eps, axis=1)
    if kind is ConstraintKind.CORNER:
        near = gaps < th.edge_eps
        return np.any(near & np.roll(near, -1, axis=1), axis=1)
    if kind is ConstraintKind.MIDDLE:
        return np.min(gaps, axis=1) > th.middle_eps
    if kind is ConstraintKind.HORIZONTAL:
        return fx >= fy
    if kind is ConstraintKind.VERTICAL:
        return fy >= fx
    return np.ones(len(lo), dtype=bool)


def _overlap_frac(a0, a1, b0, b1):
    shorter = np.minimum(a1 - a0, b1 - b0)
    inter = np.maximum(0.0, np.minimum(a1, b1) - np.maximum(a0, b0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(shorter > 0, inter / np.where(shorter > 0, shorter, 1.0), 0.0)


def _relation_mask(
    constraint: Constraint,
    lo: np.ndarray,
    hi: np.ndarray,
    target: Aabb3,
    th: ConstraintThresholds,
) -> np.ndarray:
    """Vectorized counterpart of ``constraints.soft_satisfied``."""
    txmin, tymin, _ = target.min
    txmax, tymax, _ = target.max
    xmin, ymin, xmax, ymax = lo[:, 0], lo[:, 1], hi[:, 0], hi[:, 1]
    kind = constraint.kind
    if kind in (ConstraintKind.NEAR, ConstraintKind.FAR):
        gx = np.maximum(0.0, np.maximum(xmin, txmin) - np.minimum(xmax, txmax))
        gy = np.maximum(0.0, np.maximum(ymin, tymin) - np.minimum(ymax, tymax))
        gap = np.hypot(gx, gy)
        return gap < th.near_eps if kind is ConstraintKind.NEAR else gap > th.far_eps
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    tcx, tcy = (txmin + txmax) / 2.0, (tymin + tymax) / 2.0
    if kind is ConstraintKind.CENTER_ALIGNED:
        axis = int(constraint.params[0]) if constraint.params else 0
        return np.abs((cx - tcx) if axis == 0 else (cy - tcy)) < th.align_eps
    dx, dy = cx - tcx, cy - tcy
    moved = (dx != 0) | (dy != 0)
    y_dom = np.abs(dy) >= np.abs(dx)
    x_ok = _overlap_frac(xmin, xmax, txmin, txmax) > th.overlap_frac
    y_ok = _overlap_frac(ymin, ymax, tymin, tymax) > th.overlap_frac
    if kind is ConstraintKind.FRONT_OF:
        return moved & y_dom & x_ok & (dy < 0)
    if kind is ConstraintKind.BEHIND:
        return moved & y_dom & x_ok & (dy > 0)
    if kind is ConstraintKind.LEFT_OF:
        return moved & ~y_dom & y_ok & (dx < 0)
    if kind is ConstraintKind.RIGHT_OF:
        return moved & ~y_dom & y_ok & (dx > 0)
    return np.zeros(len(lo), dtype=bool)


def _faces(x, y, yaw, target: Aabb3) -> np.ndarray:
    """Whether the front ray from (x, y) hits the target footprint."""
    fx, fy = -np.sin(yaw), np.cos(yaw)
    t_near = np.full(len(x), -np.inf)
    t_far = np.full(len(x), np.inf)
    for origin, d, lo, hi in ((x, fx, target.min[0], target.max[0]), (y, fy, target.min[1], target.max[1])):
        flat = np.abs(d) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - origin) / np.where(flat, 1.0, d)
            t2 = (hi - origin) / np.where(flat, 1.0, d)
        inside = (origin >= lo) & (origin <= hi)
        t_near = np.maximum(t_near, np.where(flat, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2)))
        t_far = np.minimum(t_far, np.where(flat, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2)))
    return (t_near <= t_far) & (t_far > 0)


def _yaw_matches(yaw: np.ndarray, wanted: float) -> np.ndarray:
    diff = np.abs(np.mod(yaw - wanted + math.pi, TWO_PI) - math.pi)
    return diff < _YAW_TOL


def _distance_terms(x, y, peers: Sequence[ObjectInstance], weights: ScoringWeights):
    total = np.zeros(len(x))
    for peer in peers:
        px, py, _ = peer.world_bbox.center
        total += weights.weight_of(peer.id) * np.hypot(x - px, y - py)
    return total


def _soft_terms(constraints, x, y, yaw, lo, hi, targets, th):
    rot = np.zeros(len(x))
    rel = np.zeros(len(x))
    for c in constraints:
        if c.kind is ConstraintKind.FACE_TO:
            if c.target is None:
                rot += _yaw_matches(yaw, c.params[0])
            elif c.target in targets:
                rot += _faces(x, y, yaw, targets[c.target])
        elif c.kind in RELATION_KINDS and not c.is_hard and c.target in targets:
            rel += _relation_mask(c, lo, hi, targets[c.target], th)
    return rot, rel


def _floor_table(
    item: LayoutItem,
    constraints: Sequence[Constraint],
    room: Room,
    placed: Sequence[ObjectInstance],
    grid_step: float,
    th: ConstraintThresholds,
    weights: ScoringWeights,
) -> _Table:
    x0, y0, x1, y1 = room.bounds
    gx, gy = np.meshgrid(_grid(x0, x1, grid_step), _grid(y0, y1, grid_step), indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    targets = {p.id: p.world_bbox for p in placed}

    xs, ys, yaws = [], [], []
    for yaw in CANONICAL_YAWS:
        xs.append(gx)
        ys.append(gy)
        yaws.append(np.full(len(gx), yaw))
    for c in constraints:
        if c.kind is not ConstraintKind.FACE_TO:
            continue
        if c.target is None:
            implied = np.full(len(gx), c.params[0])
        elif c.target in targets:
            tx, ty, _ = targets[c.target].center
            implied = np.mod(np.arctan2(-(tx - gx), ty - gy), TWO_PI)
        else:
            continue
        fresh = ~np.any([_yaw_matches(implied, cy) for cy in CANONICAL_YAWS], axis=0)
        xs.append(gx[fresh])
        ys.append(gy[fresh])
        yaws.append(implied[fresh])
    x, y = np.concatenate(xs), np.concatenate(ys)
    yaw = _norm_yaw(np.concatenate(yaws))
    z = np.zeros(len(x))
    lo, hi = _boxes(x, y, z, yaw, item.dims)

    keep = (
        (lo[:, 0] >= x0 - OVERLAP_TOL)
        & (lo[:, 1] >= y0 - OVERLAP_TOL)
        & (hi[:, 0] <= x1 + OVERLAP_TOL)
        & (hi[:, 1] <= y1 + OVERLAP_TOL)
        & (hi[:, 2] <= room.wall_height + OVERLAP_TOL)
    )
    for c in constraints:
        if c.is_hard:
            keep &= _global_mask(c.kind, lo, hi, room, th)
    obstacles = [p.world_bbox for p in placed] + [room.opening_box(op) for op in room.openings]
    idx = np.flatnonzero(keep)
    idx = idx[~_collides(lo[idx], hi[idx], obstacles)]
    x, y, z, yaw, lo, hi = x[idx], y[idx], z[idx], yaw[idx], lo[idx], hi[idx]

    loc = next(c for c in constraints if c.kind is ConstraintKind.LOCATION)
    delta_cur = np.hypot(x - loc.params[0], y - loc.params[1])
    sum_dw = _distance_terms(x, y, placed, weights)
    rot, rel = _soft_terms(constraints, x, y, yaw, lo, hi, targets, th)
    return _Table(x, y, z, yaw, delta_cur, rot, rel, _score(sum_dw, delta_cur, rot, rel, weights))


def _wall_table(
    item: LayoutItem,
    constraints: Sequence[Constraint],
    room: Room,
    placed: Sequence[ObjectInstance],
    grid_step: float,
    th: ConstraintThresholds,
    weights: ScoringWeights,
) -> _Table:
    loc = next(c for c in constraints if c.kind is ConstraintKind.LOCATION)
    if len(loc.params) != 3:
        raise ValueError(f"wall object {item.id} needs a location on a wall, got {loc.params}")
    height = next((c.params[0] for c in constraints if c.kind is ConstraintKind.HEIGHT), None)
    if height is None:
        raise ValueError(f"wall object {item.id} has no height constraint")
    wall = int(loc.params[2])
    yaw = WALL_YAWS[wall]
    dims = item.dims
    hx, hy = rotated_half_extents(dims, yaw)
    along, across = (hx, hy) if wall in (0, 2) else (hy, hx)
    length = room.wall_length(wall)
    base = height - dims[2] / 2.0

    s = _grid(0.0, length, grid_step)
    s = s[(s - along >= -OVERLAP_TOL) & (s + along <= length + OVERLAP_TOL)]
    if base < -OVERLAP_TOL or base + dims[2] > room.wall_height + OVERLAP_TOL:
        s = s[:0]
    (sx, sy), (ex, ey) = room.wall_segment(wall)
    nx, ny = WALL_NORMALS[wall]
    x = np.round(sx + s / length * (ex - sx) + nx * across, 9)
    y = np.round(sy + s / length * (ey - sy) + ny * across, 9)
    z = np.full(len(s), round(max(base, 0.0), 9))
    yaws = np.full(len(s), round(yaw, 9))
    lo, hi = _boxes(x, y, z, yaws, dims)
    targets = {p.id: p.world_bbox for p in placed}

    keep = np.ones(len(s), dtype=bool)
    for c in constraints:
        if c.kind is ConstraintKind.ABOVE and c.is_hard and c.target in targets:
            t_lo, t_hi = along_wall_span(room, wall, targets[c.target])
            keep &= (s >= t_lo - 1e-6) & (s <= t_hi + 1e-6)
            keep &= lo[:, 2] >= targets[c.target].max[2] - 1e-6
        elif c.is_hard and c.kind not in (ConstraintKind.HEIGHT, ConstraintKind.ABOVE):
            keep &= _global_mask(c.kind, lo, hi, room, th)
    obstacles = [p.world_bbox for p in placed] + [room.opening_box(op) for op in room.openings]
    keep &= ~_collides(lo, hi, obstacles)
    idx = np.flatnonzero(keep)
    s, x, y, z, yaws, lo, hi = s[idx], x[idx], y[idx], z[idx], yaws[idx], lo[idx], hi[idx]

    s_ref = room.wall_offset(wall, loc.params[0], loc.params[1])
    delta_cur = np.abs(s - s_ref)
    sum_dw = _distance_terms(x, y, placed, weights)
    _, rel = _soft_terms(constraints, x, y, yaws, lo, hi, targets, th)
    rot = np.zeros(len(s))
    return _Table(x, y, z, yaws, delta_cur, rot, rel, _score(sum_dw, delta_cur, rot, rel, weights))


def _table_for(item, constraints, room, placed, grid_step, th, weights) -> _Table:
    builder = _wall_table if item.spec.category == ObjectCategory.WALL else _floor_table
    return builder(item, constraints, room, placed, grid_step, th, weights)


def _materialize(
    item: LayoutItem, table: _Table, k: int, placed: Sequence[ObjectInstance]
) -> Tuple[ObjectInstance, Candidate]:
    inst = make_instance(
        item.id,
        item.spec,
        item.asset_id,
        item.asset_dims,
        (table.x[k], table.y[k], table.z[k]),
        float(table.yaw[k]),
        item.scale,
    )
    cx, cy = float(table.x[k]), float(table.y[k])
    distances = tuple(
        (p.id, math.hypot(cx - p.world_bbox.center[0], cy - p.world_bbox.center[1])) for p in placed
    )
    cand = Candidate(
        position=(inst.position[0], inst.position[1]),
        yaw=inst.yaw,
        bbox=inst.world_bbox,
        base_z=inst.position[2],
        delta_cur=float(table.delta_cur[k]),
        placed_distances=distances,
        rotation_hits=int(table.rot[k]),
        relation_hits=int(table.rel[k]),
    )
    return inst, cand


def enumerate_candidates(
    item: LayoutItem,
    constraints: ConstraintSet,
    scene: SceneState,
    grid_step: float = DEFAULT_GRID_STEP,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    weights: ScoringWeights = ScoringWeights(),
    placed: Sequence[ObjectInstance] = (),
) -> List[Candidate]:
    """
    All feasible candidates of one object, best first.

    Args:
        item: Object to place; wall objects are enumerated along their wall
        constraints: Constraint set holding the object's constraints
        scene: Scene whose instances are obstacles
        grid_step: Position spacing in meters
        thresholds: Hard-constraint thresholds
        weights: Scoring weights
        placed: Extra instances placed in the current search branch

    Returns:
        Candidates sorted by score descending, ties by (x, y, yaw). Empty when
        the object cannot be placed.
    """
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    everything = list(scene.instances) + list(placed)
    table = _table_for(item, constraints.of(item.id), scene.room, everything, grid_step, thresholds, weights)
    return [_materialize(item, table, int(k), everything)[1] for k in table.ranked()]


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def _search(
    items: Sequence[LayoutItem],
    constraints: ConstraintSet,
    scene: SceneState,
    weights: ScoringWeights,
    branch: Optional[int],
    grid_step: float,
    thresholds: ConstraintThresholds,
    max_nodes: Optional[int],
    trace: bool,
) -> PlacementSolution:
    if branch is not None and branch < 1:
        raise ValueError(f"branch must be at least 1, got {branch}")
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    missing = [it.id for it in items if it.id not in constraints.constraints]
    if missing:
        raise ValueError(f"no constraints for {missing}")

    base = list(scene.instances)
    stats = {"nodes": 0, "pruned": 0}
    best: Dict[str, object] = {"key": None}

    def visit(depth, assigned, chosen, scores, total, skipped):
        if depth == len(items):
            key = (len(assigned), total)
            if best["key"] is None or key > best["key"]:
                best.update(
                    key=key,
                    instances=tuple(assigned),
                    chosen=dict(chosen),
                    scores=dict(scores),
                    total=total,
                    skipped=tuple(skipped),
                )
            return
        item = items[depth]
        placed = base + assigned
        table = _table_for(
            item, constraints.of(item.id), scene.room, placed, grid_step, thresholds, weights
        )
        if len(table) == 0:
            logger.debug("depth %d: no feasible candidate for %s", depth, item.id)
            visit(depth + 1, assigned, chosen, scores, total, skipped + [item.id])
            return
        ranked = table.ranked()
        top = ranked if branch is None else ranked[:branch]
        # the budget only bounds levels that branching already truncates
        budgeted = max_nodes is not None and len(top) < len(ranked)
        for rank, k in enumerate(top):
            if rank > 0 and budgeted and stats["nodes"] >= max_nodes:
                stats["pruned"] += len(top) - rank
                break
            stats["nodes"] += 1
            inst, cand = _materialize(item, table, int(k), placed)
            score = float(table.score[k])
            if trace:
                logger.debug(
                    "depth %d %s at (%.2f, %.2f) yaw %.3f score %.4f",
                    depth, item.id, cand.position[0], cand.position[1], cand.yaw, score,
                )
            visit(
                depth + 1,
                assigned + [inst],
                {**chosen, item.id: cand},
                {**scores, item.id: score},
                total + score,
                skipped,
            )

    visit(0, [], {}, {}, 0.0, [])
    solution = PlacementSolution(
        instances=best["instances"],
        chosen=best["chosen"],
        scores=best["scores"],
        total_score=best["total"],
        nodes_expanded=stats["nodes"],
        pruned=stats["pruned"],
        skipped=best["skipped"],
    )
    for sid in solution.skipped:
        logger.warning("could not place %s: no feasible candidate", sid)
    return solution


def dfs_place(
    items: Sequence[LayoutItem],
    constraints: ConstraintSet,
    scene: SceneState,
    weights: ScoringWeights = ScoringWeights(),
    branch: Optional[int] = DEFAULT_BRANCH,
    grid_step: float = DEFAULT_GRID_STEP,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    max_nodes: Optional[int] = DEFAULT_MAX_NODES,
    trace: bool = False,
) -> PlacementSolution:
    """
    Place floor objects by greedy depth-first search.

    At every depth only the ``branch`` best candidates are expanded. Once
    ``max_nodes`` nodes have been expanded, later siblings are pruned at
    every depth where ``branch`` cut the candidate list, so the search always
    completes. Depths whose candidates all fit within ``branch`` are searched
    in full, which makes ``branch`` at least the candidate count exhaustive.
    Objects with no feasible candidate are skipped.

    Args:
        items: Objects in placement order
        constraints: Their constraint set
        scene: Scene whose instances stay where they are
        weights: Scoring weights
        branch: Children expanded per node; None expands all
        grid_step: Position spacing in meters
        thresholds: Hard-constraint thresholds
        max_nodes: Expansion budget for truncated depths; None for unlimited
        trace: Log one debug line per expanded node

    Returns:
        PlacementSolution with the highest total score among complete branches
    """
    return _search(items, constraints, scene, weights, branch, grid_step, thresholds, max_nodes, trace)


def place_wall_objects(
    items: Sequence[LayoutItem],
    constraints: ConstraintSet,
    scene: SceneState,
    weights: ScoringWeights = ScoringWeights(),
    branch: Optional[int] = DEFAULT_BRANCH,
    grid_step: float = DEFAULT_GRID_STEP,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    max_nodes: Optional[int] = DEFAULT_MAX_NODES,
    trace: bool = False,
) -> PlacementSolution:
    """
    Place wall objects along their walls at their constrained heights.

    Each object keeps to the wall named by its location, faces away from it
    and avoids doors, windows and every placed instance.
    """
    for item in items:
        if item.spec.category != ObjectCategory.WALL:
            raise ValueError(f"{item.id} is a {item.spec.category.value}, not a wall object")
    return _search(items, constraints, scene, weights, branch, grid_step, thresholds, max_nodes, trace)


# ---------------------------------------------------------------------------
# small objects
# ---------------------------------------------------------------------------


def support_surface(
    support: ObjectInstance, target_bbox: Aabb3, shelf_spacing: float = DEFAULT_SHELF_SPACING
) -> float:
    """
    Height of the surface an object detected at ``target_bbox`` rests on.

    A target whose bottom reaches the support's top face sits on top;
    otherwise it sits on the highest shelf tier at or below its bottom,
    tiers being ``shelf_spacing`` apart from the support's base.
    """
    top = support.world_bbox.max[2]
    if target_bbox.min[2] >= top - TOP_SURFACE_TOL:
        return top
    bottom = support.world_bbox.min[2]
    n = int(math.floor((target_bbox.min[2] - bottom + TOP_SURFACE_TOL) / shelf_spacing))
    n = max(0, n)
    tier = bottom + n * shelf_spacing
    while tier >= top and n > 0:
        n -= 1
        tier = bottom + n * shelf_spacing
    return tier


def small_object_scale(
    target_dims: Sequence[float], asset_dims: Sequence[float], view_dir: Sequence[float]
) -> float:
    """
    Uniform scale matching the asset to the two target dimensions most
    perpendicular to the viewing direction (geometric mean of the ratios).

    Both dims are in world axes. The axis with the largest ``|view_dir|``
    component is ignored; the lowest such axis on ties.

    Examples:
        >>> small_object_scale((0.2, 0.5, 0.3), (0.1, 0.1, 0.15), (0, 1, 0))
        2.0
    """
    v = np.abs(np.asarray(view_dir, dtype=float)[:3])
    if not np.any(v > 0):
        raise ValueError("view_dir must be non-zero")
    dropped = int(np.argmax(v))
    kept = [k for k in range(3) if k != dropped]
    ratios = [float(target_dims[k]) / float(asset_dims[k]) for k in kept]
    if min(ratios) <= 0:
        raise ValueError(f"target dims must be positive along kept axes, got {target_dims}")
    return math.sqrt(ratios[0] * ratios[1])


def place_small_object(
    target_bbox: Aabb3,
    asset_dims: Sequence[float],
    view_dir: Sequence[float],
    support: ObjectInstance,
    spec: ObjectSpec,
    instance_id: str,
    asset_id: str = "",
    oversize_tol: float = DEFAULT_OVERSIZE_TOL,
    shelf_spacing: float = DEFAULT_SHELF_SPACING,
) -> ObjectInstance:
    """
    Fit an asset to a lifted small-object box and rest it on its support.

    Args:
        target_bbox: Lifted box of the detection
        asset_dims: Asset bbox (width, depth, height) in its local frame
        view_dir: Camera forward vector the detection was seen along
        support: Receptacle the object rests on
        spec: Object spec
        instance_id: Id of the new instance
        asset_id: Chosen asset
        oversize_tol: Allowed overhang of the scaled footprint over the support
        shelf_spacing: Tier spacing inside shelves and cabinets

    Returns:
        ObjectInstance centered on the target footprint, base on the support

    Raises:
        OversizeError: the scaled footprint exceeds the support by more than
            ``oversize_tol``.
    """
    w, d, h = (float(v) for v in asset_dims)
    tx, ty, _ = target_bbox.dims
    long_local_x = w >= d
    yaw = 0.0 if (tx >= ty) == long_local_x else math.pi / 2.0
    world_dims = (w, d, h) if yaw == 0.0 else (d, w, h)
    scale = small_object_scale(target_bbox.dims, world_dims, view_dir)

    sdx, sdy, _ = support.world_bbox.dims
    fx, fy = world_dims[0] * scale, world_dims[1] * scale
    limit = 1.0 + oversize_tol
    if fx > limit * sdx or fy > limit * sdy:
        raise OversizeError(
            f"{instance_id}: scaled footprint {fx:.2f} x {fy:.2f} m exceeds support "
            f"{support.id} ({sdx:.2f} x {sdy:.2f} m) by more than {oversize_tol:.0%}"
        )
    cx, cy, _ = target_bbox.center
    z = support_surface(support, target_bbox, shelf_spacing)
    return make_instance(
        instance_id,
        spec,
        asset_id,
        (w, d, h),
        (cx, cy, z),
        yaw,
        (scale, scale, scale),
        support_id=support.id,
    )


def check_hard_constraints(
    instance: ObjectInstance,
    constraints: Sequence[Constraint],
    room: Room,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    targets: Mapping[str, Aabb3] = {},
) -> List[str]:
    """Descriptions of the hard constraints ``instance`` breaks."""
    problems = []
    for c in constraints:
        if c.is_hard and not hard_satisfied(c, instance.world_bbox, room, thresholds, targets):
            where = f" {c.target}" if c.target else ""
            problems.append(f"{instance.id}: hard {c.kind.value}{where} violated")
    return problems


