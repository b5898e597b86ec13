"""Placement constraints derived from lifted bounding boxes.

Floor objects are sorted by footprint size and traversed; each one gets
global constraints from its relation to the walls, relation / distance /
alignment constraints against every object earlier in the order, and a soft
location at its detected footprint center. Wall objects get a location on
their wall, a height and, when something stands beneath them, Above.

Room frame: the front wall is wall 0 (y = y0). "In front of" means toward
the front wall (smaller y) and "left of" means smaller x.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from scenex.core.errors import MisclassificationError, ServiceError
from scenex.core.geometry import Aabb3
from scenex.core.render import Footprint, footprint_of
from scenex.core.scene import WALL_YAWS, ObjectSpec, Room, slugify
from scenex.perception.gateway import SEATING_WORDS, TABLE_WORDS

logger = logging.getLogger(__name__)

DEFAULT_EDGE_EPS = 0.30
DEFAULT_MIDDLE_EPS = 0.75
DEFAULT_NEAR_EPS = 0.50
DEFAULT_FAR_EPS = 2.0
DEFAULT_ALIGN_EPS = 0.10
DEFAULT_OVERLAP_FRAC = 0.5
DEFAULT_WALL_ADJACENT_EPS = 0.2
# how far from its wall a floor object may stand and still count as "beneath"
DEFAULT_BENEATH_EPS = 0.75
HEIGHT_TOL = 1e-6


class ConstraintKind(str, Enum):
    EDGE = "edge"
    MIDDLE = "middle"
    CORNER = "corner"
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    NEAR = "near"
    FAR = "far"
    FRONT_OF = "front_of"
    BEHIND = "behind"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    CENTER_ALIGNED = "center_aligned"
    LOCATION = "location"
    FACE_TO = "face_to"
    ABOVE = "above"
    HEIGHT = "height"


class Hardness(str, Enum):
    HARD = "hard"
    SOFT = "soft"


GLOBAL_KINDS = frozenset(
    {
        ConstraintKind.EDGE,
        ConstraintKind.MIDDLE,
        ConstraintKind.CORNER,
        ConstraintKind.HORIZONTAL,
        ConstraintKind.VERTICAL,
    }
)
RELATION_KINDS = frozenset(
    {
        ConstraintKind.NEAR,
        ConstraintKind.FAR,
        ConstraintKind.FRONT_OF,
        ConstraintKind.BEHIND,
        ConstraintKind.LEFT_OF,
        ConstraintKind.RIGHT_OF,
        ConstraintKind.CENTER_ALIGNED,
    }
)
TARGETED_KINDS = RELATION_KINDS | {ConstraintKind.ABOVE}


@dataclass(frozen=True)
class Constraint:
    """
    One placement condition on ``subject``.

    ``params`` by kind: Location ``(x, y)`` or ``(x, y, wall)``; Height
    ``(h,)``; CenterAligned ``(axis,)`` with 0 for x and 1 for y; Above
    ``(wall,)``; FaceTo with no target carries a fixed ``(yaw,)``.
    """

    kind: ConstraintKind
    subject: str
    hardness: Hardness
    target: Optional[str] = None
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        object.__setattr__(self, "hardness", Hardness(self.hardness))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind in TARGETED_KINDS and self.target is None:
            raise ValueError(f"{self.kind.value} constraint on {self.subject} needs a target")
        if self.target is not None and self.target == self.subject:
            raise ValueError(f"{self.kind.value} constraint on {self.subject} targets itself")
        if self.kind is ConstraintKind.LOCATION and len(self.params) not in (2, 3):
            raise ValueError(f"location needs (x, y) or (x, y, wall), got {self.params}")
        if self.kind is ConstraintKind.HEIGHT and len(self.params) != 1:
            raise ValueError(f"height needs (h,), got {self.params}")
        if self.kind is ConstraintKind.FACE_TO and self.target is None and len(self.params) != 1:
            raise ValueError(f"untargeted face_to needs (yaw,), got {self.params}")

    @property
    def key(self) -> Tuple[ConstraintKind, str, Optional[str]]:
        return (self.kind, self.subject, self.target)

    @property
    def is_hard(self) -> bool:
        return self.hardness is Hardness.HARD


@dataclass(frozen=True)
class ConstraintThresholds:
    edge_eps: float = DEFAULT_EDGE_EPS
    middle_eps: float = DEFAULT_MIDDLE_EPS
    near_eps: float = DEFAULT_NEAR_EPS
    far_eps: float = DEFAULT_FAR_EPS
    align_eps: float = DEFAULT_ALIGN_EPS
    overlap_frac: float = DEFAULT_OVERLAP_FRAC
    wall_adjacent_eps: float = DEFAULT_WALL_ADJACENT_EPS
    beneath_eps: float = DEFAULT_BENEATH_EPS

    def __post_init__(self):
        if not 0 < self.edge_eps < self.middle_eps:
            raise ValueError(
                f"need 0 < edge_eps < middle_eps, got {self.edge_eps} and {self.middle_eps}"
            )
        if not 0 < self.near_eps < self.far_eps:
            raise ValueError(f"need 0 < near_eps < far_eps, got {self.near_eps} and {self.far_eps}")
        if not 0 <= self.overlap_frac <= 1:
            raise ValueError(f"overlap_frac must be in [0, 1], got {self.overlap_frac}")


@dataclass(frozen=True)
class ConstraintSet:
    """Constraints per object plus the order objects are placed in."""

    order: Tuple[str, ...] = ()
    constraints: Mapping[str, Tuple[Constraint, ...]] = field(default_factory=dict)
    demoted: Tuple[str, ...] = ()

    def __post_init__(self):
        order = tuple(self.order)
        if len(set(order)) != len(order):
            raise ValueError(f"placement order repeats ids: {order}")
        table = {sid: tuple(self.constraints.get(sid, ())) for sid in order}
        extra = set(self.constraints) - set(order)
        if extra:
            raise ValueError(f"constraints for ids outside the placement order: {sorted(extra)}")
        rank = {sid: k for k, sid in enumerate(order)}
        for sid, items in table.items():
            keys = [c.key for c in items]
            if len(set(keys)) != len(keys):
                raise ValueError(f"duplicate constraints for {sid}")
            n_loc = sum(c.kind is ConstraintKind.LOCATION for c in items)
            if n_loc != 1:
                raise ValueError(f"{sid} has {n_loc} location constraints, expected 1")
            for c in items:
                if c.subject != sid:
                    raise ValueError(f"constraint on {c.subject} filed under {sid}")
                # targets outside the order are already placed
                if c.target in rank and rank[c.target] >= rank[sid]:
                    raise ValueError(f"{c.kind.value} on {sid} targets later object {c.target}")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "constraints", table)
        object.__setattr__(self, "demoted", tuple(self.demoted))

    def __len__(self) -> int:
        return sum(len(v) for v in self.constraints.values())

    def of(self, subject: str) -> Tuple[Constraint, ...]:
        return self.constraints.get(subject, ())

    def location(self, subject: str) -> Constraint:
        return next(c for c in self.of(subject) if c.kind is ConstraintKind.LOCATION)

    def all(self) -> List[Constraint]:
        return [c for sid in self.order for c in self.constraints[sid]]

    def with_constraints(self, extra: Iterable[Constraint]) -> "ConstraintSet":
        """Add constraints, dropping any whose (kind, subject, target) already exists."""
        table = {sid: list(items) for sid, items in self.constraints.items()}
        for c in extra:
            if c.subject not in table:
                raise KeyError(f"no object {c.subject} in this constraint set")
            if all(existing.key != c.key for existing in table[c.subject]):
                table[c.subject].append(c)
        return ConstraintSet(self.order, {k: tuple(v) for k, v in table.items()}, self.demoted)


# ---------------------------------------------------------------------------
# shared predicates
# ---------------------------------------------------------------------------


def near_walls(room: Room, box: Aabb3, eps: float) -> List[int]:
    """Walls whose gap to the box footprint is below ``eps``."""
    return [w for w, d in enumerate(room.wall_distances(box)) if d < eps]


def is_corner(walls: Sequence[int]) -> bool:
    present = set(walls)
    return any(w in present and (w + 1) % 4 in present for w in range(4))


def nearest_wall(room: Room, box: Aabb3) -> int:
    """Wall with the smallest absolute footprint gap; lower index wins ties."""
    dists = np.abs(np.asarray(room.wall_distances(box)))
    return int(np.argmin(dists))


def _interval_overlap_frac(a0: float, a1: float, b0: float, b1: float) -> float:
    shorter = min(a1 - a0, b1 - b0)
    if shorter <= 0:
        return 0.0
    return max(0.0, min(a1, b1) - max(a0, b0)) / shorter


def direction_of(
    subject: Footprint, target: Footprint, overlap_frac: float
) -> Optional[ConstraintKind]:
    """Directional relation of ``subject`` to ``target``, if any."""
    (sx, sy), (tx, ty) = subject.center, target.center
    dx, dy = sx - tx, sy - ty
    if dx == 0 and dy == 0:
        return None
    if abs(dy) >= abs(dx):
        if _interval_overlap_frac(subject.xmin, subject.xmax, target.xmin, target.xmax) <= overlap_frac:
            return None
        return ConstraintKind.FRONT_OF if dy < 0 else ConstraintKind.BEHIND
    if _interval_overlap_frac(subject.ymin, subject.ymax, target.ymin, target.ymax) <= overlap_frac:
        return None
    return ConstraintKind.LEFT_OF if dx < 0 else ConstraintKind.RIGHT_OF


def aligned_axis(subject: Footprint, target: Footprint, eps: float) -> Optional[int]:
    (sx, sy), (tx, ty) = subject.center, target.center
    if abs(sx - tx) < eps:
        return 0
    if abs(sy - ty) < eps:
        return 1
    return None


def along_wall_span(room: Room, wall: int, box: Aabb3) -> Tuple[float, float]:
    """Interval of wall offsets covered by the box footprint."""
    if wall in (0, 2):
        a, b = room.wall_offset(wall, box.min[0], 0.0), room.wall_offset(wall, box.max[0], 0.0)
    else:
        a, b = room.wall_offset(wall, 0.0, box.min[1]), room.wall_offset(wall, 0.0, box.max[1])
    return min(a, b), max(a, b)


def hard_satisfied(
    constraint: Constraint,
    box: Aabb3,
    room: Room,
    thresholds: ConstraintThresholds,
    targets: Mapping[str, Aabb3] = {},
) -> bool:
    """
    Evaluate one hard constraint against a world box.

    Soft kinds always pass. A targeted kind whose target is not in
    ``targets`` passes, since there is nothing to check against yet.
    """
    if not constraint.is_hard:
        return True
    kind = constraint.kind
    if kind is ConstraintKind.EDGE:
        return bool(near_walls(room, box, thresholds.edge_eps))
    if kind is ConstraintKind.CORNER:
        return is_corner(near_walls(room, box, thresholds.edge_eps))
    if kind is ConstraintKind.MIDDLE:
        return min(room.wall_distances(box)) > thresholds.middle_eps
    if kind is ConstraintKind.HORIZONTAL:
        dx, dy, _ = box.dims
        return dx >= dy
    if kind is ConstraintKind.VERTICAL:
        dx, dy, _ = box.dims
        return dy >= dx
    if kind is ConstraintKind.HEIGHT:
        return abs(box.center[2] - constraint.params[0]) <= HEIGHT_TOL
    if kind is ConstraintKind.ABOVE:
        target = targets.get(constraint.target)
        if target is None:
            return True
        wall = int(constraint.params[0]) if constraint.params else nearest_wall(room, box)
        lo, hi = along_wall_span(room, wall, target)
        own_lo, own_hi = along_wall_span(room, wall, box)
        mid = (own_lo + own_hi) / 2.0
        return lo - HEIGHT_TOL <= mid <= hi + HEIGHT_TOL and box.min[2] >= target.max[2] - HEIGHT_TOL
    return soft_satisfied(constraint, box, thresholds, targets)


def soft_satisfied(
    constraint: Constraint,
    box: Aabb3,
    thresholds: ConstraintThresholds,
    targets: Mapping[str, Aabb3],
) -> bool:
    """Whether a relation, distance or alignment constraint holds."""
    target_box = targets.get(constraint.target) if constraint.target else None
    if target_box is None:
        return False
    own, other = footprint_of(box), footprint_of(target_box)
    kind = constraint.kind
    if kind is ConstraintKind.NEAR:
        return own.gap(other) < thresholds.near_eps
    if kind is ConstraintKind.FAR:
        return own.gap(other) > thresholds.far_eps
    if kind in (
        ConstraintKind.FRONT_OF,
        ConstraintKind.BEHIND,
        ConstraintKind.LEFT_OF,
        ConstraintKind.RIGHT_OF,
    ):
        return direction_of(own, other, thresholds.overlap_frac) is kind
    if kind is ConstraintKind.CENTER_ALIGNED:
        axis = int(constraint.params[0]) if constraint.params else 0
        return abs(own.center[axis] - other.center[axis]) < thresholds.align_eps
    return False


# ---------------------------------------------------------------------------
# derivation
# ---------------------------------------------------------------------------


def placement_order(detections: Sequence[Tuple[ObjectSpec, Aabb3]]) -> List[int]:
    """
    Indices sorted by footprint area descending, then height descending,
    then name, then input position.
    """
    keys = [
        (-box.footprint_area, -box.dims[2], spec.name, k)
        for k, (spec, box) in enumerate(detections)
    ]
    return [k for *_, k in sorted(keys)]


def default_ids(detections: Sequence[Tuple[ObjectSpec, Aabb3]]) -> List[str]:
    return [f"{slugify(spec.name)}_{k:02d}" for k, (spec, _) in enumerate(detections)]


def _location(room: Room, subject: str, x: float, y: float, wall: Optional[int] = None) -> Constraint:
    x0, y0, x1, y1 = room.bounds
    cx, cy = min(max(x, x0), x1), min(max(y, y0), y1)
    params = (cx, cy) if wall is None else (cx, cy, wall)
    return Constraint(ConstraintKind.LOCATION, subject, Hardness.SOFT, params=params)


def derive_floor_constraints(
    detections: Sequence[Tuple[ObjectSpec, Aabb3]],
    room: Room,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    ids: Optional[Sequence[str]] = None,
) -> ConstraintSet:
    """
    Derive the constraint set of a group of floor objects.

    Args:
        detections: (spec, lifted box) per object
        room: Room the boxes were lifted in
        thresholds: Distance thresholds in meters
        ids: Object ids, parallel to ``detections``; defaults to ``<slug>_<nn>``

    Returns:
        ConstraintSet with objects in placement order

    Examples:
        >>> cs = derive_floor_constraints([(sofa, box)], room)
        >>> [c.kind.value for c in cs.of(cs.order[0])]
        ['edge', 'horizontal', 'location']
    """
    if not detections:
        return ConstraintSet()
    ids = list(ids) if ids is not None else default_ids(detections)
    if len(ids) != len(detections):
        raise ValueError(f"got {len(ids)} ids for {len(detections)} detections")
    x0, y0, x1, y1 = room.bounds
    for sid, (_, box) in zip(ids, detections):
        if box.max[0] <= x0 or box.min[0] >= x1 or box.max[1] <= y0 or box.min[1] >= y1:
            raise ValueError(f"{sid} footprint {box.min}..{box.max} lies outside the room")

    order = placement_order(detections)
    table: Dict[str, Tuple[Constraint, ...]] = {}
    for pos, k in enumerate(order):
        sid, (_, box) = ids[k], detections[k]
        items: List[Constraint] = []
        walls = near_walls(room, box, thresholds.edge_eps)
        if is_corner(walls):
            items.append(Constraint(ConstraintKind.CORNER, sid, Hardness.HARD))
        elif walls:
            items.append(Constraint(ConstraintKind.EDGE, sid, Hardness.HARD))
        elif min(room.wall_distances(box)) > thresholds.middle_eps:
            items.append(Constraint(ConstraintKind.MIDDLE, sid, Hardness.HARD))
        dx, dy, _ = box.dims
        axis_kind = ConstraintKind.HORIZONTAL if dx >= dy else ConstraintKind.VERTICAL
        items.append(Constraint(axis_kind, sid, Hardness.HARD))

        own = footprint_of(box)
        for j in order[:pos]:
            tid, other = ids[j], footprint_of(detections[j][1])
            gap = own.gap(other)
            if gap < thresholds.near_eps:
                items.append(Constraint(ConstraintKind.NEAR, sid, Hardness.SOFT, tid))
            elif gap > thresholds.far_eps:
                items.append(Constraint(ConstraintKind.FAR, sid, Hardness.SOFT, tid))
            rel = direction_of(own, other, thresholds.overlap_frac)
            if rel is not None:
                items.append(Constraint(rel, sid, Hardness.SOFT, tid))
            axis = aligned_axis(own, other, thresholds.align_eps)
            if axis is not None:
                items.append(
                    Constraint(ConstraintKind.CENTER_ALIGNED, sid, Hardness.SOFT, tid, (axis,))
                )
        cx, cy = own.center
        items.append(_location(room, sid, cx, cy))
        table[sid] = tuple(items)
    return ConstraintSet(tuple(ids[k] for k in order), table)


def is_wall_adjacent(room: Room, box: Aabb3, eps: float = DEFAULT_WALL_ADJACENT_EPS) -> bool:
    return bool(np.min(np.abs(room.wall_distances(box))) <= eps)


def derive_wall_constraints(
    detections: Sequence[Tuple[ObjectSpec, Aabb3]],
    floor_objects: Sequence[Tuple[str, Aabb3]],
    room: Room,
    thresholds: ConstraintThresholds = ConstraintThresholds(),
    ids: Optional[Sequence[str]] = None,
    strict: bool = False,
) -> ConstraintSet:
    """
    Derive Location, Height and Above constraints for wall objects.

    Args:
        detections: (spec, lifted box) per wall object
        floor_objects: (id, world box) of floor objects already placed
        room: Room
        thresholds: ``wall_adjacent_eps`` decides wall membership
        ids: Object ids, parallel to ``detections``
        strict: Raise on an object away from every wall instead of demoting it

    Returns:
        ConstraintSet; objects away from every wall are listed in ``demoted``

    Raises:
        MisclassificationError: strict mode and an object is not near a wall.
    """
    if not detections:
        return ConstraintSet()
    ids = list(ids) if ids is not None else default_ids(detections)
    if len(ids) != len(detections):
        raise ValueError(f"got {len(ids)} ids for {len(detections)} detections")

    order = placement_order(detections)
    kept, demoted = [], []
    table: Dict[str, Tuple[Constraint, ...]] = {}
    for k in order:
        sid, (spec, box) = ids[k], detections[k]
        if not is_wall_adjacent(room, box, thresholds.wall_adjacent_eps):
            msg = (
                f"{sid} ({spec.name}) is {np.min(np.abs(room.wall_distances(box))):.2f} m from "
                f"the nearest wall; not a wall object"
            )
            if strict:
                raise MisclassificationError(msg)
            logger.warning("%s; demoting to floor object", msg)
            demoted.append(sid)
            continue
        wall = nearest_wall(room, box)
        cx, cy, cz = box.center
        length = room.wall_length(wall)
        offset = min(max(room.wall_offset(wall, cx, cy), 0.0), length)
        px, py = room.wall_point(wall, offset)
        items = [_location(room, sid, px, py, wall)]
        items.append(Constraint(ConstraintKind.HEIGHT, sid, Hardness.HARD, params=(cz,)))

        beneath = _beneath(room, wall, box, floor_objects, thresholds.beneath_eps)
        if beneath is not None:
            items.append(Constraint(ConstraintKind.ABOVE, sid, Hardness.HARD, beneath, (wall,)))
        table[sid] = tuple(items)
        kept.append(sid)
    return ConstraintSet(tuple(kept), table, tuple(demoted))


def _beneath(
    room: Room,
    wall: int,
    box: Aabb3,
    floor_objects: Sequence[Tuple[str, Aabb3]],
    beneath_eps: float,
) -> Optional[str]:
    """Nearest floor object standing below ``box`` against the same wall."""
    lo, hi = along_wall_span(room, wall, box)
    best, best_key = None, None
    for fid, fbox in floor_objects:
        if fbox.max[2] > box.min[2] + HEIGHT_TOL:
            continue
        if room.wall_distances(fbox)[wall] > beneath_eps:
            continue
        flo, fhi = along_wall_span(room, wall, fbox)
        if min(hi, fhi) - max(lo, flo) <= 0:
            continue
        dist = math.dist(box.center[:2], fbox.center[:2])
        key = (dist, fid)
        if best_key is None or key < best_key:
            best, best_key = fid, key
    return best


# ---------------------------------------------------------------------------
# rotation
# ---------------------------------------------------------------------------


def _has_word(name: str, words: Sequence[str]) -> bool:
    lowered = name.lower()
    return any(w in lowered for w in words)


def _nearest(
    subject_box: Aabb3, candidates: Sequence[Tuple[str, Aabb3]]
) -> Optional[str]:
    best, best_key = None, None
    for cid, cbox in candidates:
        key = (math.dist(subject_box.center[:2], cbox.center[:2]), cid)
        if best_key is None or key < best_key:
            best, best_key = cid, key
    return best


def facing_yaw(subject_xy: Sequence[float], target_xy: Sequence[float]) -> float:
    """Yaw turning an asset's front from ``subject_xy`` toward ``target_xy``."""
    dx, dy = target_xy[0] - subject_xy[0], target_xy[1] - subject_xy[1]
    return math.atan2(-dx, dy) % (2.0 * math.pi)


def fallback_rotation_constraints(
    objects: Sequence[Tuple[str, ObjectSpec, Aabb3]],
    room: Room,
) -> List[Constraint]:
    """
    Seating faces the nearest earlier table or desk; everything else faces
    away from its nearest wall.
    """
    out = []
    for pos, (sid, spec, box) in enumerate(objects):
        if _has_word(spec.name, SEATING_WORDS):
            tables = [(tid, tbox) for tid, tspec, tbox in objects[:pos] if _has_word(tspec.name, TABLE_WORDS)]
            target = _nearest(box, tables)
            if target is not None:
                out.append(Constraint(ConstraintKind.FACE_TO, sid, Hardness.SOFT, target))
                continue
        yaw = WALL_YAWS[nearest_wall(room, box)]
        out.append(Constraint(ConstraintKind.FACE_TO, sid, Hardness.SOFT, params=(yaw,)))
    return out


def rotation_constraints(
    objects: Sequence[Tuple[str, ObjectSpec, Aabb3]],
    scene_summary: str,
    room: Room,
    annotator=None,
    fallback: bool = True,
) -> List[Constraint]:
    """
    FaceTo constraints for objects given in placement order.

    The annotator is asked which objects face which; an answer pair becomes
    FaceTo(target) for every subject with that name, aimed at the nearest
    earlier object with the target name. Without an annotator, or when it
    fails and ``fallback`` is on, the name-based rule applies.

    Raises:
        ServiceError: annotator failure with fallback disabled.
    """
    if not objects:
        return []
    if annotator is None:
        if not fallback:
            raise ServiceError("no annotator configured and rotation fallback disabled")
        return fallback_rotation_constraints(objects, room)

    names = sorted({spec.name for _, spec, _ in objects})
    try:
        pairs = annotator.face_to(names, scene_summary)
    except Exception as exc:
        if not fallback:
            raise ServiceError(f"rotation query failed: {exc}") from exc
        logger.warning("rotation query failed (%s); using name-based rotations", exc)
        return fallback_rotation_constraints(objects, room)

    wanted: Dict[str, List[str]] = {}
    for subject, target in pairs:
        wanted.setdefault(subject.lower(), []).append(target.lower())
    out = []
    for pos, (sid, spec, box) in enumerate(objects):
        for target_name in wanted.get(spec.name.lower(), []):
            earlier = [(tid, tbox) for tid, tspec, tbox in objects[:pos] if tspec.name.lower() == target_name]
            target = _nearest(box, earlier)
            if target is not None:
                out.append(Constraint(ConstraintKind.FACE_TO, sid, Hardness.SOFT, target))
                break
    return out


# ---------------------------------------------------------------------------
# dump format
# ---------------------------------------------------------------------------


def dump_constraints(cs: ConstraintSet) -> str:
    """One line per constraint: ``subject kind [target] hardness [params...]``."""
    lines = []
    for c in cs.all():
        parts = [c.subject, c.kind.value]
        if c.target is not None:
            parts.append(c.target)
        parts.append(c.hardness.value)
        parts.extend(repr(p) for p in c.params)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_constraints(text: str) -> ConstraintSet:
    """
    Parse the dump format. Blank lines and ``#`` comments are skipped; the
    placement order is the order subjects first appear.
    """
    order: List[str] = []
    table: Dict[str, List[Constraint]] = {}
    hardness_words = {h.value for h in Hardness}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ValueError(f"line {lineno}: expected 'subject kind [target] hardness', got {raw!r}")
        subject, kind = parts[0], parts[1]
        if parts[2] in hardness_words:
            target, hardness, rest = None, parts[2], parts[3:]
        elif len(parts) >= 4 and parts[3] in hardness_words:
            target, hardness, rest = parts[2], parts[3], parts[4:]
        else:
            raise ValueError(f"line {lineno}: missing hardness in {raw!r}")
        try:
            params = tuple(float(p) for p in rest)
            constraint = Constraint(ConstraintKind(kind), subject, Hardness(hardness), target, params)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        if subject not in table:
            order.append(subject)
            table[subject] = []
        table[subject].append(constraint)
    return ConstraintSet(tuple(order), {k: tuple(v) for k, v in table.items()})


def constraints_to_frame(cs: ConstraintSet) -> pd.DataFrame:
    """Constraint table with one row per constraint, in placement order."""
    rows = [
        {
            "subject": c.subject,
            "kind": c.kind.value,
            "target": c.target,
            "hardness": c.hardness.value,
            "params": ", ".join(f"{p:.3f}" for p in c.params),
        }
        for c in cs.all()
    ]
    return pd.DataFrame(rows, columns=["subject", "kind", "target", "hardness", "params"])
