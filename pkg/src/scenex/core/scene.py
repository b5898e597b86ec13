"""Scene model: room, object specs and instances, and the canonical scene file.

Object frame: an asset's bbox dims are ``(width, depth, height)`` along its
local x, y and z axes, and the asset's front faces local +y. A yaw of theta
rotates the asset counter-clockwise about +z, so its front points along
``(-sin(theta), cos(theta))``. An instance ``position`` is the center of its
footprint at the height of its base.

Walls are indexed counter-clockwise starting at the front wall:
0 is y = y0, 1 is x = x1, 2 is y = y1 and 3 is x = x0. Wall offsets run
from the wall's start corner in that counter-clockwise direction.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from scenex.core.geometry import Aabb3, Vec3

logger = logging.getLogger(__name__)

SCENE_SUFFIX = ".scene.json"
FLOAT_DIGITS = 9
TWO_PI = 2.0 * math.pi

# inward wall normals, indexed by wall
WALL_NORMALS: Tuple[Tuple[float, float], ...] = ((0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0))
# yaw that turns an asset's front away from each wall
WALL_YAWS: Tuple[float, ...] = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)


class ObjectCategory(str, Enum):
    FLOOR = "floor-object"
    WALL = "wall-object"
    SMALL = "small-object"


def q(value: float) -> float:
    """Quantize a float to the scene file precision of nine significant digits."""
    out = float(f"{float(value):.{FLOAT_DIGITS}g}")
    return out + 0.0  # folds -0.0


def q3(values: Sequence[float]) -> Vec3:
    return tuple(q(v) for v in values)


def normalize_yaw(yaw: float) -> float:
    out = q(float(yaw) % TWO_PI)
    return 0.0 if out >= q(TWO_PI) else out


def front_vector(yaw: float) -> np.ndarray:
    return np.array([-math.sin(yaw), math.cos(yaw)])


def _rot_abs(yaw: float) -> Tuple[float, float]:
    c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
    c = 0.0 if c < 1e-12 else (1.0 if c > 1.0 - 1e-12 else c)
    s = 0.0 if s < 1e-12 else (1.0 if s > 1.0 - 1e-12 else s)
    return c, s


def rotated_half_extents(dims: Sequence[float], yaw: float) -> Tuple[float, float]:
    """Half extents along world x and y of a footprint of ``dims`` rotated by yaw."""
    c, s = _rot_abs(yaw)
    hx, hy = dims[0] / 2.0, dims[1] / 2.0
    return c * hx + s * hy, s * hx + c * hy


def world_bbox_of(
    asset_dims: Sequence[float],
    position: Sequence[float],
    yaw: float,
    scale: Sequence[float] = (1.0, 1.0, 1.0),
) -> Aabb3:
    """
    World AABB of an asset bbox placed at ``position`` with ``yaw`` and ``scale``.

    Args:
        asset_dims: Asset bbox dims (width, depth, height) in its local frame
        position: Footprint center (x, y) and base height z
        yaw: Rotation about +z in radians
        scale: Per-axis multipliers applied in the local frame

    Returns:
        Aabb3 enclosing the rotated, scaled box
    """
    dims = [float(d) * float(s) for d, s in zip(asset_dims, scale)]
    hx, hy = rotated_half_extents(dims, yaw)
    x, y, z = (float(p) for p in position)
    return Aabb3((x - hx, y - hy, z), (x + hx, y + hy, z + dims[2]))


@dataclass(frozen=True)
class Opening:
    """Door or window cut into a wall, measured in the wall plane."""

    wall: int
    offset: float
    width: float
    height: float
    bottom: float = 0.0
    kind: str = "door"

    def __post_init__(self):
        object.__setattr__(self, "wall", int(self.wall))
        for name in ("offset", "width", "height", "bottom"):
            object.__setattr__(self, name, q(getattr(self, name)))


@dataclass(frozen=True)
class Room:
    """Rectangular room with optional doors and windows."""

    extent: Tuple[float, float]
    wall_height: float = 2.8
    origin: Tuple[float, float] = (0.0, 0.0)
    openings: Tuple[Opening, ...] = ()

    def __post_init__(self):
        extent = tuple(q(v) for v in self.extent)
        origin = tuple(q(v) for v in self.origin)
        if len(extent) != 2 or min(extent) <= 0:
            raise ValueError(f"room extent must be two positive lengths, got {self.extent}")
        if not self.wall_height > 0:
            raise ValueError(f"wall_height must be positive, got {self.wall_height}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "wall_height", q(self.wall_height))
        openings = tuple(self.openings)
        object.__setattr__(self, "openings", openings)
        for op in openings:
            if op.wall not in (0, 1, 2, 3):
                raise ValueError(f"opening wall index must be 0-3, got {op.wall}")
            length = self.wall_length(op.wall)
            if op.offset < 0 or op.width <= 0 or op.offset + op.width > length + 1e-9:
                raise ValueError(
                    f"{op.kind} at offset {op.offset} width {op.width} exceeds wall {op.wall} length {length}"
                )
            if op.bottom < 0 or op.height <= 0 or op.bottom + op.height > self.wall_height + 1e-9:
                raise ValueError(
                    f"{op.kind} spanning {op.bottom}..{op.bottom + op.height} exceeds wall height {self.wall_height}"
                )

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """(x0, y0, x1, y1) of the floor rectangle."""
        x0, y0 = self.origin
        return x0, y0, x0 + self.extent[0], y0 + self.extent[1]

    @property
    def floor_area(self) -> float:
        return self.extent[0] * self.extent[1]

    def box(self) -> Aabb3:
        x0, y0, x1, y1 = self.bounds
        return Aabb3((x0, y0, 0.0), (x1, y1, self.wall_height))

    def wall_length(self, wall: int) -> float:
        return self.extent[0] if wall in (0, 2) else self.extent[1]

    def wall_segment(self, wall: int) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        """Start and end corners of a wall, counter-clockwise."""
        x0, y0, x1, y1 = self.bounds
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        return corners[wall], corners[(wall + 1) % 4]

    def wall_point(self, wall: int, offset: float) -> Tuple[float, float]:
        """Point on a wall at ``offset`` meters from its start corner."""
        (sx, sy), (ex, ey) = self.wall_segment(wall)
        length = self.wall_length(wall)
        t = offset / length
        return sx + t * (ex - sx), sy + t * (ey - sy)

    def wall_offset(self, wall: int, x: float, y: float) -> float:
        """Offset along ``wall`` of the projection of (x, y)."""
        (sx, sy), (ex, ey) = self.wall_segment(wall)
        length = self.wall_length(wall)
        return ((x - sx) * (ex - sx) + (y - sy) * (ey - sy)) / length

    def wall_distances(self, box: Aabb3) -> Tuple[float, float, float, float]:
        """Gap from a box footprint to each wall (negative if it crosses)."""
        x0, y0, x1, y1 = self.bounds
        return (
            box.min[1] - y0,
            x1 - box.max[0],
            y1 - box.max[1],
            box.min[0] - x0,
        )

    def opening_box(self, opening: Opening, depth: float = 0.1) -> Aabb3:
        """Keep-out volume of an opening, reaching ``depth`` into the room."""
        a = self.wall_point(opening.wall, opening.offset)
        b = self.wall_point(opening.wall, opening.offset + opening.width)
        nx, ny = WALL_NORMALS[opening.wall]
        xs = [a[0], b[0], a[0] + nx * depth, b[0] + nx * depth]
        ys = [a[1], b[1], a[1] + ny * depth, b[1] + ny * depth]
        return Aabb3(
            (min(xs), min(ys), opening.bottom),
            (max(xs), max(ys), opening.bottom + opening.height),
        )


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    description: str = ""
    category: ObjectCategory = ObjectCategory.FLOOR
    nominal_scale: Optional[Vec3] = None

    def __post_init__(self):
        object.__setattr__(self, "category", ObjectCategory(self.category))
        if not self.name or not self.name.strip():
            raise ValueError("object name must be non-empty")
        if self.nominal_scale is not None:
            object.__setattr__(self, "nominal_scale", q3(self.nominal_scale))


@dataclass(frozen=True)
class ObjectInstance:
    """A placed asset. Build with ``make_instance`` to keep the bbox consistent."""

    id: str
    spec: ObjectSpec
    asset_id: str
    asset_dims: Vec3
    position: Vec3
    yaw: float
    scale: Vec3
    world_bbox: Aabb3
    support_id: Optional[str] = None

    @property
    def category(self) -> ObjectCategory:
        return self.spec.category

    @property
    def name(self) -> str:
        return self.spec.name


def make_instance(
    id: str,
    spec: ObjectSpec,
    asset_id: str,
    asset_dims: Sequence[float],
    position: Sequence[float],
    yaw: float = 0.0,
    scale: Sequence[float] = (1.0, 1.0, 1.0),
    support_id: Optional[str] = None,
) -> ObjectInstance:
    """
    Create an instance with quantized pose and a world bbox derived from it.

    Raises:
        ValueError: non-positive asset dims or scale.
    """
    dims = q3(asset_dims)
    sc = q3(scale)
    if min(dims) <= 0:
        raise ValueError(f"asset dims must be positive, got {dims}")
    if min(sc) <= 0:
        raise ValueError(f"scale must be positive, got {sc}")
    pos = q3(position)
    yaw_q = normalize_yaw(yaw)
    box = world_bbox_of(dims, pos, yaw_q, sc)
    return ObjectInstance(
        id=id,
        spec=spec,
        asset_id=asset_id,
        asset_dims=dims,
        position=pos,
        yaw=yaw_q,
        scale=sc,
        world_bbox=Aabb3(q3(box.min), q3(box.max)),
        support_id=support_id,
    )


class EventKind(str, Enum):
    VIEW_SELECTED = "view-selected"
    VIEW_SKIPPED = "view-skipped"
    INPAINT_ACCEPTED = "inpaint-accepted"
    INPAINT_REJECTED = "inpaint-rejected"
    OBJECT_LIFTED = "object-lifted"
    OBJECT_PLACED = "object-placed"
    OBJECT_SKIPPED = "object-skipped"


@dataclass(frozen=True)
class PassEvent:
    """One entry of the pipeline audit log."""

    ordinal: int
    kind: EventKind
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "payload", _canonical_payload(self.payload))


@dataclass(frozen=True)
class SceneState:
    room: Room
    instances: Tuple[ObjectInstance, ...] = ()
    rng_seed: int = 0
    pass_log: Tuple[PassEvent, ...] = ()

    def __post_init__(self):
        instances = tuple(self.instances)
        ids = [inst.id for inst in instances]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate instance ids: {dupes}")
        object.__setattr__(self, "instances", instances)
        object.__setattr__(self, "pass_log", tuple(self.pass_log))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))

    def get(self, instance_id: str) -> ObjectInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(instance_id)

    def by_category(self, category: ObjectCategory) -> List[ObjectInstance]:
        return [i for i in self.instances if i.category == category]


def add_instances(scene: SceneState, instances: Iterable[ObjectInstance]) -> SceneState:
    return replace(scene, instances=scene.instances + tuple(instances))


def append_events(scene: SceneState, events: Iterable[PassEvent]) -> SceneState:
    """Append events, renumbering ordinals to continue the existing log."""
    start = scene.pass_log[-1].ordinal + 1 if scene.pass_log else 0
    renumbered = tuple(
        PassEvent(start + k, ev.kind, ev.payload) for k, ev in enumerate(events)
    )
    return replace(scene, pass_log=scene.pass_log + renumbered)


def unique_instance_id(scene: SceneState, name: str, taken: Iterable[str] = ()) -> str:
    """Next free id of the form ``<slug>_<nnn>``."""
    base = slugify(name)
    used = {i.id for i in scene.instances} | set(taken)
    k = 0
    while f"{base}_{k:03d}" in used:
        k += 1
    return f"{base}_{k:03d}"


def slugify(name: str) -> str:
    out = "".join(ch if ch.isalnum() else "_" for ch in name.strip().lower())
    out = "_".join(part for part in out.split("_") if part)
    return out or "object"


def inventory_summary(scene: SceneState) -> List[Tuple[str, int]]:
    """
    Count instances per name, sorted by name.

    Examples:
        >>> inventory_summary(scene)
        [('sofa', 2), ('table', 1)]
    """
    if not scene.instances:
        return []
    counts = pd.Series([inst.name for inst in scene.instances]).value_counts().sort_index()
    return [(str(name), int(count)) for name, count in counts.items()]


def describe_scene(scene: SceneState) -> str:
    """One line per instance, for prompts and quick inspection."""
    x0, y0, x1, y1 = scene.room.bounds
    lines = [
        f"room: x {x0:.2f}..{x1:.2f} y {y0:.2f}..{y1:.2f} height {scene.room.wall_height:.2f}"
    ]
    for inst in scene.instances:
        px, py, pz = inst.position
        dx, dy, dz = inst.world_bbox.dims
        lines.append(
            f"{inst.id} ({inst.name}, {inst.category.value}): "
            f"pos ({px:.2f}, {py:.2f}, {pz:.2f}) yaw {math.degrees(inst.yaw):.0f}deg "
            f"size ({dx:.2f}, {dy:.2f}, {dz:.2f}) asset {inst.asset_id}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# canonical file format
# ---------------------------------------------------------------------------


def _canonical_payload(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _canonical_payload(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical_payload(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return q(value)
    return value


def _room_to_dict(room: Room) -> Dict[str, Any]:
    return {
        "origin": [q(v) for v in room.origin],
        "extent": [q(v) for v in room.extent],
        "wall_height": q(room.wall_height),
        "openings": [
            {
                "kind": op.kind,
                "wall": op.wall,
                "offset": q(op.offset),
                "width": q(op.width),
                "height": q(op.height),
                "bottom": q(op.bottom),
            }
            for op in room.openings
        ],
    }


def _instance_to_dict(inst: ObjectInstance) -> Dict[str, Any]:
    return {
        "id": inst.id,
        "name": inst.spec.name,
        "description": inst.spec.description,
        "category": inst.spec.category.value,
        "asset_id": inst.asset_id,
        "position": list(inst.position),
        "yaw": inst.yaw,
        "scale": list(inst.scale),
        "bbox": {"min": list(inst.world_bbox.min), "max": list(inst.world_bbox.max)},
        "asset_dims": list(inst.asset_dims),
        "nominal_scale": None if inst.spec.nominal_scale is None else list(inst.spec.nominal_scale),
        "support_id": inst.support_id,
    }


def scene_to_dict(scene: SceneState) -> Dict[str, Any]:
    return {
        "room": _room_to_dict(scene.room),
        "instances": [_instance_to_dict(i) for i in scene.instances],
        "seed": scene.rng_seed,
        "log": [
            {"ordinal": ev.ordinal, "kind": ev.kind.value, "payload": ev.payload}
            for ev in scene.pass_log
        ],
    }


def serialize_scene(scene: SceneState) -> bytes:
    """
    Canonical UTF-8 JSON document for ``scene``.

    Key order is fixed and floats are written at 9 significant digits of
    precision, so serializing the same state twice yields identical bytes.
    """
    text = json.dumps(scene_to_dict(scene), indent=2, ensure_ascii=False, allow_nan=False)
    return (text + "\n").encode("utf-8")


def _room_from_dict(data: Mapping[str, Any]) -> Room:
    return Room(
        extent=tuple(data["extent"]),
        wall_height=data.get("wall_height", 2.8),
        origin=tuple(data.get("origin", (0.0, 0.0))),
        openings=tuple(
            Opening(
                wall=int(op["wall"]),
                offset=float(op["offset"]),
                width=float(op["width"]),
                height=float(op["height"]),
                bottom=float(op.get("bottom", 0.0)),
                kind=op.get("kind", "door"),
            )
            for op in data.get("openings", [])
        ),
    )


def _instance_from_dict(data: Mapping[str, Any]) -> ObjectInstance:
    nominal = data.get("nominal_scale")
    spec = ObjectSpec(
        name=data["name"],
        description=data.get("description", ""),
        category=ObjectCategory(data["category"]),
        nominal_scale=None if nominal is None else tuple(nominal),
    )
    bbox = data["bbox"]
    position = q3(data["position"])
    scale = q3(data.get("scale", (1.0, 1.0, 1.0)))
    yaw = normalize_yaw(data.get("yaw", 0.0))
    world = Aabb3(q3(bbox["min"]), q3(bbox["max"]))
    dims = data.get("asset_dims")
    if dims is None:
        # files written by hand may omit asset dims; recover them for canonical yaws
        wx, wy, wz = world.dims
        c, s = _rot_abs(yaw)
        if s > c:
            wx, wy = wy, wx
        dims = (wx / scale[0], wy / scale[1], wz / scale[2])
    return ObjectInstance(
        id=str(data["id"]),
        spec=spec,
        asset_id=str(data.get("asset_id", "")),
        asset_dims=q3(dims),
        position=position,
        yaw=yaw,
        scale=scale,
        world_bbox=world,
        support_id=data.get("support_id"),
    )


def deserialize_scene(data: Union[bytes, str]) -> SceneState:
    """Parse a canonical scene document back into a SceneState."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    missing = {"room", "instances"} - set(doc)
    if missing:
        raise ValueError(f"scene document missing keys: {sorted(missing)}")
    return SceneState(
        room=_room_from_dict(doc["room"]),
        instances=tuple(_instance_from_dict(i) for i in doc["instances"]),
        rng_seed=int(doc.get("seed", 0)),
        pass_log=tuple(
            PassEvent(int(ev["ordinal"]), EventKind(ev["kind"]), ev.get("payload", {}))
            for ev in doc.get("log", [])
        ),
    )


def save_scene(scene: SceneState, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_scene(scene))
    logger.info("wrote scene with %d instances to %s", len(scene.instances), path)
    return path


def load_scene(path: Union[str, Path]) -> SceneState:
    return deserialize_scene(Path(path).read_bytes())
