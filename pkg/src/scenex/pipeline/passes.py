"""Hierarchical generation passes: large furniture first, then small objects."""

import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from scenex.core.errors import (
    AnnotationError,
    DegenerateViewError,
    EmptyMaskError,
    InsufficientReferenceError,
    OversizeError,
    SceneValidationError,
    SceneXError,
    ServiceError,
)
from scenex.core.geometry import Aabb3, CameraView, DepthMap
from scenex.core.render import occupancy, rasterize, render_rgb
from scenex.core.scene import (
    SCENE_SUFFIX,
    WALL_YAWS,
    EventKind,
    ObjectCategory,
    ObjectSpec,
    PassEvent,
    SceneState,
    add_instances,
    append_events,
    describe_scene,
    inventory_summary,
    load_scene,
    save_scene,
    unique_instance_id,
)
from scenex.layout.assets import AssetRecord, HashEmbedder, choose_asset, crop_embedding, demo_catalog, load_catalog
from scenex.layout.constraints import (
    ConstraintKind,
    ConstraintSet,
    derive_floor_constraints,
    derive_wall_constraints,
    is_wall_adjacent,
    nearest_wall,
    rotation_constraints,
)
from scenex.layout.placer import LayoutItem, PlacementSolution, dfs_place, place_small_object, place_wall_objects
from scenex.perception.gateway import (
    Backends,
    Detection,
    InpaintRequest,
    accept_image,
    annotate_objects,
    build_prompts,
    detect_segment,
    estimate_depth,
    find_receptacles,
    inpaint,
    receptacle_kind,
)
from scenex.perception.lift import ReferenceMode, lift_detections, rescale_depth, select_reference_pixels
from scenex.perception.mock import load_mock_script, mock_backends
from scenex.perception.remote import remote_backends, resolve_endpoints
from scenex.perception.views import (
    InpaintMask,
    MaskProvenance,
    ViewKind,
    build_inpaint_mask,
    object_view,
    room_views,
    should_continue,
    soften_mask,
)
from scenex.pipeline.config import PipelineConfig
from scenex.pipeline.validate import validate_scene
from scenex.utils.helpers import save_events_jsonl

logger = logging.getLogger(__name__)

SCENE_STEM = "layout"
EVENTS_SUFFIX = ".events.jsonl"
MIN_TARGET_DIM = 1e-3


@dataclass(frozen=True, eq=False)
class _Frame:
    """An accepted inpainting sample."""

    image: np.ndarray
    detections: List[Detection]
    attempt: int
    sample: int
    seed: int


@dataclass(frozen=True, eq=False)
class LiftedDetection:
    """A detection lifted into the room, ready for asset selection and placement."""

    name: str
    category: ObjectCategory
    box: Aabb3
    description: str = ""
    crop: Optional[np.ndarray] = None

    @property
    def query(self) -> str:
        return self.description or f"a {self.name}"


def _event(kind: EventKind, /, **payload) -> PassEvent:
    # ordinals are assigned when the events are appended to the scene
    return PassEvent(0, kind, payload)


def _sample_seed(seed: int, *path: int) -> int:
    entropy = [int(seed) & 0xFFFFFFFF] + [int(p) for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _default_catalog(config: PipelineConfig, embedder: HashEmbedder) -> List[AssetRecord]:
    if config.assets.catalog is not None:
        return load_catalog(config.assets.catalog)
    return demo_catalog(embedder)


def _inpaint_until_accepted(
    image: np.ndarray,
    mask: InpaintMask,
    prompt_pair,
    cam: CameraView,
    depth: DepthMap,
    min_count: int,
    config: PipelineConfig,
    backends: Backends,
    events: List[PassEvent],
    seed_path: Tuple[int, ...],
    tag: dict,
    sleep: Callable[[float], None],
) -> Optional[_Frame]:
    """
    Regenerate until a sample shows at least ``min_count`` objects.

    Each attempt draws ``samples_per_view`` samples and keeps the one with the
    most detections. Returns None once ``max_attempts`` attempts are rejected.
    """
    settings = config.gateway.to_settings()
    for attempt in range(settings.max_attempts):
        best: Optional[_Frame] = None
        failures = []
        for sample in range(settings.samples_per_view):
            seed = _sample_seed(config.seed, *seed_path, attempt, sample)
            request = InpaintRequest(
                image,
                mask,
                prompt_pair.positive,
                prompt_pair.negative,
                seed=seed,
                camera=cam,
                depth=depth,
            )
            try:
                out = inpaint(request, backends.inpainter, settings, sleep).image
                annotations = annotate_objects(out, backends.annotator, settings, sleep)
                tags = sorted({a.name for a in annotations})
                detections = detect_segment(out, tags, backends.detector, settings, sleep)
            except (ServiceError, AnnotationError) as exc:
                logger.warning("sample %d of attempt %d rejected: %s", sample, attempt, exc)
                failures.append(str(exc))
                continue
            if not accept_image(detections, min_count):
                continue
            if best is None or len(detections) > len(best.detections):
                best = _Frame(out, detections, attempt, sample, seed)
        if best is not None:
            events.append(
                _event(
                    EventKind.INPAINT_ACCEPTED,
                    **tag,
                    attempt=attempt,
                    sample=best.sample,
                    seed=best.seed,
                    detections=len(best.detections),
                    names=[d.name for d in best.detections],
                )
            )
            return best
        reason = failures[-1] if failures else f"fewer than {min_count} objects recognized"
        events.append(_event(EventKind.INPAINT_REJECTED, **tag, attempt=attempt, reason=reason))
    return None


def _lift_frame(
    frame: _Frame,
    cam: CameraView,
    rendered: DepthMap,
    ids,
    mask: InpaintMask,
    mode: ReferenceMode,
    config: PipelineConfig,
    backends: Backends,
    events: List[PassEvent],
    tag: dict,
    sleep: Callable[[float], None],
    furniture_id: Optional[str] = None,
):
    """Rescale the estimated depth of an accepted frame and lift its detections."""
    settings = config.gateway.to_settings()
    estimated = estimate_depth(frame.image, backends.depth, settings, cam, sleep)
    refs = select_reference_pixels(
        mode, ids, mask, furniture_id=furniture_id, depth_maps=(rendered, estimated)
    )
    metric, stats = rescale_depth(estimated, rendered, refs, fallback=True)
    logger.debug("depth rescaled by %.4f with shift %.4f on %d references", stats.scale, stats.shift, len(refs))

    masks = [(det.name, det.mask) for det in frame.detections]
    lifted, dropped = lift_detections(metric, cam, masks)
    for obj in lifted:
        events.append(
            _event(
                EventKind.OBJECT_LIFTED,
                **tag,
                name=obj.name,
                category=frame.detections[obj.index].category,
                bbox_min=obj.box.min,
                bbox_max=obj.box.max,
                points=obj.n_points,
            )
        )
    for _, name, reason in dropped:
        events.append(_event(EventKind.OBJECT_SKIPPED, **tag, name=name, reason=f"no-cluster: {reason}"))
    out = []
    for obj in lifted:
        det = frame.detections[obj.index]
        crop = crop_embedding(frame.image, det.mask)
        out.append(LiftedDetection(det.name, det.category, obj.box, det.description, crop))
    return out


def _fit_scale(
    target_dims: Sequence[float], asset_dims: Sequence[float], yaw: float, wall: bool = False
) -> Tuple[float, float, float]:
    """
    Per-axis scale making an asset at ``yaw`` cover the target box.

    A target dimension too thin to measure takes the geometric mean of the
    measured ones. Wall objects always take their depth scale that way.
    """
    w, d, h = (float(v) for v in asset_dims)
    tx, ty, tz = (float(v) for v in target_dims)
    if abs(math.sin(yaw)) > abs(math.cos(yaw)):
        tx, ty = ty, tx
    ratios = [tx / w, ty / d, tz / h]
    measured = [tx > MIN_TARGET_DIM, ty > MIN_TARGET_DIM and not wall, tz > MIN_TARGET_DIM]
    known = [r for r, ok in zip(ratios, measured) if ok]
    if not known:
        raise ValueError(f"target box {tuple(target_dims)} has no measurable extent")
    fill = float(np.exp(np.mean(np.log(known))))
    return tuple(r if ok else fill for r, ok in zip(ratios, measured))


def _expected_yaw(constraints) -> float:
    for c in constraints:
        if c.kind is ConstraintKind.FACE_TO and c.target is None:
            return float(c.params[0])
    return 0.0


def _choose(obj: LiftedDetection, dims, catalog, embedder, config: PipelineConfig) -> AssetRecord:
    return choose_asset(
        obj.query, dims, catalog, obj.crop, config.assets.top_k, config.assets.lam, embedder
    )


def _record_solution(solution: PlacementSolution, events: List[PassEvent], tag: dict) -> None:
    for inst in solution.instances:
        events.append(
            _event(
                EventKind.OBJECT_PLACED,
                **tag,
                id=inst.id,
                name=inst.name,
                category=inst.category,
                asset_id=inst.asset_id,
                position=inst.position,
                yaw=inst.yaw,
                score=solution.scores.get(inst.id, 0.0),
            )
        )
    for sid in solution.skipped:
        events.append(_event(EventKind.OBJECT_SKIPPED, **tag, id=sid, reason="unplaceable"))


def place_lifted(
    scene: SceneState,
    objects: Sequence[LiftedDetection],
    config: PipelineConfig,
    catalog: Sequence[AssetRecord],
    embedder: Optional[HashEmbedder] = None,
    annotator=None,
    events: Optional[List[PassEvent]] = None,
    tag: Optional[dict] = None,
) -> Tuple[SceneState, List[ConstraintSet]]:
    """
    Derive constraints for lifted furniture, pick assets and place it.

    Floor objects are placed first by depth-first search; wall objects then
    go along their walls above the floor objects beneath them. A wall
    detection away from every wall is placed as a floor object.

    Args:
        scene: Scene to add to; its instances stay where they are
        objects: Lifted detections of one frame
        config: Pipeline configuration (thresholds, weights, search)
        catalog: Asset catalog
        embedder: Text embedder used for asset retrieval
        annotator: Asked for facing relations; name rules apply without one
        events: Event list to extend
        tag: Extra payload fields for every event

    Returns:
        (updated scene, [floor constraint set, wall constraint set])
    """
    embedder = embedder or HashEmbedder(config.assets.embed_dim)
    events = events if events is not None else []
    tag = tag or {}
    room = scene.room
    th = config.constraints.to_thresholds()
    weights = config.scoring.to_weights()
    search = config.search
    x0, y0, x1, y1 = room.bounds

    floor, wall = [], []
    taken: set = set()
    for obj in objects:
        box = obj.box
        if obj.category is ObjectCategory.WALL and is_wall_adjacent(room, box, th.wall_adjacent_eps):
            sid = unique_instance_id(scene, obj.name, taken)
            taken.add(sid)
            wall.append((sid, ObjectSpec(obj.name, obj.description, ObjectCategory.WALL), box, obj))
            continue
        if obj.category is ObjectCategory.WALL:
            logger.warning("%s is away from every wall; placing it on the floor", obj.name)
        outside = box.max[0] <= x0 or box.min[0] >= x1 or box.max[1] <= y0 or box.min[1] >= y1
        if outside or box.max[2] <= MIN_TARGET_DIM:
            events.append(_event(EventKind.OBJECT_SKIPPED, **tag, name=obj.name, reason="outside-room"))
            continue
        grounded = Aabb3((box.min[0], box.min[1], 0.0), (box.max[0], box.max[1], box.max[2]))
        sid = unique_instance_id(scene, obj.name, taken)
        taken.add(sid)
        floor.append((sid, ObjectSpec(obj.name, obj.description, ObjectCategory.FLOOR), grounded, obj))

    sets = []
    floor_cs = ConstraintSet()
    if floor:
        by_id = {f[0]: f for f in floor}
        floor_cs = derive_floor_constraints([(f[1], f[2]) for f in floor], room, th, [f[0] for f in floor])
        ordered = [(sid, by_id[sid][1], by_id[sid][2]) for sid in floor_cs.order]
        rotations = rotation_constraints(
            ordered,
            describe_scene(scene),
            room,
            annotator,
            fallback=config.constraints.rotation_fallback,
        )
        floor_cs = floor_cs.with_constraints(rotations)
        items = []
        for sid in floor_cs.order:
            _, spec, box, obj = by_id[sid]
            record = _choose(obj, box.dims, catalog, embedder, config)
            scale = _fit_scale(box.dims, record.mesh_bbox, _expected_yaw(floor_cs.of(sid)))
            items.append(LayoutItem(sid, spec, record.asset_id, record.mesh_bbox, scale))
        solution = dfs_place(
            items, floor_cs, scene, weights, search.branch, search.grid_step, th, search.max_nodes, search.trace
        )
        scene = add_instances(scene, solution.instances)
        _record_solution(solution, events, tag)
    sets.append(floor_cs)

    wall_cs = ConstraintSet()
    if wall:
        by_id = {w[0]: w for w in wall}
        floor_boxes = [(inst.id, inst.world_bbox) for inst in scene.by_category(ObjectCategory.FLOOR)]
        wall_cs = derive_wall_constraints(
            [(w[1], w[2]) for w in wall], floor_boxes, room, th, [w[0] for w in wall]
        )
        items = []
        for sid in wall_cs.order:
            _, spec, box, obj = by_id[sid]
            record = _choose(obj, box.dims, catalog, embedder, config)
            yaw = WALL_YAWS[nearest_wall(room, box)]
            scale = _fit_scale(box.dims, record.mesh_bbox, yaw, wall=True)
            items.append(LayoutItem(sid, spec, record.asset_id, record.mesh_bbox, scale))
        solution = place_wall_objects(
            items, wall_cs, scene, weights, search.branch, search.grid_step, th, search.max_nodes, search.trace
        )
        scene = add_instances(scene, solution.instances)
        _record_solution(solution, events, tag)
    sets.append(wall_cs)
    return scene, sets


def run_furniture_pass(
    scene: SceneState,
    config: PipelineConfig,
    backends: Backends,
    catalog: Optional[Sequence[AssetRecord]] = None,
    embedder: Optional[HashEmbedder] = None,
    verbose: bool = False,
    sleep: Callable[[float], None] = time.sleep,
) -> SceneState:
    """
    Grow the large-furniture layout view by view.

    For each room view, while floor occupancy stays at or below the
    threshold: mask the frame, inpaint until enough objects are recognized,
    lift the detections into the room and place them. A view that fails is
    skipped with an event; placed instances are never moved.

    Args:
        scene: Starting scene (empty room or pre-arranged)
        config: Pipeline configuration
        backends: Perception services
        catalog: Asset catalog; built from the config if omitted
        embedder: Text embedder used for asset retrieval
        verbose: Print progress per view
        sleep: Backoff sleeper for service retries

    Returns:
        The updated scene with this pass's events appended
    """
    embedder = embedder or HashEmbedder(config.assets.embed_dim)
    catalog = catalog if catalog is not None else _default_catalog(config, embedder)
    views = config.views
    plan = room_views(
        scene.room,
        eye_height=views.eye_height,
        look_height=views.look_height,
        fov_deg=views.fov_deg,
        width=views.width,
        height=views.height,
        occupancy_threshold=views.occupancy_threshold,
        max_views=views.max_views,
    )
    mask_settings = config.mask.to_settings()
    settings = config.gateway.to_settings()
    events: List[PassEvent] = []
    n_views = len(plan.cameras)

    if verbose:
        print("\nFURNITURE PASS")

    for view, cam in enumerate(plan.cameras):
        occ = occupancy(scene)
        if not should_continue(scene, view, plan.occupancy_threshold, plan.max_views, occupancy_value=occ):
            for rest in range(view, n_views):
                events.append(
                    _event(EventKind.VIEW_SKIPPED, view=rest, reason="occupancy", occupancy=occ)
                )
            if verbose:
                print(f"Occupancy {occ:.1%} above {plan.occupancy_threshold:.0%}; stopping")
            break
        tag = {"view": view}
        if verbose:
            print(f"\n[{view + 1}/{n_views}] View {view}: occupancy {occ:.1%}")

        frame_maps = rasterize(scene, cam)
        rendered, ids = frame_maps
        image = render_rgb(rendered, ids)
        try:
            mask = build_inpaint_mask(
                MaskProvenance.ROOM_CENTERED, frame_maps, cam, settings=mask_settings
            )
        except EmptyMaskError as exc:
            events.append(_event(EventKind.VIEW_SKIPPED, view=view, reason=f"empty-mask: {exc}"))
            continue
        events.append(
            _event(
                EventKind.VIEW_SELECTED,
                view=view,
                eye=cam.eye,
                target=cam.target,
                occupancy=occ,
                excluded=list(mask.excluded_ids),
            )
        )

        try:
            soft = soften_mask(mask, *mask_settings.softening(cam.width, cam.height))
            prompts = build_prompts(
                inventory_summary(scene),
                config.caption,
                backends.annotator,
                fallback=config.gateway.prompt_fallback,
                settings=settings,
                sleep=sleep,
            )
            frame = _inpaint_until_accepted(
                image, soft, prompts, cam, rendered, settings.min_count_room,
                config, backends, events, (0, view), tag, sleep,
            )
            if frame is None:
                if verbose:
                    print(f"All {settings.max_attempts} attempts rejected")
                continue
            lifted = _lift_frame(
                frame, cam, rendered, ids, mask, ReferenceMode.ROOM, config, backends, events, tag, sleep
            )
            before = len(scene.instances)
            scene, _ = place_lifted(
                scene, lifted, config, catalog, embedder, backends.annotator, events, tag
            )
            if verbose:
                print(f"Placed {len(scene.instances) - before} of {len(lifted)} lifted objects")
        except SceneXError as exc:
            logger.warning("view %d skipped: %s", view, exc)
            events.append(_event(EventKind.VIEW_SKIPPED, view=view, reason=str(exc)))
            if verbose:
                print(f"Skipped: {exc}")

    return append_events(scene, events)


def run_small_object_pass(
    scene: SceneState,
    config: PipelineConfig,
    backends: Backends,
    catalog: Optional[Sequence[AssetRecord]] = None,
    embedder: Optional[HashEmbedder] = None,
    verbose: bool = False,
    sleep: Callable[[float], None] = time.sleep,
) -> SceneState:
    """
    Fill receptacles with small objects.

    Receptacles are processed largest footprint first. Each one is framed
    from above (tables, desks) or from the front (shelves, cabinets), masked
    with a virtual cube, inpainted and lifted with the receptacle's own pixels
    as depth references. Failures skip the receptacle with an event.
    """
    floor = scene.by_category(ObjectCategory.FLOOR)
    if not floor:
        return scene
    embedder = embedder or HashEmbedder(config.assets.embed_dim)
    catalog = catalog if catalog is not None else _default_catalog(config, embedder)
    views, small = config.views, config.small_objects
    mask_settings = config.mask.to_settings()
    settings = config.gateway.to_settings()
    events: List[PassEvent] = []

    receptacles = find_receptacles(scene, backends.annotator)
    if verbose:
        print("\nSMALL OBJECT PASS")
        print(f"Receptacles: {len(receptacles)}")

    for k, rid in enumerate(receptacles):
        support = scene.get(rid)
        kind = receptacle_kind(support.name)
        tag = {"receptacle": rid}
        if verbose:
            print(f"\n[{k + 1}/{len(receptacles)}] {rid} ({kind.value})")
        try:
            cam = object_view(
                support,
                kind,
                fov_deg=views.fov_deg,
                width=views.width,
                height=views.height,
                pitch_deg=views.on_top_pitch_deg,
                margin=views.view_margin,
            )
            frame_maps = rasterize(scene, cam)
            rendered, ids = frame_maps
            mask = build_inpaint_mask(
                MaskProvenance.CUBE_FILL, frame_maps, cam, target=support, view_kind=kind,
                settings=mask_settings,
            )
            events.append(
                _event(
                    EventKind.VIEW_SELECTED,
                    receptacle=rid,
                    kind=kind,
                    eye=cam.eye,
                    target=cam.target,
                    excluded=list(mask.excluded_ids),
                )
            )
            soft = soften_mask(mask, *mask_settings.softening(cam.width, cam.height))
            where = "inside" if kind is ViewKind.INSIDE else "on"
            prompts = build_prompts(
                inventory_summary(scene),
                f"small objects {where} the {support.name}",
                backends.annotator,
                fallback=config.gateway.prompt_fallback,
                settings=settings,
                sleep=sleep,
            )
            frame = _inpaint_until_accepted(
                render_rgb(rendered, ids), soft, prompts, cam, rendered, settings.min_count_small,
                config, backends, events, (1, k), tag, sleep,
            )
            if frame is None:
                continue
            lifted = _lift_frame(
                frame, cam, rendered, ids, mask, ReferenceMode.FURNITURE, config, backends,
                events, tag, sleep, furniture_id=rid,
            )
        except (DegenerateViewError, EmptyMaskError, InsufficientReferenceError) as exc:
            events.append(_event(EventKind.VIEW_SKIPPED, **tag, reason=str(exc)))
            continue
        except SceneXError as exc:
            logger.warning("receptacle %s skipped: %s", rid, exc)
            events.append(_event(EventKind.VIEW_SKIPPED, **tag, reason=str(exc)))
            continue

        placed = []
        taken: set = set()
        for obj in lifted:
            sid = unique_instance_id(scene, obj.name, taken)
            spec = ObjectSpec(obj.name, obj.description, ObjectCategory.SMALL)
            try:
                record = _choose(obj, obj.box.dims, catalog, embedder, config)
                inst = place_small_object(
                    obj.box,
                    record.mesh_bbox,
                    cam.forward,
                    support,
                    spec,
                    sid,
                    record.asset_id,
                    oversize_tol=small.oversize_tol,
                    shelf_spacing=small.shelf_spacing,
                )
            except OversizeError as exc:
                events.append(_event(EventKind.OBJECT_SKIPPED, **tag, id=sid, name=obj.name, reason=f"oversize: {exc}"))
                continue
            except ValueError as exc:
                events.append(_event(EventKind.OBJECT_SKIPPED, **tag, id=sid, name=obj.name, reason=str(exc)))
                continue
            taken.add(sid)
            placed.append(inst)
            events.append(
                _event(
                    EventKind.OBJECT_PLACED,
                    **tag,
                    id=inst.id,
                    name=inst.name,
                    category=inst.category,
                    asset_id=inst.asset_id,
                    position=inst.position,
                    yaw=inst.yaw,
                )
            )
        scene = add_instances(scene, placed)
        if verbose:
            print(f"Placed {len(placed)} of {len(lifted)} small objects")

    return append_events(scene, events)


def build_backends(config: PipelineConfig) -> Backends:
    """
    Mock backends when the config names a mock script, otherwise remote ones.

    Raises:
        UsageError: no mock script and an endpoint is missing.
    """
    settings = config.gateway.to_settings()
    if config.mock_script is not None:
        return mock_backends(load_mock_script(config.mock_script), settings)
    endpoints = resolve_endpoints(**config.endpoints.model_dump())
    return remote_backends(endpoints, settings)


def initial_scene(config: PipelineConfig) -> SceneState:
    """Empty room from the config, or the pre-arranged scene file."""
    if config.scene_file is not None:
        return replace(load_scene(config.scene_file), rng_seed=config.seed)
    return SceneState(room=config.room.to_room(), rng_seed=config.seed)


def generate(
    config: PipelineConfig,
    backends: Optional[Backends] = None,
    catalog: Optional[Sequence[AssetRecord]] = None,
    verbose: bool = False,
    sleep: Callable[[float], None] = time.sleep,
) -> Path:
    """
    Run the whole pipeline and write the scene and its event log.

    Args:
        config: Pipeline configuration
        backends: Perception services; built from the config if omitted
        catalog: Asset catalog; built from the config if omitted
        verbose: Print progress
        sleep: Backoff sleeper for service retries

    Returns:
        Path of the written ``.scene.json`` file

    Raises:
        UsageError: backends cannot be built from the config.
        SceneValidationError: the finished scene breaks an invariant; the
            files are still written for inspection.

    Examples:
        >>> path = generate(load_config("configs/living_room.yaml"))
        >>> load_scene(path).instances
    """
    backends = backends or build_backends(config)
    embedder = HashEmbedder(config.assets.embed_dim)
    catalog = catalog if catalog is not None else _default_catalog(config, embedder)
    scene = initial_scene(config)

    if verbose:
        print("\nSCENE GENERATION")
        print(f"Caption: {config.caption}")
        print(f"Seed: {config.seed}")

    scene = run_furniture_pass(scene, config, backends, catalog, embedder, verbose, sleep)
    if config.small_objects.enabled:
        scene = run_small_object_pass(scene, config, backends, catalog, embedder, verbose, sleep)

    out = Path(config.output_dir)
    path = save_scene(scene, out / f"{SCENE_STEM}{SCENE_SUFFIX}")
    save_events_jsonl(scene, out / f"{SCENE_STEM}{EVENTS_SUFFIX}")

    problems = validate_scene(scene)
    if problems:
        raise SceneValidationError(problems)
    if verbose:
        print(f"\nWrote {len(scene.instances)} instances to {path}")
    return path
