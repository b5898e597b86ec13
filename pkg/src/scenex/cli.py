"""Command-line interface: ``scenex <command> [options]``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from PIL import Image
import yaml
from pydantic import TypeAdapter, ValidationError

from scenex.core.errors import SceneValidationError, SceneXError, UsageError
from scenex.core.geometry import DEFAULT_FOV_DEG, DEFAULT_RESOLUTION, load_depth, save_depth
from scenex.core.render import floor_visibility
from scenex.core.scene import (
    SCENE_SUFFIX,
    ObjectCategory,
    Room,
    SceneState,
    append_events,
    load_scene,
    save_scene,
)
from scenex.layout.assets import HashEmbedder, demo_catalog, load_catalog
from scenex.layout.constraints import dump_constraints
from scenex.perception.lift import ReferenceMode, ReferenceSet, rescale_depth
from scenex.perception.mock import ScriptObject
from scenex.perception.views import InpaintMask, MaskProvenance, room_views
from scenex.pipeline.config import load_config, make_config
from scenex.pipeline.passes import LiftedDetection, generate, place_lifted
from scenex.pipeline.validate import validate_scene
from scenex.utils.helpers import display_event_summary, display_scene_summary
from scenex.viz.debug import render_debug
from scenex.viz.layout import plot_scene_layout

logger = logging.getLogger("scenex")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_INVALID = 3


def parse_room(spec: str) -> Room:
    """
    Room from ``WxD`` or ``WxDxH`` meters, or from a YAML/JSON config file
    holding a ``room`` section.

    Examples:
        >>> parse_room("4x5x2.6").extent
        (4.0, 5.0)
    """
    path = Path(spec)
    if path.suffix.lower() in (".yaml", ".yml", ".json"):
        config = load_config(path)
        if config.room is None:
            raise UsageError(f"{path} has no room section")
        return config.room.to_room()
    parts = spec.lower().split("x")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"room must look like 4x5 or 4x5x2.8, got {spec!r}")
    if len(values) not in (2, 3) or min(values) <= 0:
        raise UsageError(f"room must look like 4x5 or 4x5x2.8, got {spec!r}")
    height = values[2] if len(values) == 3 else 2.8
    return Room(extent=(values[0], values[1]), wall_height=height)


def load_mask_png(path: Path, shape) -> InpaintMask:
    """Grayscale PNG as a binary room-centered mask (white = masked)."""
    gray = np.asarray(Image.open(path).convert("L"))
    if gray.shape != tuple(shape):
        raise UsageError(f"mask {path} is {gray.shape}, depth is {tuple(shape)}")
    return InpaintMask((gray >= 128).astype(float), MaskProvenance.ROOM_CENTERED)


def _cmd_generate(args) -> int:
    config = load_config(args.config)
    updates = {}
    if args.mock is not None:
        updates["mock_script"] = str(Path(args.mock))
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.no_small:
        updates["small_objects"] = config.small_objects.model_copy(update={"enabled": False})
    config = config.model_copy(update=updates)

    try:
        path = generate(config, verbose=args.verbose > 0)
    except SceneValidationError as exc:
        print(f"Scene failed validation:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    scene = load_scene(path)
    display_scene_summary(scene)
    display_event_summary(scene)
    print(f"\nScene saved: {path}")
    return EXIT_OK


def _cmd_lift(args) -> int:
    estimated = load_depth(args.depth)
    rendered = load_depth(args.ref)
    mask = load_mask_png(Path(args.mask), rendered.values.shape)
    eligible = (mask.weights <= 0.0) & rendered.valid & estimated.valid
    rows, cols = np.nonzero(eligible)
    refs = ReferenceSet(np.stack([rows, cols], axis=1), ReferenceMode.ROOM)
    metric, stats = rescale_depth(estimated, rendered, refs, fallback=not args.strict)

    print("\nDEPTH RESCALE")
    print(f"\nReference pixels: {len(refs)}")
    print(f"Rendered range: {stats.min_r:.4f} .. {stats.max_r:.4f}")
    print(f"Estimated range: {stats.min_e:.4f} .. {stats.max_e:.4f}")
    print(f"Scale: {stats.scale:.6f}, shift: {stats.shift:.6f}")
    if stats.fallback:
        print("Constant estimate: shift-only alignment")
    if args.out:
        print(f"Depth saved: {save_depth(args.out, metric)}")
    return EXIT_OK


def _read_detections(path: Path) -> List[ScriptObject]:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or []
    if isinstance(data, dict):
        data = data.get("objects", data.get("world", []))
    try:
        return TypeAdapter(List[ScriptObject]).validate_python(data)
    except ValidationError as exc:
        raise UsageError(f"invalid detections file {path}:\n{exc}") from exc


def _cmd_place(args) -> int:
    room = parse_room(args.room)
    config = make_config({"room": {"extent": list(room.extent), "wall_height": room.wall_height}})
    embedder = HashEmbedder(config.assets.embed_dim)
    catalog = load_catalog(args.catalog) if args.catalog else demo_catalog(embedder)

    objects = []
    for obj in _read_detections(Path(args.detections)):
        if obj.category == ObjectCategory.SMALL.value:
            logger.warning("skipping small object %s; small objects need a receptacle view", obj.name)
            continue
        category = ObjectCategory(obj.category)
        objects.append(LiftedDetection(obj.name, category, obj.box.to_aabb(), obj.description))

    events: list = []
    scene = SceneState(room=room, rng_seed=config.seed)
    scene, sets = place_lifted(scene, objects, config, catalog, embedder, events=events)

    print("\nCONSTRAINTS")
    for cs in sets:
        if len(cs):
            print(dump_constraints(cs))
    display_scene_summary(scene)
    problems = validate_scene(scene, sets, config.constraints.to_thresholds())
    for problem in problems:
        print(f"  invalid: {problem}")

    if args.out:
        scene = append_events(scene, events)
        path = save_scene(scene, args.out)
        print(f"\nScene saved: {path}")
    return EXIT_INVALID if problems else EXIT_OK


def _cmd_plan_views(args) -> int:
    room = parse_room(args.room)
    plan = room_views(room, fov_deg=args.fov, width=args.resolution, height=args.resolution)
    rows = []
    for k, cam in enumerate(plan.cameras):
        rows.append(
            {
                "view": k,
                "eye": tuple(round(v, 3) for v in cam.eye),
                "target": tuple(round(v, 3) for v in cam.target),
                "visible_floor": round(floor_visibility(room, cam), 4),
            }
        )
    print("\nROOM VIEWS")
    print()
    print(pd.DataFrame(rows).to_string(index=False))
    return EXIT_OK


def _cmd_validate(args) -> int:
    scene = load_scene(args.scene)
    problems = validate_scene(scene)
    if problems:
        print(f"{args.scene}: {len(problems)} problem(s)")
        for problem in problems:
            print(f"  {problem}")
        return EXIT_INVALID
    print(f"{args.scene}: valid ({len(scene.instances)} instances)")
    return EXIT_OK


def _cmd_render_debug(args) -> int:
    scene = load_scene(args.scene)
    out = args.out or str(Path(args.scene).parent / "debug")
    written = render_debug(scene, args.view, out, png=args.png)
    if args.png:
        stem = Path(args.scene).name.removesuffix(SCENE_SUFFIX)
        written["layout_png"] = Path(out) / f"{stem}-layout.png"
        plot_scene_layout(scene, plot_path=written["layout_png"], close_fig=True)
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenex",
        description="Generate 3D room layouts by inpainting views and lifting what appears.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more output (-vv for debug logs)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True, help="YAML or JSON pipeline config")
    p.add_argument("--mock", default=None, help="mock script replacing the remote services")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-small", action="store_true", help="skip the small-object pass")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("lift", help="rescale an estimated depth raster against a rendered one")
    p.add_argument("--depth", required=True, help="estimated depth (.depth)")
    p.add_argument("--ref", required=True, help="rendered depth (.depth)")
    p.add_argument("--mask", required=True, help="inpaint mask PNG, white = masked")
    p.add_argument("--out", default=None, help="write the rescaled depth here")
    p.add_argument("--strict", action="store_true", help="fail on a constant estimate")
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("place", help="derive constraints and place lifted boxes")
    p.add_argument("--detections", required=True, help="YAML/JSON list of named boxes")
    p.add_argument("--room", required=True, help="WxD[xH] in meters, or a config file")
    p.add_argument("--catalog", default=None, help="asset catalog (JSON lines)")
    p.add_argument("--out", default=None, help="write the placed scene here")
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("plan-views", help="list the room cameras and their floor coverage")
    p.add_argument("--room", required=True, help="WxD[xH] in meters, or a config file")
    p.add_argument("--fov", type=float, default=DEFAULT_FOV_DEG)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.set_defaults(func=_cmd_plan_views)

    p = sub.add_parser("validate", help="check a scene file")
    p.add_argument("--scene", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("render-debug", help="write depth / id / mask rasters of one room view")
    p.add_argument("--scene", required=True)
    p.add_argument("--view", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory (default: next to the scene)")
    p.add_argument("--png", action="store_true", help="also write PNG images and the layout plot")
    p.set_defaults(func=_cmd_render_debug)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneXError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
