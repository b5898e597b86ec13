"""Public convenience API for scenex.

This module exposes the most commonly used functions via a compact
namespace so users can write:

    import scenex as sx
    path = sx.generate(sx.load_config("configs/living_room.yaml"))

without losing access to the more detailed submodules under
``scenex.core``, ``scenex.perception``, ``scenex.layout`` or ``scenex.viz``.
"""

from .core.geometry import Aabb3, CameraView, DepthMap, camera_from_lookat, load_depth, save_depth
from .core.render import floor_visibility, occupancy, rasterize
from .core.scene import Room, SceneState, describe_scene, load_scene, save_scene
from .layout.assets import choose_asset, demo_catalog, load_catalog, save_catalog
from .layout.constraints import derive_floor_constraints, derive_wall_constraints, dump_constraints
from .layout.placer import dfs_place, place_small_object, place_wall_objects
from .perception.lift import lift_instance, rescale_depth, select_reference_pixels
from .perception.mock import load_mock_script, mock_backends
from .perception.views import build_inpaint_mask, object_view, room_views, soften_mask
from .pipeline.config import load_config, make_config
from .pipeline.passes import generate, place_lifted, run_furniture_pass, run_small_object_pass
from .pipeline.validate import validate_scene
from .utils.helpers import display_event_summary, display_scene_summary, events_to_frame
from .viz.debug import render_debug
from .viz.layout import plot_scene_layout

__all__ = [
    # Pipeline entrypoint
    "generate",
    "load_config",
    "make_config",
    "run_furniture_pass",
    "run_small_object_pass",
    "place_lifted",
    "validate_scene",
    # Scene model
    "Room",
    "SceneState",
    "load_scene",
    "save_scene",
    "describe_scene",
    # Geometry and rendering
    "Aabb3",
    "CameraView",
    "DepthMap",
    "camera_from_lookat",
    "load_depth",
    "save_depth",
    "rasterize",
    "occupancy",
    "floor_visibility",
    # Perception
    "room_views",
    "object_view",
    "build_inpaint_mask",
    "soften_mask",
    "select_reference_pixels",
    "rescale_depth",
    "lift_instance",
    "load_mock_script",
    "mock_backends",
    # Layout
    "derive_floor_constraints",
    "derive_wall_constraints",
    "dump_constraints",
    "dfs_place",
    "place_wall_objects",
    "place_small_object",
    "choose_asset",
    "demo_catalog",
    "load_catalog",
    "save_catalog",
    # Display and visualization
    "events_to_frame",
    "display_scene_summary",
    "display_event_summary",
    "plot_scene_layout",
    "render_debug",
]
