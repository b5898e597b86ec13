"""scenex: 3D room layout generation by inpainting views and lifting what appears.

The :mod:`scenex.api` module exposes a small convenience facade so
users can write::

    import scenex as sx
    path = sx.generate(sx.load_config("configs/living_room.yaml"))

while more advanced workflows can continue to import from the
``core``, ``perception``, ``layout``, ``pipeline`` and ``viz`` subpackages
directly.

## pipeline

    # Large furniture view by view, then small objects on receptacles
    config = sx.load_config("configs/living_room.yaml")
    path = sx.generate(config)

    # Inspect the result
    scene = sx.load_scene(path)
    sx.display_scene_summary(scene)
    sx.plot_scene_layout(scene, plot_path="results/layout.png")

Scene files are canonical JSON: the same config and seed give byte-identical
output.
"""

from .api import (  # noqa: F401
    Aabb3,
    CameraView,
    DepthMap,
    Room,
    SceneState,
    build_inpaint_mask,
    camera_from_lookat,
    choose_asset,
    demo_catalog,
    derive_floor_constraints,
    derive_wall_constraints,
    describe_scene,
    dfs_place,
    display_event_summary,
    display_scene_summary,
    dump_constraints,
    events_to_frame,
    floor_visibility,
    generate,
    lift_instance,
    load_catalog,
    load_config,
    load_depth,
    load_mock_script,
    load_scene,
    make_config,
    mock_backends,
    object_view,
    occupancy,
    place_lifted,
    place_small_object,
    place_wall_objects,
    plot_scene_layout,
    rasterize,
    render_debug,
    rescale_depth,
    room_views,
    run_furniture_pass,
    run_small_object_pass,
    save_catalog,
    save_depth,
    save_scene,
    select_reference_pixels,
    soften_mask,
    validate_scene,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # Pipeline - ONE generation entrypoint
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
