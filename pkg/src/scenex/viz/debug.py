"""Debug rasters: depth, instance ids and inpaint masks as PNG files."""

import logging
from pathlib import Path
from typing import Dict, Union

import matplotlib
import matplotlib.pyplot as plt
import numpy as np

from scenex.core.errors import EmptyMaskError, UsageError
from scenex.core.geometry import CameraView, DepthMap, save_depth
from scenex.core.render import InstanceIdMap, rasterize, render_rgb
from scenex.core.scene import SceneState
from scenex.perception.views import (
    InpaintMask,
    MaskProvenance,
    MaskSettings,
    build_inpaint_mask,
    room_views,
    soften_mask,
)

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CMAP = "viridis"


def save_depth_png(depth: DepthMap, path: Union[str, Path], cmap: str = DEFAULT_DEPTH_CMAP) -> Path:
    """Color-mapped depth; invalid pixels are black."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rgb = np.zeros(depth.values.shape + (3,))
    if depth.valid.any():
        d = depth.values
        lo, hi = d[depth.valid].min(), d[depth.valid].max()
        norm = (d - lo) / max(hi - lo, 1e-9)
        rgb = matplotlib.colormaps[cmap](norm)[..., :3]
        rgb[~depth.valid] = 0.0
    plt.imsave(path, rgb)
    return path


def save_id_png(id_map: InstanceIdMap, path: Union[str, Path]) -> Path:
    """Instance ids in a categorical palette; the room shell is grey."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    palette = matplotlib.colormaps["tab20"]
    rgb = np.full(id_map.ids.shape + (3,), 0.3)
    for k in np.unique(id_map.ids[id_map.ids >= 0]):
        rgb[id_map.ids == k] = palette(int(k) % 20)[:3]
    plt.imsave(path, rgb)
    return path


def save_mask_png(mask: InpaintMask, path: Union[str, Path]) -> Path:
    """Mask weights as a grayscale image (white = inpaint)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.imsave(path, mask.weights, cmap="gray", vmin=0.0, vmax=1.0)
    return path


def room_camera(scene: SceneState, view: int) -> CameraView:
    """The ``view``-th room camera of a scene."""
    cameras = room_views(scene.room).cameras
    if not 0 <= view < len(cameras):
        raise UsageError(f"view must be in [0, {len(cameras) - 1}], got {view}")
    return cameras[view]


def render_debug(
    scene: SceneState,
    view: int,
    output_dir: Union[str, Path] = "results/debug",
    png: bool = True,
    settings: MaskSettings = MaskSettings(),
) -> Dict[str, Path]:
    """
    Render one room view of a scene and write its debug artifacts.

    Always writes the raw depth raster (``view<K>.depth``); with ``png`` also
    the depth, id, RGB and room-centered mask images.

    Returns:
        Mapping from artifact name to written path
    """
    cam = room_camera(scene, view)
    depth, ids = rasterize(scene, cam)
    out = Path(output_dir)
    stem = f"view{view}"
    written = {"depth": save_depth(out / f"{stem}.depth", depth)}
    if not png:
        return written

    written["depth_png"] = save_depth_png(depth, out / f"{stem}-depth.png")
    written["ids_png"] = save_id_png(ids, out / f"{stem}-ids.png")
    rgb_path = out / f"{stem}-rgb.png"
    plt.imsave(rgb_path, render_rgb(depth, ids))
    written["rgb_png"] = rgb_path
    try:
        mask = build_inpaint_mask(MaskProvenance.ROOM_CENTERED, (depth, ids), cam, settings=settings)
    except EmptyMaskError as exc:
        logger.warning("no mask for view %d: %s", view, exc)
        return written
    written["mask_png"] = save_mask_png(mask, out / f"{stem}-mask.png")
    soft = soften_mask(mask, *settings.softening(cam.width, cam.height))
    written["soft_mask_png"] = save_mask_png(soft, out / f"{stem}-mask-soft.png")
    return written
