"""Pipeline configuration, loaded from YAML or JSON."""

import os
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from scenex.core.errors import UsageError
from scenex.core.geometry import DEFAULT_FOV_DEG, DEFAULT_RESOLUTION
from scenex.core.scene import Opening, Room
from scenex.layout.assets import DEFAULT_EMBED_DIM, DEFAULT_LAMBDA, DEFAULT_TOP_K
from scenex.layout.constraints import (
    DEFAULT_ALIGN_EPS,
    DEFAULT_BENEATH_EPS,
    DEFAULT_EDGE_EPS,
    DEFAULT_FAR_EPS,
    DEFAULT_MIDDLE_EPS,
    DEFAULT_NEAR_EPS,
    DEFAULT_OVERLAP_FRAC,
    DEFAULT_WALL_ADJACENT_EPS,
    ConstraintThresholds,
)
from scenex.layout.placer import (
    DEFAULT_BRANCH,
    DEFAULT_GRID_STEP,
    DEFAULT_MAX_NODES,
    DEFAULT_OVERSIZE_TOL,
    DEFAULT_SHELF_SPACING,
    ScoringWeights,
)
from scenex.perception.gateway import (
    DEFAULT_ATTEMPTS,
    DEFAULT_BACKOFF_S,
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_MIN_COUNT_ROOM,
    DEFAULT_MIN_COUNT_SMALL,
    DEFAULT_SAMPLES_PER_VIEW,
    DEFAULT_TIMEOUT_S,
    GatewaySettings,
)
from scenex.perception.views import (
    DEFAULT_EYE_HEIGHT,
    DEFAULT_LOOK_HEIGHT,
    DEFAULT_MAX_VIEWS,
    DEFAULT_OCCUPANCY_THRESHOLD,
    DEFAULT_ON_TOP_PITCH_DEG,
    DEFAULT_VIEW_MARGIN,
    MaskSettings,
)

ENV_SEED = "SCENEX_SEED"
DEFAULT_CAPTION = "a cozy living room"
DEFAULT_OUTPUT_DIR = "results"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OpeningConfig(_Section):
    wall: int
    offset: float
    width: float
    height: float
    bottom: float = 0.0
    kind: str = "door"


class RoomConfig(_Section):
    extent: Tuple[float, float]
    wall_height: float = 2.8
    origin: Tuple[float, float] = (0.0, 0.0)
    openings: List[OpeningConfig] = Field(default_factory=list)

    def to_room(self) -> Room:
        return Room(
            extent=self.extent,
            wall_height=self.wall_height,
            origin=self.origin,
            openings=tuple(Opening(**op.model_dump()) for op in self.openings),
        )


class ViewsConfig(_Section):
    eye_height: float = DEFAULT_EYE_HEIGHT
    look_height: float = DEFAULT_LOOK_HEIGHT
    fov_deg: float = DEFAULT_FOV_DEG
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    occupancy_threshold: float = DEFAULT_OCCUPANCY_THRESHOLD
    max_views: int = DEFAULT_MAX_VIEWS
    on_top_pitch_deg: float = DEFAULT_ON_TOP_PITCH_DEG
    view_margin: float = DEFAULT_VIEW_MARGIN


class MaskConfig(_Section):
    center_width_frac: float = 0.7
    center_height_frac: float = 0.6
    cube_shrink: float = 0.9
    cube_top_height: float = 0.35
    erosion_radius_px: Optional[int] = None
    blur_sigma_px: Optional[float] = None

    def to_settings(self) -> MaskSettings:
        return MaskSettings(**self.model_dump())


class ConstraintsConfig(_Section):
    edge_eps: float = DEFAULT_EDGE_EPS
    middle_eps: float = DEFAULT_MIDDLE_EPS
    near_eps: float = DEFAULT_NEAR_EPS
    far_eps: float = DEFAULT_FAR_EPS
    align_eps: float = DEFAULT_ALIGN_EPS
    overlap_frac: float = DEFAULT_OVERLAP_FRAC
    wall_adjacent_eps: float = DEFAULT_WALL_ADJACENT_EPS
    beneath_eps: float = DEFAULT_BENEATH_EPS
    rotation_fallback: bool = True

    def to_thresholds(self) -> ConstraintThresholds:
        return ConstraintThresholds(**self.model_dump(exclude={"rotation_fallback"}))


class ScoringConfig(_Section):
    w_loc: float = 1.0
    w_rotation: float = 5.0
    w_cur: float = 1.0
    c: float = 1.0
    delta_floor: float = 0.01
    w_relation: float = 1.0

    def to_weights(self) -> ScoringWeights:
        return ScoringWeights(**self.model_dump())


class SearchConfig(_Section):
    grid_step: float = DEFAULT_GRID_STEP
    branch: Optional[int] = DEFAULT_BRANCH
    max_nodes: Optional[int] = DEFAULT_MAX_NODES
    trace: bool = False


class GatewayConfig(_Section):
    attempts: int = DEFAULT_ATTEMPTS
    backoff_s: float = DEFAULT_BACKOFF_S
    timeout_s: float = DEFAULT_TIMEOUT_S
    min_count_room: int = DEFAULT_MIN_COUNT_ROOM
    min_count_small: int = DEFAULT_MIN_COUNT_SMALL
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    samples_per_view: int = DEFAULT_SAMPLES_PER_VIEW
    depth_is_ray_length: bool = False
    prompt_fallback: bool = True

    def to_settings(self) -> GatewaySettings:
        return GatewaySettings(**self.model_dump(exclude={"prompt_fallback"}))


class EndpointsConfig(_Section):
    inpaint_url: Optional[str] = None
    depth_url: Optional[str] = None
    annotate_url: Optional[str] = None
    detect_url: Optional[str] = None


class AssetsConfig(_Section):
    catalog: Optional[str] = None
    top_k: int = DEFAULT_TOP_K
    lam: float = DEFAULT_LAMBDA
    embed_dim: int = DEFAULT_EMBED_DIM


class SmallObjectsConfig(_Section):
    enabled: bool = True
    oversize_tol: float = DEFAULT_OVERSIZE_TOL
    shelf_spacing: float = DEFAULT_SHELF_SPACING


class PipelineConfig(_Section):
    """
    Everything a run needs. Exactly one of ``room`` and ``scene_file`` is set;
    a scene file starts the run from a pre-arranged scene.
    """

    room: Optional[RoomConfig] = None
    scene_file: Optional[str] = None
    caption: str = DEFAULT_CAPTION
    seed: int = 0
    output_dir: str = DEFAULT_OUTPUT_DIR
    mock_script: Optional[str] = None
    endpoints: EndpointsConfig = Field(default_factory=EndpointsConfig)
    views: ViewsConfig = Field(default_factory=ViewsConfig)
    mask: MaskConfig = Field(default_factory=MaskConfig)
    constraints: ConstraintsConfig = Field(default_factory=ConstraintsConfig)
    scoring: ScoringConfig = Field(default_factory=ScoringConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    assets: AssetsConfig = Field(default_factory=AssetsConfig)
    small_objects: SmallObjectsConfig = Field(default_factory=SmallObjectsConfig)

    @model_validator(mode="after")
    def _one_room_source(self):
        if (self.room is None) == (self.scene_file is None):
            raise ValueError("set exactly one of 'room' and 'scene_file'")
        return self


def _seed_from_env() -> Optional[int]:
    raw = os.getenv(ENV_SEED)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{ENV_SEED} must be an integer, got {raw!r}")


def make_config(data: dict, base_dir: Union[str, Path, None] = None) -> PipelineConfig:
    """
    Validate a config mapping. ``SCENEX_SEED`` supplies the seed when the
    mapping has none; relative paths resolve against ``base_dir``.

    Raises:
        UsageError: the mapping is not a valid configuration.
    """
    data = dict(data or {})
    if "seed" not in data:
        env_seed = _seed_from_env()
        if env_seed is not None:
            data["seed"] = env_seed
    try:
        config = PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise UsageError(f"invalid configuration:\n{exc}") from exc
    if base_dir is not None:
        base = Path(base_dir)
        updates = {}
        for key in ("scene_file", "mock_script"):
            value = getattr(config, key)
            if value is not None and not Path(value).is_absolute():
                updates[key] = str(base / value)
        if config.assets.catalog is not None and not Path(config.assets.catalog).is_absolute():
            updates["assets"] = config.assets.model_copy(
                update={"catalog": str(base / config.assets.catalog)}
            )
        config = config.model_copy(update=updates)
    return config


def load_config(path: Union[str, Path]) -> PipelineConfig:
    """Read a YAML or JSON config file."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise UsageError(f"cannot parse {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise UsageError(f"{path} must hold a mapping, got {type(data).__name__}")
    return make_config(data or {}, base_dir=path.parent)
