"""Asset catalog, text retrieval and scale / appearance based selection."""

import base64
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from scenex.core.errors import EmptyCatalogError

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5
DEFAULT_LAMBDA = 0.5
DEFAULT_EMBED_DIM = 64
HISTOGRAM_BINS = 4
UNIT_NORM_TOL = 1e-6

CATALOG_COLUMNS = [
    "asset_id",
    "name",
    "description",
    "mesh_bbox",
    "text_embedding",
    "image_embedding",
    "mesh_path",
]


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0 else vec


@dataclass(frozen=True, eq=False)
class AssetRecord:
    asset_id: str
    name: str
    description: str
    mesh_bbox: Tuple[float, float, float]
    text_embedding: np.ndarray
    image_embedding: np.ndarray
    mesh_path: Optional[str] = None

    def __post_init__(self):
        bbox = tuple(float(v) for v in self.mesh_bbox)
        if len(bbox) != 3 or min(bbox) <= 0:
            raise ValueError(f"{self.asset_id}: mesh_bbox must be three positive lengths, got {bbox}")
        object.__setattr__(self, "mesh_bbox", bbox)
        for name in ("text_embedding", "image_embedding"):
            vec = np.asarray(getattr(self, name), dtype=float).ravel()
            if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_NORM_TOL:
                raise ValueError(
                    f"{self.asset_id}: {name} norm {np.linalg.norm(vec):.6f} is not 1"
                )
            object.__setattr__(self, name, vec)


@dataclass(frozen=True)
class SelectionScore:
    asset_id: str
    scale_term: float
    embed_term: float
    combined: float


class HashEmbedder:
    """
    Offline text embedder: every token seeds a Gaussian vector and a text
    embeds to the normalized sum over its tokens.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, seed: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed

    def _token(self, token: str) -> np.ndarray:
        h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=str(self.seed).encode("ascii"))
        rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
        return rng.normal(size=self.dim)

    def embed(self, text: str) -> np.ndarray:
        tokens = "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()
        total = np.zeros(self.dim)
        for token in tokens:
            total += self._token(token)
        return _unit(total)

    def __call__(self, text: str) -> np.ndarray:
        return self.embed(text)


def name_color(name: str) -> np.ndarray:
    """Stable display color of an object name."""
    digest = hashlib.sha1(name.encode("utf-8")).digest()
    return np.frombuffer(digest[:3], dtype=np.uint8).copy() | np.uint8(0x20)


def color_histogram(pixels: np.ndarray, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """Unit-norm joint RGB histogram of an (n, 3) uint8 pixel list."""
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 3)
    idx = (px * bins) // 256
    flat = (idx[:, 0] * bins + idx[:, 1]) * bins + idx[:, 2]
    hist = np.bincount(flat, minlength=bins**3).astype(float)
    return _unit(hist)


def crop_embedding(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Appearance embedding of the masked pixels of an RGB image."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cannot embed an empty crop")
    return color_histogram(np.asarray(image)[mask])


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.dot(a, b) / denom) if denom > 0 else 0.0


def retrieve_candidates(
    description: str,
    catalog: Sequence[AssetRecord],
    k: int = DEFAULT_TOP_K,
    embedder: Optional[HashEmbedder] = None,
) -> List[AssetRecord]:
    """
    Top-k assets by text-embedding cosine similarity, ties by asset_id.

    Raises:
        EmptyCatalogError: the catalog is empty.
    """
    if not catalog:
        raise EmptyCatalogError("asset catalog is empty")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    embedder = embedder or HashEmbedder(dim=len(catalog[0].text_embedding))
    query = embedder.embed(description)
    matrix = np.stack([rec.text_embedding for rec in catalog])
    if matrix.shape[1] != len(query):
        raise ValueError(
            f"embedder dim {len(query)} does not match catalog dim {matrix.shape[1]}"
        )
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
    sims = np.divide(matrix @ query, norms, out=np.zeros(len(catalog)), where=norms > 0)
    ids = np.array([rec.asset_id for rec in catalog])
    order = np.lexsort((ids, -sims))
    return [catalog[i] for i in order[:k]]


def _normalized(dims: Sequence[float]) -> np.ndarray:
    d = np.asarray(dims, dtype=float)
    top = float(d.max())
    if top <= 0:
        raise ValueError(f"dims must be positive, got {tuple(dims)}")
    return d / top


def scale_distance(target_dims: Sequence[float], mesh_dims: Sequence[float]) -> float:
    """
    L1 distance between max-normalized dims. The two horizontal target axes
    are also tried swapped, since the asset may stand rotated a quarter turn.
    """
    mesh = _normalized(mesh_dims)
    tx, ty, tz = target_dims
    return min(
        float(np.abs(_normalized((tx, ty, tz)) - mesh).sum()),
        float(np.abs(_normalized((ty, tx, tz)) - mesh).sum()),
    )


def score_assets(
    candidates: Sequence[AssetRecord],
    target_dims: Sequence[float],
    crop: Optional[np.ndarray] = None,
    lam: float = DEFAULT_LAMBDA,
) -> List[SelectionScore]:
    """Selection scores, in candidate order."""
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    out = []
    for rec in candidates:
        scale_term = scale_distance(target_dims, rec.mesh_bbox)
        if crop is None:
            embed_term = 0.0
        else:
            if len(crop) != len(rec.image_embedding):
                raise ValueError(
                    f"crop embedding dim {len(crop)} does not match {rec.asset_id} "
                    f"image embedding dim {len(rec.image_embedding)}"
                )
            embed_term = _cosine(np.asarray(crop, dtype=float), rec.image_embedding)
        out.append(SelectionScore(rec.asset_id, scale_term, embed_term, embed_term - lam * scale_term))
    return out


def select_asset(
    candidates: Sequence[AssetRecord],
    target_dims: Sequence[float],
    crop: Optional[np.ndarray] = None,
    lam: float = DEFAULT_LAMBDA,
) -> AssetRecord:
    """
    Pick the candidate with the best appearance / proportion trade-off.

    Args:
        candidates: Retrieved assets
        target_dims: Lifted box dims (x, y, z); only proportions matter
        crop: Appearance embedding of the detection; None to match on scale only
        lam: Weight of the proportion term

    Returns:
        The argmax of ``cosine(crop, image) - lam * scale_distance``, ties by asset_id

    Examples:
        >>> select_asset(candidates, (2.0, 0.9, 0.8)).name
        'sofa'
    """
    if not candidates:
        raise EmptyCatalogError("no candidate assets to select from")
    scores = score_assets(candidates, target_dims, crop, lam)
    best = min(range(len(candidates)), key=lambda k: (-scores[k].combined, candidates[k].asset_id))
    return candidates[best]


def choose_asset(
    description: str,
    target_dims: Sequence[float],
    catalog: Sequence[AssetRecord],
    crop: Optional[np.ndarray] = None,
    k: int = DEFAULT_TOP_K,
    lam: float = DEFAULT_LAMBDA,
    embedder: Optional[HashEmbedder] = None,
) -> AssetRecord:
    """Retrieve by description, then select by proportions and appearance."""
    candidates = retrieve_candidates(description, catalog, k, embedder)
    if crop is not None and len(crop) != len(candidates[0].image_embedding):
        logger.debug("crop embedding dim %d unusable; selecting on scale only", len(crop))
        crop = None
    return select_asset(candidates, target_dims, crop, lam)


# ---------------------------------------------------------------------------
# catalog file
# ---------------------------------------------------------------------------


def _encode_vec(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f4").tobytes()).decode("ascii")


def _decode_vec(data: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(data), dtype="<f4").astype(float)


def save_catalog(records: Sequence[AssetRecord], path: Union[str, Path]) -> Path:
    """Write a catalog as JSON lines with base64 float32 embeddings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [
            {
                "asset_id": rec.asset_id,
                "name": rec.name,
                "description": rec.description,
                "mesh_bbox": list(rec.mesh_bbox),
                "text_embedding": _encode_vec(rec.text_embedding),
                "image_embedding": _encode_vec(rec.image_embedding),
                "mesh_path": rec.mesh_path,
            }
            for rec in records
        ],
        columns=CATALOG_COLUMNS,
    )
    df.to_json(path, orient="records", lines=True, force_ascii=False)
    return path


def load_catalog(path: Union[str, Path]) -> List[AssetRecord]:
    """
    Read a JSON-lines catalog.

    Raises:
        EmptyCatalogError: the file holds no records.
        ValueError: a record is malformed or an embedding is not unit-norm.
    """
    path = Path(path)
    if path.stat().st_size == 0:
        raise EmptyCatalogError(f"catalog {path} is empty")
    df = pd.read_json(path, lines=True, dtype=False)
    missing = [c for c in CATALOG_COLUMNS[:-1] if c not in df.columns]
    if missing:
        raise ValueError(f"catalog {path} lacks columns {missing}")
    records = []
    for row in df.itertuples(index=False):
        mesh_path = getattr(row, "mesh_path", None)
        records.append(
            AssetRecord(
                asset_id=str(row.asset_id),
                name=str(row.name),
                description=str(row.description),
                mesh_bbox=tuple(row.mesh_bbox),
                text_embedding=_unit(_decode_vec(row.text_embedding)),
                image_embedding=_unit(_decode_vec(row.image_embedding)),
                mesh_path=mesh_path if isinstance(mesh_path, str) else None,
            )
        )
    if not records:
        raise EmptyCatalogError(f"catalog {path} is empty")
    logger.info("loaded %d assets from %s", len(records), path)
    return records


DEMO_ASSETS = (
    ("sofa", (2.0, 0.9, 0.85)),
    ("armchair", (0.8, 0.8, 0.9)),
    ("chair", (0.5, 0.5, 0.9)),
    ("dining table", (1.6, 0.9, 0.75)),
    ("coffee table", (1.1, 0.6, 0.45)),
    ("desk", (1.4, 0.7, 0.75)),
    ("bed", (1.6, 2.0, 0.5)),
    ("wardrobe", (1.2, 0.6, 2.0)),
    ("bookshelf", (0.9, 0.35, 1.8)),
    ("cabinet", (0.9, 0.45, 0.9)),
    ("tv stand", (1.6, 0.45, 0.5)),
    ("nightstand", (0.5, 0.4, 0.55)),
    ("tv", (1.2, 0.08, 0.7)),
    ("painting", (0.9, 0.04, 0.6)),
    ("mirror", (0.6, 0.03, 0.9)),
    ("clock", (0.35, 0.05, 0.35)),
    ("cup", (0.08, 0.08, 0.1)),
    ("book", (0.15, 0.22, 0.04)),
    ("vase", (0.12, 0.12, 0.3)),
    ("lamp", (0.3, 0.3, 0.5)),
    ("plant", (0.3, 0.3, 0.6)),
    ("laptop", (0.33, 0.23, 0.02)),
    ("bowl", (0.18, 0.18, 0.08)),
    ("box", (0.3, 0.2, 0.2)),
)


def demo_catalog(embedder: Optional[HashEmbedder] = None) -> List[AssetRecord]:
    """Small built-in catalog of common furniture and household objects."""
    embedder = embedder or HashEmbedder()
    records = []
    for k, (name, dims) in enumerate(DEMO_ASSETS):
        records.append(
            AssetRecord(
                asset_id=f"demo-{k:03d}-{name.replace(' ', '-')}",
                name=name,
                description=f"a {name}",
                mesh_bbox=dims,
                text_embedding=embedder.embed(name),
                image_embedding=color_histogram(name_color(name)[None, :]),
            )
        )
    return records
