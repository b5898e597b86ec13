"""HTTP clients for remotely hosted perception services.

Every endpoint takes and returns a JSON document; images travel as
base64-encoded PNG. Field names are fixed: ``image_b64``, ``mask_b64``,
``prompt``, ``negative_prompt``, ``seed``, ``depth_b64``, ``tags`` and
``detections``.
"""

import base64
import io
import logging
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np
import requests
from PIL import Image
from pydantic import BaseModel, Field, ValidationError

from scenex.core.errors import ServiceError, UsageError
from scenex.core.scene import ObjectCategory
from scenex.perception.gateway import (
    DEFAULT_TIMEOUT_S,
    Backends,
    Detection,
    GatewaySettings,
    InpaintRequest,
    InpaintResponse,
)

logger = logging.getLogger(__name__)

ENV_ENDPOINTS = {
    "inpaint": "SCENEX_INPAINT_URL",
    "depth": "SCENEX_DEPTH_URL",
    "annotate": "SCENEX_ANNOTATE_URL",
    "detect": "SCENEX_DETECT_URL",
}


def encode_png(array: np.ndarray) -> str:
    """Base64 PNG of a uint8 RGB (H, W, 3) or grayscale (H, W) array."""
    arr = np.asarray(array)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_png(data: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        return np.array(img)


def encode_depth(values: np.ndarray) -> str:
    raw = np.ascontiguousarray(values, dtype="<f4")
    return base64.b64encode(raw.tobytes()).decode("ascii")


def decode_depth(data: str, shape: Tuple[int, int]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(data), dtype="<f4")
    if raw.size != shape[0] * shape[1]:
        raise ServiceError(f"depth payload has {raw.size} values, expected {shape[0] * shape[1]}")
    return raw.reshape(shape).astype(float)


# wire schemas ---------------------------------------------------------------


class InpaintPayload(BaseModel):
    image_b64: str
    mask_b64: str
    prompt: str
    negative_prompt: str = ""
    seed: int = 0


class InpaintReply(BaseModel):
    image_b64: str


class DepthPayload(BaseModel):
    image_b64: str


class DepthReply(BaseModel):
    depth_b64: str


class AnnotatePayload(BaseModel):
    image_b64: Optional[str] = None
    prompt: str


class AnnotateReply(BaseModel):
    text: str


class DetectPayload(BaseModel):
    image_b64: str
    tags: List[str]


class WireDetection(BaseModel):
    name: str
    box: Tuple[int, int, int, int]
    mask_b64: str
    category: str = "floor-object"
    description: str = ""


class DetectReply(BaseModel):
    detections: List[WireDetection] = Field(default_factory=list)


class RemoteClient:
    """Blocking JSON POST client for one service."""

    def __init__(self, url: str, timeout_s: float = DEFAULT_TIMEOUT_S, session=None):
        if not url:
            raise UsageError("remote service url is empty")
        self.url = url.rstrip("/")
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def post(self, route: str, payload: BaseModel, reply_model):
        url = f"{self.url}/{route.lstrip('/')}"
        try:
            resp = self.session.post(url, json=payload.model_dump(), timeout=self.timeout_s)
            resp.raise_for_status()
            return reply_model.model_validate(resp.json())
        except requests.RequestException as exc:
            raise ServiceError(f"POST {url} failed: {exc}") from exc
        except (ValidationError, ValueError) as exc:
            raise ServiceError(f"POST {url} returned an invalid reply: {exc}") from exc


class RemoteInpainter:
    def __init__(self, client: RemoteClient):
        self.client = client

    def inpaint(self, request: InpaintRequest) -> InpaintResponse:
        mask = np.round(request.mask.weights * 255.0).astype(np.uint8)
        payload = InpaintPayload(
            image_b64=encode_png(request.image),
            mask_b64=encode_png(mask),
            prompt=request.prompt,
            negative_prompt=request.negative_prompt,
            seed=int(request.seed),
        )
        reply = self.client.post("/inpaint", payload, InpaintReply)
        image = decode_png(reply.image_b64)
        if image.ndim == 3 and image.shape[2] == 4:
            image = image[..., :3]
        return InpaintResponse(image)


class RemoteDepth:
    def __init__(self, client: RemoteClient):
        self.client = client

    def estimate_depth(self, image: np.ndarray) -> np.ndarray:
        reply = self.client.post("/depth", DepthPayload(image_b64=encode_png(image)), DepthReply)
        return decode_depth(reply.depth_b64, image.shape[:2])


class RemoteAnnotator:
    """Vision-language annotator; text-only prompts omit the image."""

    def __init__(self, client: RemoteClient):
        self.client = client

    def annotate(self, image: np.ndarray, prompt: str) -> str:
        payload = AnnotatePayload(image_b64=encode_png(image), prompt=prompt)
        return self.client.post("/annotate", payload, AnnotateReply).text

    def complete(self, prompt: str) -> str:
        return self.client.post("/annotate", AnnotatePayload(prompt=prompt), AnnotateReply).text

    def face_to(self, names: Sequence[str], scene_summary: str) -> List[Tuple[str, str]]:
        prompt = (
            f"{scene_summary}\n\nObjects: {', '.join(names)}.\n"
            "For each object that should face another object, answer one line "
            "'subject -> target'. Use only the names listed."
        )
        pairs = []
        for line in self.complete(prompt).splitlines():
            subject, sep, target = line.partition("->")
            if sep and subject.strip() and target.strip():
                pairs.append((subject.strip().lower(), target.strip().lower()))
        return pairs

    def receptacles(self, names: Sequence[str]) -> List[str]:
        prompt = (
            f"Objects: {', '.join(names)}.\n"
            "Which of these can hold small objects on top of or inside them? "
            "Answer with a comma-separated list of names."
        )
        reply = self.complete(prompt)
        return [n.strip().lower() for n in reply.replace("\n", ",").split(",") if n.strip()]


class RemoteDetector:
    def __init__(self, client: RemoteClient):
        self.client = client

    def detect(self, image: np.ndarray, tags: Sequence[str]) -> List[Detection]:
        payload = DetectPayload(image_b64=encode_png(image), tags=list(tags))
        reply = self.client.post("/detect", payload, DetectReply)
        out = []
        for wire in reply.detections:
            mask = decode_png(wire.mask_b64)
            if mask.ndim == 3:
                mask = mask[..., 0]
            category = (
                ObjectCategory.WALL if wire.category == "wall-object" else ObjectCategory.FLOOR
            )
            try:
                out.append(Detection(wire.name, wire.description, category, wire.box, mask > 0))
            except ValueError as exc:
                logger.warning("dropping malformed detection %s: %s", wire.name, exc)
        return out


def resolve_endpoints(
    inpaint_url: Optional[str] = None,
    depth_url: Optional[str] = None,
    annotate_url: Optional[str] = None,
    detect_url: Optional[str] = None,
) -> dict:
    """Endpoint urls, with environment variables taking precedence."""
    given = {
        "inpaint": inpaint_url,
        "depth": depth_url,
        "annotate": annotate_url,
        "detect": detect_url,
    }
    return {key: os.getenv(env) or given[key] for key, env in ENV_ENDPOINTS.items()}


def remote_backends(
    endpoints: dict,
    settings: GatewaySettings = GatewaySettings(),
) -> Backends:
    """
    Backends talking to remote services.

    Raises:
        UsageError: an endpoint is missing.
    """
    missing = [key for key in ENV_ENDPOINTS if not endpoints.get(key)]
    if missing:
        names = ", ".join(ENV_ENDPOINTS[k] for k in missing)
        raise UsageError(f"no endpoint configured for {missing}; set {names} or use a mock script")
    session = requests.Session()

    def client(key):
        return RemoteClient(endpoints[key], timeout_s=settings.timeout_s, session=session)

    return Backends(
        inpainter=RemoteInpainter(client("inpaint")),
        depth=RemoteDepth(client("depth")),
        annotator=RemoteAnnotator(client("annotate")),
        detector=RemoteDetector(client("detect")),
        settings=settings,
    )
