"""Adapters for document-parsing tools: OCR, layout detection, cropping.

Three backend modes. ``cached`` reads OCR text and layout elements
precomputed into the bundle (the default: parsing is an offline step).
``http`` talks to a live parsing service. ``mock`` produces deterministic
synthetic output for tests.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import httpx
from PIL import Image, UnidentifiedImageError

from .document import VISUAL_KINDS, BBox, PageRecord, VisualElement
from .errors import BBoxOutOfBounds, ImageDecode, ToolProtocolError, ToolUnavailable

TOOL_MODES = ("cached", "http", "mock")


@dataclass(frozen=True)
class LayoutManifest:
    """Visual elements of one page, in the detector's reading order."""

    page_index: int
    elements: tuple[VisualElement, ...]


@dataclass(frozen=True)
class ToolBackendConfig:
    mode: str = "cached"
    endpoint: str | None = None
    cache_dir: Path | None = None

    def __post_init__(self):
        if self.mode not in TOOL_MODES:
            raise ValueError(f"unknown tool mode: {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ValueError("http mode requires an endpoint")


def round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def load_page_image(page: PageRecord) -> Image.Image:
    try:
        img = Image.open(page.image_ref)
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageDecode(f"page {page.index}: {exc}")
    if img.size != (page.width_px, page.height_px):
        raise ImageDecode(
            f"page {page.index}: raster is {img.size[0]}x{img.size[1]}, "
            f"manifest says {page.width_px}x{page.height_px}"
        )
    return img


def ocr_page(page: PageRecord, cfg: ToolBackendConfig, doc_id: str = "") -> str:
    """Return the page's Markdown text via the configured backend."""
    if cfg.mode == "cached":
        if page.ocr_text is None:
            raise ToolUnavailable(f"no cached OCR text for page {page.index}")
        return page.ocr_text
    if cfg.mode == "mock":
        return _mock_ocr(doc_id, page.index)
    return _http_text(cfg, "/ocr", page)


def detect_layout(page: PageRecord, cfg: ToolBackendConfig, doc_id: str = "") -> LayoutManifest:
    """Return the visual elements of a page, non-visual blocks filtered out."""
    if cfg.mode == "cached":
        return LayoutManifest(page_index=page.index, elements=tuple(page.elements))
    if cfg.mode == "mock":
        return _mock_layout(doc_id, page)
    raw = _http_json(cfg, "/layout", page)
    return _layout_from_json(raw, page)


def crop_element(page: PageRecord, bbox: BBox) -> Image.Image:
    """Crop a bbox out of the page raster.

    The result has pixel dimensions (round(x2-x1), round(y2-y1)), rounding
    half-up; the window is shifted (never resized) if rounding would push
    it past the raster edge.
    """
    if bbox.x1 < 0 or bbox.y1 < 0 or bbox.x2 > page.width_px or bbox.y2 > page.height_px:
        raise BBoxOutOfBounds(page.index, f"{bbox.as_list()}")
    img = load_page_image(page)
    w = round_half_up(bbox.x2 - bbox.x1)
    h = round_half_up(bbox.y2 - bbox.y1)
    left = min(round_half_up(bbox.x1), page.width_px - w)
    top = min(round_half_up(bbox.y1), page.height_px - h)
    return img.crop((left, top, left + w, top + h))


def crop_cache_path(cfg: ToolBackendConfig, doc_id: str, page_index: int, k: int) -> Path | None:
    if cfg.cache_dir is None:
        return None
    return Path(cfg.cache_dir) / doc_id / f"p{page_index}_e{k}.png"


def write_crop_cache(path: Path, image: Image.Image) -> None:
    """Persist a crop with write-then-atomic-rename so readers never see partials."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            image.save(fh, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- http backend ---

def _http_post(cfg: ToolBackendConfig, route: str, page: PageRecord) -> httpx.Response:
    url = cfg.endpoint.rstrip("/") + route
    try:
        body = Path(page.image_ref).read_bytes()
    except OSError as exc:
        raise ImageDecode(f"page {page.index}: {exc}")
    try:
        resp = httpx.post(url, content=body, timeout=60.0)
    except httpx.TransportError as exc:
        raise ToolUnavailable(f"{url}: {exc}")
    if resp.status_code != 200:
        raise ToolProtocolError(f"{url} returned {resp.status_code}")
    return resp


def _http_text(cfg: ToolBackendConfig, route: str, page: PageRecord) -> str:
    return _http_post(cfg, route, page).text


def _http_json(cfg: ToolBackendConfig, route: str, page: PageRecord):
    resp = _http_post(cfg, route, page)
    try:
        return resp.json()
    except ValueError as exc:
        raise ToolProtocolError(f"layout response not JSON: {exc}")


def _layout_from_json(raw, page: PageRecord) -> LayoutManifest:
    if not isinstance(raw, dict) or not isinstance(raw.get("elements"), list):
        raise ToolProtocolError("layout response must be an object with an elements list")
    elements = []
    for entry in raw["elements"]:
        if not isinstance(entry, dict):
            raise ToolProtocolError(f"bad layout element: {entry!r}")
        kind = entry.get("kind")
        if kind not in VISUAL_KINDS:
            continue  # plain text, titles, etc. never become visual elements
        box = entry.get("bbox")
        if not isinstance(box, list) or len(box) != 4:
            raise ToolProtocolError(f"bad bbox in layout element: {entry!r}")
        try:
            coords = [float(v) for v in box]
        except (TypeError, ValueError):
            raise ToolProtocolError(f"non-numeric bbox: {box!r}")
        # live detectors drift past edges by fractions of a pixel; clamp,
        # and drop anything degenerate after clamping
        x1 = min(max(coords[0], 0.0), page.width_px)
        y1 = min(max(coords[1], 0.0), page.height_px)
        x2 = min(max(coords[2], 0.0), page.width_px)
        y2 = min(max(coords[3], 0.0), page.height_px)
        if x1 >= x2 or y1 >= y2:
            continue
        elements.append(VisualElement(kind=kind, bbox=BBox(x1, y1, x2, y2)))
    return LayoutManifest(page_index=page.index, elements=tuple(elements))


# --- mock backend ---

def _mock_seed(doc_id: str, index: int) -> int:
    digest = hashlib.sha256(f"{doc_id}:{index}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


def _mock_ocr(doc_id: str, index: int) -> str:
    seed = _mock_seed(doc_id, index)
    return f"## Page {index}\n\nSynthetic OCR text for document {doc_id}, page {index} (token {seed % 10000}).\n"


def _mock_layout(doc_id: str, page: PageRecord) -> LayoutManifest:
    seed = _mock_seed(doc_id, page.index)
    n = seed % 3
    elements = []
    for k in range(n):
        kind = VISUAL_KINDS[(seed + k) % len(VISUAL_KINDS)]
        # deterministic boxes in the upper-left 80% of the page, stacked vertically
        x1 = page.width_px * 0.1
        y1 = page.height_px * (0.1 + 0.3 * k)
        x2 = page.width_px * 0.7
        y2 = y1 + page.height_px * 0.2
        elements.append(VisualElement(kind=kind, bbox=BBox(x1, y1, x2, y2)))
    elements.sort(key=lambda el: (el.bbox.y1, el.bbox.x1))
    return LayoutManifest(page_index=page.index, elements=tuple(elements))
