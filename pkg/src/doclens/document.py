"""Document data model: page bundles loaded from disk and validated.

A bundle is a directory with a ``manifest.json`` describing pages, their
raster images, optional per-page OCR markdown, and the visual elements
(tables, figures, charts) detected on each page. Bundles are immutable
after load; anything derived (crops, caches) lives elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BBoxOutOfBounds,
    IndexOutOfRange,
    ManifestParse,
    MissingManifest,
    PageGap,
)

VISUAL_KINDS = ("table", "figure", "chart")


@dataclass(frozen=True)
class BBox:
    """Pixel-space rectangle, origin top-left, x1 < x2 and y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"bbox must have positive area: {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class VisualElement:
    """A visual layout block. Only table/figure/chart kinds are ever stored."""

    kind: str
    bbox: BBox
    crop_ref: str | None = None

    def __post_init__(self):
        if self.kind not in VISUAL_KINDS:
            raise ValueError(f"not a visual element kind: {self.kind!r}")


@dataclass(frozen=True)
class PageRecord:
    index: int
    image_ref: Path
    width_px: int
    height_px: int
    ocr_text: str | None = None
    ocr_ref: Path | None = None
    elements: tuple[VisualElement, ...] = ()

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(f"page {self.index}: non-positive dimensions")
        for el in self.elements:
            b = el.bbox
            if b.x1 < 0 or b.y1 < 0 or b.x2 > self.width_px or b.y2 > self.height_px:
                raise BBoxOutOfBounds(self.index, f"{b.as_list()} on {self.width_px}x{self.height_px}")


@dataclass(frozen=True)
class Document:
    doc_id: str
    pages: tuple[PageRecord, ...]

    @property
    def page_count(self) -> int:
        return len(self.pages)

    def __post_init__(self):
        if not self.pages:
            raise ValueError("document must have at least one page")
        for pos, page in enumerate(self.pages, start=1):
            if page.index != pos:
                raise PageGap(pos)


def get_page(doc: Document, index: int) -> PageRecord:
    """Look up a page by its 1-based index."""
    if index < 1 or index > doc.page_count:
        raise IndexOutOfRange(index, doc.page_count)
    return doc.pages[index - 1]


def _parse_bbox(raw, page_index: int) -> BBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ManifestParse(f"page {page_index}: bbox must be [x1,y1,x2,y2], got {raw!r}")
    try:
        coords = [float(v) for v in raw]
    except (TypeError, ValueError):
        raise ManifestParse(f"page {page_index}: non-numeric bbox {raw!r}")
    try:
        return BBox(*coords)
    except ValueError as exc:
        raise ManifestParse(f"page {page_index}: {exc}")


def load_document(bundle_path: str | Path) -> Document:
    """Load and validate a document bundle directory.

    Raises MissingManifest, ManifestParse, PageGap, or BBoxOutOfBounds on
    any violation; a returned Document always satisfies every invariant.
    """
    bundle = Path(bundle_path)
    manifest_path = bundle / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(str(manifest_path))
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestParse(str(exc))

    if not isinstance(manifest, dict):
        raise ManifestParse("top-level value must be an object")
    doc_id = manifest.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ManifestParse("doc_id must be a non-empty string")
    raw_pages = manifest.get("pages")
    if not isinstance(raw_pages, list) or not raw_pages:
        raise ManifestParse("pages must be a non-empty list")

    by_index: dict[int, PageRecord] = {}
    for raw in raw_pages:
        if not isinstance(raw, dict):
            raise ManifestParse(f"page entry must be an object, got {raw!r}")
        idx = raw.get("index")
        if not isinstance(idx, int) or idx < 1:
            raise ManifestParse(f"page index must be a positive integer, got {idx!r}")
        if idx in by_index:
            raise ManifestParse(f"duplicate page index {idx}")
        image_rel = raw.get("image")
        if not isinstance(image_rel, str):
            raise ManifestParse(f"page {idx}: image must be a relative path")
        image_path = bundle / image_rel
        if not image_path.is_file():
            raise ManifestParse(f"page {idx}: image file not found: {image_rel}")
        width = raw.get("width_px")
        height = raw.get("height_px")
        if not isinstance(width, int) or not isinstance(height, int) or width <= 0 or height <= 0:
            raise ManifestParse(f"page {idx}: width_px/height_px must be positive integers")

        ocr_rel = raw.get("ocr_text")
        ocr_text: str | None = None
        ocr_path: Path | None = None
        if ocr_rel is not None:
            if not isinstance(ocr_rel, str):
                raise ManifestParse(f"page {idx}: ocr_text must be a relative path or null")
            ocr_path = bundle / ocr_rel
            if not ocr_path.is_file():
                raise ManifestParse(f"page {idx}: ocr file not found: {ocr_rel}")
            ocr_text = ocr_path.read_text(encoding="utf-8")

        elements = []
        for k, raw_el in enumerate(raw.get("elements", [])):
            if not isinstance(raw_el, dict):
                raise ManifestParse(f"page {idx}: element {k} must be an object")
            kind = raw_el.get("kind")
            if kind not in VISUAL_KINDS:
                raise ManifestParse(f"page {idx}: element {k} kind must be one of {VISUAL_KINDS}")
            bbox = _parse_bbox(raw_el.get("bbox"), idx)
            if bbox.x1 < 0 or bbox.y1 < 0 or bbox.x2 > width or bbox.y2 > height:
                raise BBoxOutOfBounds(idx, f"element {k}: {bbox.as_list()}")
            elements.append(VisualElement(kind=kind, bbox=bbox))

        by_index[idx] = PageRecord(
            index=idx,
            image_ref=image_path,
            width_px=width,
            height_px=height,
            ocr_text=ocr_text,
            ocr_ref=ocr_path,
            elements=tuple(elements),
        )

    count = len(by_index)
    for i in range(1, count + 1):
        if i not in by_index:
            raise PageGap(i)
    # indices above the contiguous range are also gaps (e.g. {1,2,4})
    stray = max(by_index) if by_index else 0
    if stray > count:
        raise PageGap(min(set(range(1, stray + 1)) - set(by_index)))

    return Document(doc_id=doc_id, pages=tuple(by_index[i] for i in range(1, count + 1)))


def serialize_manifest(doc: Document, bundle: Path) -> dict:
    """Rebuild the manifest dict for a loaded document (paths relative to bundle)."""
    pages = []
    for page in doc.pages:
        entry: dict = {
            "index": page.index,
            "image": page.image_ref.relative_to(bundle).as_posix(),
            "width_px": page.width_px,
            "height_px": page.height_px,
            "ocr_text": page.ocr_ref.relative_to(bundle).as_posix() if page.ocr_ref else None,
            "elements": [
                {"kind": el.kind, "bbox": el.bbox.as_list()} for el in page.elements
            ],
        }
        pages.append(entry)
    return {"doc_id": doc.doc_id, "pages": pages}
