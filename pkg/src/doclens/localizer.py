"""Element localization: enrich predicted pages into the evidence set.

For each predicted page this attaches its OCR text, runs layout
detection, and crops every visual element (table, figure, chart) out of
the page raster. A failed crop degrades that element only; the page
keeps its remaining crops.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

from PIL import Image

from .document import Document, PageRecord, VisualElement, get_page
from .errors import IndexOutOfRange, ToolUnavailable
from .tools import (
    ToolBackendConfig,
    crop_cache_path,
    crop_element,
    detect_layout,
    ocr_page,
    write_crop_cache,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvidenceItem:
    """One evidence page: its record, text, and cropped visual elements."""

    page: PageRecord
    text: str | None
    crops: tuple[tuple[VisualElement, bytes], ...]
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class EvidenceSet:
    question: str
    items: tuple[EvidenceItem, ...]

    @property
    def pages(self) -> tuple[int, ...]:
        return tuple(item.page.index for item in self.items)


def _encode_png(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def localize(
    doc: Document,
    e_pred,
    tools: ToolBackendConfig,
    question: str = "",
    include_text: bool = True,
) -> EvidenceSet:
    """Build the evidence set for the predicted pages, ascending by index."""
    indices = sorted(set(e_pred))
    for idx in indices:
        if idx < 1 or idx > doc.page_count:
            raise IndexOutOfRange(idx, doc.page_count)

    items: list[EvidenceItem] = []
    for idx in indices:
        page = get_page(doc, idx)
        text: str | None = None
        if include_text:
            try:
                text = ocr_page(page, tools, doc_id=doc.doc_id)
            except ToolUnavailable:
                text = None
        manifest = detect_layout(page, tools, doc_id=doc.doc_id)
        crops: list[tuple[VisualElement, bytes]] = []
        failures: list[str] = []
        for k, element in enumerate(manifest.elements):
            try:
                image = crop_element(page, element.bbox)
            except Exception as exc:
                failures.append(f"page {idx} element {k}: {exc}")
                log.warning("crop failed, keeping remaining elements: %s", exc)
                continue
            cache_path = crop_cache_path(tools, doc.doc_id, idx, k)
            if cache_path is not None:
                write_crop_cache(cache_path, image)
                element = VisualElement(
                    kind=element.kind, bbox=element.bbox, crop_ref=str(cache_path)
                )
            crops.append((element, _encode_png(image)))
        items.append(
            EvidenceItem(page=page, text=text, crops=tuple(crops), failures=tuple(failures))
        )
    return EvidenceSet(question=question, items=tuple(items))
