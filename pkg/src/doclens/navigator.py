"""Page navigation: find the evidence pages for a question.

The navigator prompts the model with the question and every page in a
range as interleaved (image, OCR text) pairs, samples several candidate
page sets at nonzero temperature, and unions them. Documents too long
for one request are split into fixed-size chunks whose results merge by
plain union, so page indices are always document-global.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from . import prompts
from .document import Document, get_page
from .errors import ContextLimitExceeded, MissingField, NavigationFailed
from .gateway import (
    GatewayConfig,
    ImagePart,
    ModelGateway,
    ModelRequest,
    TextPart,
    as_gateway,
)
from .parsing import parse_int_list, recover_json_object, require_str_field

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NavigatorParse:
    """The three-field navigator reply, range-filtered."""

    analysis: str
    located_pages: frozenset[int]
    prediction: str
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class NavigationResult:
    e_pred: tuple[int, ...]                 # sorted ascending
    samples: tuple[frozenset[int], ...]     # per sampling iteration, chunks unioned
    chunks: tuple[tuple[int, int], ...]     # inclusive page ranges requested
    raw: tuple[NavigatorParse, ...]         # per (chunk, sample), chunk-major order
    failures: tuple[str, ...] = ()          # unparseable candidates, for the trace


@dataclass(frozen=True)
class NavigatorConfig:
    t_e: int = 8
    temperature: float = 0.7
    chunk_size: int = 50
    auto_chunk: bool = True
    force_chunk: bool = False
    include_ocr: bool = True

    def __post_init__(self):
        if self.t_e < 1:
            raise ValueError("t_e must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")


def chunk_pages(n_pages: int, k: int) -> list[tuple[int, int]]:
    """Split 1..n_pages into disjoint runs of k pages (last may be shorter)."""
    if n_pages < 1 or k < 1:
        raise ValueError("n_pages and k must be >= 1")
    return [(start, min(start + k - 1, n_pages)) for start in range(1, n_pages + 1, k)]


def build_navigator_request(
    doc: Document,
    question: str,
    page_range: tuple[int, int],
    include_ocr: bool = True,
    temperature: float = 0.7,
    candidate_count: int = 1,
) -> ModelRequest:
    """Assemble the navigator prompt for one contiguous page range.

    Parts: one question text (stating the absolute range so chunked runs
    keep document-global indices), then per page its image followed by its
    OCR text when present and not ablated.
    """
    start, end = page_range
    header = (
        f"Question: {question}\n\n"
        f"You are given pages {start} to {end} of a document with "
        f"{doc.page_count} pages. Page indices are document-global and start at 1."
    )
    parts: list = [TextPart(header)]
    for index in range(start, end + 1):
        page = get_page(doc, index)
        parts.append(ImagePart(data=Path(page.image_ref).read_bytes(), label=f"Page {index}"))
        if include_ocr and page.ocr_text is not None:
            parts.append(TextPart(f"[Page {index} OCR]\n{page.ocr_text}"))
    return ModelRequest(
        system_prompt=prompts.load(prompts.PAGE_NAVIGATOR),
        parts=tuple(parts),
        temperature=temperature,
        candidate_count=candidate_count,
    )


def parse_navigator_response(raw: str, n: int) -> NavigatorParse:
    """Parse one navigator candidate into its three fields.

    Page indices outside 1..n are dropped with a recorded warning; a
    Markdown code fence around the JSON is tolerated.
    """
    obj = recover_json_object(raw)
    analysis = require_str_field(obj, "analysis")
    prediction = require_str_field(obj, "prediction")
    if "located_pages" not in obj:
        raise MissingField("located_pages")
    warnings: list[str] = []
    pages = parse_int_list(obj["located_pages"], warnings)
    kept = set()
    for p in pages:
        if 1 <= p <= n:
            kept.add(p)
        else:
            warnings.append(f"dropping out-of-range page index {p} (document has {n} pages)")
    for w in warnings:
        log.warning("navigator parse: %s", w)
    return NavigatorParse(
        analysis=analysis,
        located_pages=frozenset(kept),
        prediction=prediction,
        warnings=tuple(warnings),
    )


def navigate(
    doc: Document,
    question: str,
    cfg: NavigatorConfig,
    gw: GatewayConfig | ModelGateway,
) -> NavigationResult:
    """Predict the evidence page set for a question.

    Issues one multi-candidate request per chunk (candidate_count = T_e,
    temperature = tau) and unions every parsed page set. A context
    overflow on the whole-document request falls back to chunked
    navigation when auto_chunk is set.
    """
    gateway = as_gateway(gw)
    if cfg.force_chunk:
        ranges = chunk_pages(doc.page_count, cfg.chunk_size)
    else:
        ranges = [(1, doc.page_count)]

    try:
        return _navigate_ranges(doc, question, cfg, gateway, ranges)
    except ContextLimitExceeded:
        if cfg.force_chunk or not cfg.auto_chunk or doc.page_count <= 1:
            raise
        log.info("whole-document request overflowed context; chunking at %d", cfg.chunk_size)
        ranges = chunk_pages(doc.page_count, cfg.chunk_size)
        return _navigate_ranges(doc, question, cfg, gateway, ranges)


def _navigate_ranges(
    doc: Document,
    question: str,
    cfg: NavigatorConfig,
    gateway: ModelGateway,
    ranges: list[tuple[int, int]],
) -> NavigationResult:
    # parsed[c][j] is chunk c's sample j (None when unparseable); assembly
    # is a deterministic fold ordered by chunk start then sample index
    parsed: list[list[NavigatorParse | None]] = []
    failures: list[str] = []
    for page_range in ranges:
        req = build_navigator_request(
            doc,
            question,
            page_range,
            include_ocr=cfg.include_ocr,
            temperature=cfg.temperature,
            candidate_count=cfg.t_e,
        )
        resp = gateway.complete(req)
        per_chunk: list[NavigatorParse | None] = []
        for j, cand in enumerate(resp.candidates, start=1):
            try:
                per_chunk.append(parse_navigator_response(cand, doc.page_count))
            except Exception as exc:
                failures.append(f"chunk {page_range[0]}-{page_range[1]} sample {j}: {exc}")
                log.warning("dropping unparseable navigator candidate: %s", exc)
                per_chunk.append(None)
        parsed.append(per_chunk)

    if all(p is None for chunk in parsed for p in chunk):
        raise NavigationFailed("every navigator candidate was unparseable")

    samples: list[frozenset[int]] = []
    for j in range(cfg.t_e):
        merged: set[int] = set()
        for per_chunk in parsed:
            if per_chunk[j] is not None:
                merged |= per_chunk[j].located_pages
        samples.append(frozenset(merged))

    union: set[int] = set()
    for s in samples:
        union |= s
    raw = tuple(p for per_chunk in parsed for p in per_chunk if p is not None)
    return NavigationResult(
        e_pred=tuple(sorted(union)),
        samples=tuple(samples),
        chunks=tuple(ranges),
        raw=raw,
        failures=tuple(failures),
    )
