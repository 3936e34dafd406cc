"""Document QA over long visual documents.

A lens-then-reason pipeline: a page navigator samples candidate evidence
pages from interleaved page images and OCR text, an element localizer
crops the visual elements on those pages, an answer sampler draws
several reasoning-answer candidates over the evidence, and an
adjudicator selects the final answer. Ships with an evaluation harness
for page- and element-level localization metrics and a serving layer
for the interactive workbench UI.
"""

from .document import BBox, Document, PageRecord, VisualElement, get_page, load_document
from .gateway import (
    GatewayConfig,
    ImagePart,
    ModelGateway,
    ModelRequest,
    ModelResponse,
    TextPart,
    complete,
    fingerprint,
)
from .harness import BenchmarkRecord, load_records, recompute_from_trace, run_benchmark, sweep
from .localizer import EvidenceItem, EvidenceSet, localize
from .metrics import (
    ElementMatchResult,
    PageMetrics,
    iou,
    match_elements,
    page_metrics,
    score_answer,
)
from .navigator import (
    NavigationResult,
    NavigatorConfig,
    NavigatorParse,
    build_navigator_request,
    chunk_pages,
    navigate,
    parse_navigator_response,
)
from .pipeline import PipelineConfig, ask
from .reasoning import (
    Adjudication,
    CandidateAnswer,
    ReasonerConfig,
    adjudicate,
    build_adjudicator_input,
    build_sampler_request,
    sample_answers,
)
from .tools import LayoutManifest, ToolBackendConfig, crop_element, detect_layout, ocr_page
from .trace import RunTrace, load_run, load_trace, new_run_id, save_trace

__version__ = "0.1.0"

__all__ = [
    "Adjudication",
    "BBox",
    "BenchmarkRecord",
    "CandidateAnswer",
    "Document",
    "ElementMatchResult",
    "EvidenceItem",
    "EvidenceSet",
    "GatewayConfig",
    "ImagePart",
    "LayoutManifest",
    "ModelGateway",
    "ModelRequest",
    "ModelResponse",
    "NavigationResult",
    "NavigatorConfig",
    "NavigatorParse",
    "PageMetrics",
    "PageRecord",
    "PipelineConfig",
    "ReasonerConfig",
    "RunTrace",
    "TextPart",
    "ToolBackendConfig",
    "VisualElement",
    "adjudicate",
    "ask",
    "build_adjudicator_input",
    "build_navigator_request",
    "build_sampler_request",
    "chunk_pages",
    "complete",
    "crop_element",
    "detect_layout",
    "fingerprint",
    "get_page",
    "iou",
    "load_document",
    "load_records",
    "load_run",
    "load_trace",
    "localize",
    "match_elements",
    "navigate",
    "new_run_id",
    "ocr_page",
    "page_metrics",
    "parse_navigator_response",
    "recompute_from_trace",
    "run_benchmark",
    "sample_answers",
    "save_trace",
    "score_answer",
    "sweep",
]
