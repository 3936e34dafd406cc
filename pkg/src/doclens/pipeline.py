"""End-to-end question answering: navigate, localize, sample, adjudicate.

`ask` wires the four stages over a loaded document, records a full
RunTrace, and honors the ablation flags used by the evaluation harness:

- ``no_lens``      raw pages + OCR go straight to reasoning (no
                   navigation stage, no element crops)
- ``no_reasoning`` lens output goes to a single temperature-0 answer
                   call (no adjudication stage)
- ``no_sampling``  navigator samples once (T_e = 1)
- ``no_ocr``       images only, navigator and evidence both
- ``oracle_pages`` gold evidence pages replace navigation
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from .document import Document, get_page
from .errors import StageError
from .gateway import GatewayConfig, ModelGateway, set_inflight_cap
from .localizer import EvidenceItem, EvidenceSet, localize
from .navigator import NavigatorConfig, navigate
from .reasoning import Adjudication, ReasonerConfig, adjudicate, sample_answers
from .tools import ToolBackendConfig
from .trace import RunTrace, new_run_id, save_trace

log = logging.getLogger(__name__)

ABLATIONS = ("no_lens", "no_reasoning", "no_sampling", "no_ocr", "oracle_pages")


@dataclass(frozen=True)
class PipelineConfig:
    navigator: NavigatorConfig = field(default_factory=NavigatorConfig)
    reasoner: ReasonerConfig = field(default_factory=ReasonerConfig)
    tools: ToolBackendConfig = field(default_factory=ToolBackendConfig)
    navigator_gateway: GatewayConfig = field(default_factory=GatewayConfig)
    reasoner_gateway: GatewayConfig = field(default_factory=GatewayConfig)
    ablations: frozenset = frozenset()
    oracle_pages: tuple[int, ...] | None = None
    inflight_cap: int | None = None

    def __post_init__(self):
        unknown = set(self.ablations) - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablation flags: {sorted(unknown)}")


def config_snapshot(cfg: PipelineConfig) -> dict:
    """The trace's view of the config: every knob, no filesystem paths."""
    return {
        "navigator": {
            "t_e": cfg.navigator.t_e,
            "temperature": cfg.navigator.temperature,
            "chunk_size": cfg.navigator.chunk_size,
            "auto_chunk": cfg.navigator.auto_chunk,
            "force_chunk": cfg.navigator.force_chunk,
            "include_ocr": cfg.navigator.include_ocr,
        },
        "reasoner": {
            "t_a": cfg.reasoner.t_a,
            "temperature": cfg.reasoner.temperature,
            "adjudicator_temperature": cfg.reasoner.adjudicator_temperature,
            "short_circuit": cfg.reasoner.short_circuit,
        },
        "tools": {"mode": cfg.tools.mode},
        "navigator_gateway": {
            "backend": cfg.navigator_gateway.backend,
            "model_name": cfg.navigator_gateway.model_name,
            "supports_candidate_count": cfg.navigator_gateway.supports_candidate_count,
        },
        "reasoner_gateway": {
            "backend": cfg.reasoner_gateway.backend,
            "model_name": cfg.reasoner_gateway.model_name,
            "supports_candidate_count": cfg.reasoner_gateway.supports_candidate_count,
        },
        "ablations": sorted(cfg.ablations),
        "oracle_pages": list(cfg.oracle_pages) if cfg.oracle_pages is not None else None,
    }


def _noop(stage: str, status: str, trace: RunTrace) -> None:
    pass


def ask(
    doc: Document,
    question: str,
    cfg: PipelineConfig,
    question_id: str = "q0",
    run_id: str | None = None,
    runs_dir=None,
    on_stage=None,
) -> tuple[Adjudication, RunTrace]:
    """Answer one question over a document, tracing every stage.

    Stage errors are wrapped in StageError with the stage tag after the
    partial trace is persisted (when runs_dir is given).
    """
    emit = on_stage or _noop
    trace = RunTrace(
        run_id=run_id or new_run_id(),
        question_id=question_id,
        doc_id=doc.doc_id,
        question=question,
        config=config_snapshot(cfg),
    )
    ab = set(cfg.ablations)
    if cfg.inflight_cap:
        set_inflight_cap(cfg.inflight_cap)
    nav_gw = ModelGateway(cfg.navigator_gateway)
    rea_gw = ModelGateway(cfg.reasoner_gateway)
    include_text = "no_ocr" not in ab

    def fail(stage: str, exc: Exception):
        trace.error = {"stage": stage, "message": str(exc)}
        if runs_dir is not None:
            save_trace(trace, runs_dir)
        emit(stage, "error", trace)
        raise StageError(stage, exc, trace=trace) from exc

    # -- navigation --
    emit("navigating", "started", trace)
    try:
        e_pred = _run_navigation(doc, question, cfg, ab, nav_gw, trace)
    except Exception as exc:
        fail("navigating", exc)
    emit("navigating", "completed", trace)

    # -- localization --
    emit("localizing", "started", trace)
    try:
        evidence = _run_localization(doc, question, cfg, ab, e_pred, include_text, trace)
    except Exception as exc:
        fail("localizing", exc)
    emit("localizing", "completed", trace)

    # -- sampling --
    emit("sampling", "started", trace)
    direct = "no_reasoning" in ab
    rcfg = cfg.reasoner
    if direct:
        rcfg = replace(rcfg, t_a=1, temperature=0.0)
    try:
        before = len(rea_gw.calls)
        candidates = sample_answers(evidence, rcfg, rea_gw)
        for call in rea_gw.calls[before:]:
            trace.add_call("sampling", call)
    except Exception as exc:
        fail("sampling", exc)
    trace.stages["sampling"] = {
        "mode": "direct" if direct else "sampled",
        "t_a": rcfg.t_a,
        "temperature": rcfg.temperature,
        "candidates": [
            {"sample_index": c.sample_index, "reasoning": c.reasoning, "answer": c.answer}
            for c in candidates
        ],
    }
    emit("sampling", "completed", trace)

    # -- adjudication --
    if direct:
        adjudication = Adjudication(
            meta_analysis="",
            final_answer=candidates[0].answer,
            candidates=tuple(candidates),
            short_circuited=True,
        )
    else:
        emit("adjudicating", "started", trace)
        try:
            before = len(rea_gw.calls)
            adjudication = adjudicate(question, candidates, cfg.reasoner, rea_gw)
            for call in rea_gw.calls[before:]:
                trace.add_call("adjudication", call)
        except Exception as exc:
            fail("adjudicating", exc)
        trace.stages["adjudication"] = {
            "meta_analysis": adjudication.meta_analysis,
            "final_answer": adjudication.final_answer,
            "short_circuited": adjudication.short_circuited,
        }
        emit("adjudicating", "completed", trace)

    if runs_dir is not None:
        save_trace(trace, runs_dir)
    return adjudication, trace


def _run_navigation(doc, question, cfg, ab, nav_gw, trace) -> tuple[int, ...]:
    if "no_lens" in ab:
        # whole document goes to reasoning; there is no navigation stage
        return tuple(range(1, doc.page_count + 1))
    if "oracle_pages" in ab:
        if cfg.oracle_pages is None:
            raise ValueError("oracle_pages ablation requires gold pages")
        pages = tuple(sorted(set(cfg.oracle_pages)))
        for p in pages:
            if p < 1 or p > doc.page_count:
                raise ValueError(f"oracle page {p} outside 1..{doc.page_count}")
        trace.stages["navigation"] = {
            "mode": "oracle",
            "e_pred": list(pages),
            "samples": [],
            "chunks": [],
            "raw": [],
            "failures": [],
        }
        return pages

    nav_cfg = cfg.navigator
    if "no_sampling" in ab:
        nav_cfg = replace(nav_cfg, t_e=1)
    if "no_ocr" in ab:
        nav_cfg = replace(nav_cfg, include_ocr=False)
    result = navigate(doc, question, nav_cfg, nav_gw)
    for call in nav_gw.calls:
        trace.add_call("navigation", call)
    trace.stages["navigation"] = {
        "mode": "model",
        "e_pred": list(result.e_pred),
        "samples": [sorted(s) for s in result.samples],
        "chunks": [list(c) for c in result.chunks],
        "raw": [
            {
                "analysis": p.analysis,
                "located_pages": sorted(p.located_pages),
                "prediction": p.prediction,
                "warnings": list(p.warnings),
            }
            for p in result.raw
        ],
        "failures": list(result.failures),
    }
    return result.e_pred


def _run_localization(doc, question, cfg, ab, e_pred, include_text, trace) -> EvidenceSet:
    if "no_lens" in ab:
        items = []
        for idx in e_pred:
            page = get_page(doc, idx)
            text = page.ocr_text if include_text else None
            items.append(EvidenceItem(page=page, text=text, crops=()))
        evidence = EvidenceSet(question=question, items=tuple(items))
        mode = "bypass"
    else:
        evidence = localize(
            doc, e_pred, cfg.tools, question=question, include_text=include_text
        )
        mode = "tools"
    trace.stages["localization"] = {
        "mode": mode,
        "pages": list(evidence.pages),
        "crop_counts": {str(item.page.index): len(item.crops) for item in evidence.items},
        "text_present": {str(item.page.index): item.text is not None for item in evidence.items},
        "elements": {
            str(item.page.index): [
                {"kind": el.kind, "bbox": el.bbox.as_list()} for el, _ in item.crops
            ]
            for item in evidence.items
        },
        "failures": [f for item in evidence.items for f in item.failures],
    }
    return evidence
