"""Answer sampling and adjudication over an evidence set.

The sampler draws several independent reasoning-answer candidates at
nonzero temperature from the evidence pages, their zoomed-in element
crops, and their OCR text. The adjudicator then judges the candidates
on text alone (it is never shown the document) and returns the final
answer. Unanimous candidates short-circuit the judge call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import prompts
from .errors import AllCandidatesUnparseable, UnparseableResponse
from .gateway import (
    GatewayConfig,
    ImagePart,
    ModelGateway,
    ModelRequest,
    TextPart,
    as_gateway,
)
from .localizer import EvidenceSet
from .parsing import recover_json_object, require_str_field

log = logging.getLogger(__name__)

ZOOM_DELIMITER = "---- Zoomed-in Figures and Charts of this page ----"


@dataclass(frozen=True)
class CandidateAnswer:
    reasoning: str
    answer: str
    sample_index: int


@dataclass(frozen=True)
class Adjudication:
    meta_analysis: str
    final_answer: str
    candidates: tuple[CandidateAnswer, ...]
    short_circuited: bool = False


@dataclass(frozen=True)
class ReasonerConfig:
    t_a: int = 8
    temperature: float = 0.7
    adjudicator_temperature: float = 0.0
    short_circuit: bool = True

    def __post_init__(self):
        if self.t_a < 1:
            raise ValueError("t_a must be >= 1")


def build_sampler_request(
    evidence: EvidenceSet,
    temperature: float = 0.7,
    candidate_count: int = 1,
) -> ModelRequest:
    """Assemble the answer-sampler prompt.

    Per evidence page: the page image, then (when crops exist) the
    zoom-in delimiter followed by each crop, then the page's OCR
    Markdown. The question comes last.
    """
    parts: list = []
    for item in evidence.items:
        idx = item.page.index
        parts.append(
            ImagePart(data=item.page.image_ref.read_bytes(), label=f"Page {idx}")
        )
        if item.crops:
            parts.append(TextPart(ZOOM_DELIMITER))
            ordinals: dict[str, int] = {}
            for element, crop_bytes in item.crops:
                ordinals[element.kind] = ordinals.get(element.kind, 0) + 1
                parts.append(
                    ImagePart(
                        data=crop_bytes,
                        label=f"Page {idx}, {element.kind} {ordinals[element.kind]}",
                    )
                )
        if item.text is not None:
            parts.append(TextPart(item.text))
    parts.append(TextPart(f"Question: {evidence.question}"))
    return ModelRequest(
        system_prompt=prompts.load(prompts.ANSWER_SAMPLER),
        parts=tuple(parts),
        temperature=temperature,
        candidate_count=candidate_count,
    )


def parse_answer_response(raw: str) -> tuple[str, str]:
    """Parse a two-field {analysis, prediction} reply; both must be non-empty."""
    obj = recover_json_object(raw)
    analysis = require_str_field(obj, "analysis")
    prediction = require_str_field(obj, "prediction")
    if not analysis or not prediction:
        raise UnparseableResponse("analysis and prediction must be non-empty")
    return analysis, prediction


def sample_answers(
    evidence: EvidenceSet,
    cfg: ReasonerConfig,
    gw: GatewayConfig | ModelGateway,
) -> list[CandidateAnswer]:
    """Draw T_a candidates in one multi-candidate call; drop malformed ones."""
    gateway = as_gateway(gw)
    req = build_sampler_request(
        evidence, temperature=cfg.temperature, candidate_count=cfg.t_a
    )
    resp = gateway.complete(req)
    survivors: list[CandidateAnswer] = []
    for position, cand in enumerate(resp.candidates, start=1):
        try:
            reasoning, answer = parse_answer_response(cand)
        except Exception as exc:
            log.warning("dropping malformed candidate %d: %s", position, exc)
            continue
        survivors.append(
            CandidateAnswer(
                reasoning=reasoning, answer=answer, sample_index=len(survivors) + 1
            )
        )
    if not survivors:
        raise AllCandidatesUnparseable(f"all {cfg.t_a} candidates malformed")
    return survivors


def build_adjudicator_input(question: str, candidates) -> str:
    """Render the judge's text-only input block, one section per agent."""
    out = [f"**Question:**\n{question}\n\n**List of Agent Analyses and Answers:**\n"]
    for i, cand in enumerate(candidates, start=1):
        out.append(f"Agent {i}\nAnalysis: {cand.reasoning}\nAnswer: {cand.answer}\n")
    return "".join(out)


def adjudicate(
    question: str,
    candidates,
    cfg: ReasonerConfig,
    gw: GatewayConfig | ModelGateway,
) -> Adjudication:
    """Select the final answer from the candidates.

    A single candidate, or byte-identical answers across all candidates,
    short-circuits without a model call (configurable off). The request
    carries no images; the judge sees only the candidates' text.
    """
    candidates = tuple(candidates)
    if not candidates:
        raise ValueError("adjudicate requires at least one candidate")
    if cfg.short_circuit:
        answers = {c.answer for c in candidates}
        if len(candidates) == 1 or len(answers) == 1:
            return Adjudication(
                meta_analysis="All candidate answers are identical; adjudication skipped.",
                final_answer=candidates[0].answer,
                candidates=candidates,
                short_circuited=True,
            )
    gateway = as_gateway(gw)
    req = ModelRequest(
        system_prompt=prompts.load(prompts.ADJUDICATOR),
        parts=(TextPart(build_adjudicator_input(question, candidates)),),
        temperature=cfg.adjudicator_temperature,
        candidate_count=1,
    )
    resp = gateway.complete(req)
    meta, final = parse_answer_response(resp.candidates[0])
    return Adjudication(
        meta_analysis=meta,
        final_answer=final,
        candidates=candidates,
        short_circuited=False,
    )
