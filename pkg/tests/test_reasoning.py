from __future__ import annotations

import json

import pytest

from doclens import localize, prompts
from doclens.errors import AllCandidatesUnparseable, UnparseableResponse
from doclens.gateway import GatewayConfig, ImagePart, ModelGateway, TextPart, fingerprint
from doclens.localizer import EvidenceSet
from doclens.reasoning import (
    ZOOM_DELIMITER,
    CandidateAnswer,
    ReasonerConfig,
    adjudicate,
    build_adjudicator_input,
    build_sampler_request,
    sample_answers,
)
from doclens.tools import ToolBackendConfig
from fixtures_util import answer_candidate, write_script

CACHED = ToolBackendConfig(mode="cached")


def scripted(tmp_path, entries, name="reason.json") -> GatewayConfig:
    return GatewayConfig(backend="mock", mock_script=write_script(tmp_path / name, entries))


# --- sampler request assembly ---

def test_sampler_parts_with_crops(fix5_doc):
    evidence = localize(fix5_doc, {2}, CACHED, question="what grew?")
    req = build_sampler_request(evidence)
    # image, delimiter, crop, crop, ocr text, question
    assert len(req.parts) == 6
    assert isinstance(req.parts[0], ImagePart) and req.parts[0].label == "Page 2"
    assert isinstance(req.parts[1], TextPart) and req.parts[1].text == ZOOM_DELIMITER
    assert isinstance(req.parts[2], ImagePart) and req.parts[2].label == "Page 2, chart 1"
    assert isinstance(req.parts[3], ImagePart) and req.parts[3].label == "Page 2, table 1"
    assert isinstance(req.parts[4], TextPart) and req.parts[4].text.startswith("## Heading 2")
    assert req.parts[5].text == "Question: what grew?"
    assert req.system_prompt == prompts.load(prompts.ANSWER_SAMPLER)


def test_sampler_parts_without_crops(fix5_doc):
    evidence = localize(fix5_doc, {3}, CACHED, question="q")
    req = build_sampler_request(evidence)
    assert len(req.parts) == 3  # image, text, question; no delimiter
    assert all(p.text != ZOOM_DELIMITER for p in req.parts if isinstance(p, TextPart))


def test_sampler_parts_empty_evidence():
    req = build_sampler_request(EvidenceSet(question="q", items=()))
    assert len(req.parts) == 1
    assert req.parts[0].text == "Question: q"


def test_sampler_crop_ordinals_count_per_kind(fix5_doc):
    evidence = localize(fix5_doc, {2, 4}, CACHED, question="q")
    req = build_sampler_request(evidence)
    labels = [p.label for p in req.parts if isinstance(p, ImagePart)]
    assert labels == ["Page 2", "Page 2, chart 1", "Page 2, table 1", "Page 4", "Page 4, figure 1"]


# --- sampling ---

def test_sample_answers_in_order(fix5_doc, tmp_path):
    evidence = localize(fix5_doc, {2}, CACHED, question="q")
    cfg = ReasonerConfig(t_a=2)
    req = build_sampler_request(evidence, temperature=0.7, candidate_count=2)
    gw = scripted(tmp_path, [(fingerprint(req), [[
        answer_candidate("14", analysis="first look"),
        answer_candidate("15", analysis="second look"),
    ]])])
    out = sample_answers(evidence, cfg, gw)
    assert [(c.sample_index, c.answer) for c in out] == [(1, "14"), (2, "15")]


def test_not_answerable_preserved(fix5_doc, tmp_path):
    evidence = localize(fix5_doc, {1}, CACHED, question="q")
    cfg = ReasonerConfig(t_a=1)
    req = build_sampler_request(evidence, temperature=0.7, candidate_count=1)
    gw = scripted(tmp_path, [(fingerprint(req), [[answer_candidate("Not answerable")]])])
    assert sample_answers(evidence, cfg, gw)[0].answer == "Not answerable"


def test_malformed_candidate_dropped(fix5_doc, tmp_path):
    evidence = localize(fix5_doc, {1}, CACHED, question="q")
    cfg = ReasonerConfig(t_a=3)
    req = build_sampler_request(evidence, temperature=0.7, candidate_count=3)
    gw = scripted(tmp_path, [(fingerprint(req), [[
        answer_candidate("A"), "not json at all", answer_candidate("B"),
    ]])])
    out = sample_answers(evidence, cfg, gw)
    assert [(c.sample_index, c.answer) for c in out] == [(1, "A"), (2, "B")]


def test_all_candidates_malformed(fix5_doc, tmp_path):
    evidence = localize(fix5_doc, {1}, CACHED, question="q")
    cfg = ReasonerConfig(t_a=2)
    req = build_sampler_request(evidence, temperature=0.7, candidate_count=2)
    gw = scripted(tmp_path, [(fingerprint(req), [["nope", "{}"]])])
    with pytest.raises(AllCandidatesUnparseable):
        sample_answers(evidence, cfg, gw)


def test_empty_prediction_is_malformed(fix5_doc, tmp_path):
    evidence = localize(fix5_doc, {1}, CACHED, question="q")
    cfg = ReasonerConfig(t_a=2)
    req = build_sampler_request(evidence, temperature=0.7, candidate_count=2)
    gw = scripted(tmp_path, [(fingerprint(req), [[
        json.dumps({"analysis": "a", "prediction": ""}), answer_candidate("ok"),
    ]])])
    out = sample_answers(evidence, cfg, gw)
    assert len(out) == 1 and out[0].answer == "ok"


# --- adjudicator input ---

def cand(i, reasoning, answer):
    return CandidateAnswer(reasoning=reasoning, answer=answer, sample_index=i)


def test_adjudicator_input_exact_format():
    cands = [cand(1, "saw a chart", "14"), cand(2, "read the table", "15")]
    text = build_adjudicator_input("How many?", cands)
    assert text == (
        "**Question:**\nHow many?\n\n**List of Agent Analyses and Answers:**\n"
        "Agent 1\nAnalysis: saw a chart\nAnswer: 14\n"
        "Agent 2\nAnalysis: read the table\nAnswer: 15\n"
    )


def test_adjudicator_input_single():
    text = build_adjudicator_input("q", [cand(1, "r", "a")])
    assert "Agent 1" in text and "Agent 2" not in text


def test_adjudicator_input_embeds_newlines_verbatim():
    text = build_adjudicator_input("q", [cand(1, "line1\nline2", "ans\nwer")])
    assert "Analysis: line1\nline2\n" in text
    assert "Answer: ans\nwer\n" in text


# --- adjudication ---

def test_unanimity_short_circuits_without_call(tmp_path):
    cands = [cand(1, "r1", "14"), cand(2, "r2", "14")]
    gw = ModelGateway(scripted(tmp_path, [("*", [["should never be used"]])]))
    cfg = ReasonerConfig(t_a=2)
    adj = adjudicate("q", cands, cfg, gw)
    assert adj.final_answer == "14"
    assert adj.short_circuited
    assert gw.calls == []


def test_single_candidate_short_circuits(tmp_path):
    gw = ModelGateway(scripted(tmp_path, [("*", [["unused"]])]))
    adj = adjudicate("q", [cand(1, "r", "only")], ReasonerConfig(t_a=1), gw)
    assert adj.final_answer == "only"
    assert gw.calls == []


def test_adjudicator_selects_candidate(tmp_path):
    cands = [cand(1, "r1", "14"), cand(2, "r2", "15")]
    cfg = ReasonerConfig(t_a=2)
    from doclens.gateway import ModelRequest

    req = ModelRequest(
        system_prompt=prompts.load(prompts.ADJUDICATOR),
        parts=(TextPart(build_adjudicator_input("q", cands)),),
        temperature=cfg.adjudicator_temperature,
        candidate_count=1,
    )
    gw = ModelGateway(scripted(tmp_path, [(fingerprint(req), [[
        answer_candidate("15", analysis="agent 2 cites the table correctly"),
    ]])]))
    adj = adjudicate("q", cands, cfg, gw)
    assert adj.final_answer == "15"
    assert not adj.short_circuited
    assert adj.meta_analysis == "agent 2 cites the table correctly"


def test_adjudicator_request_has_no_images(tmp_path):
    cands = [cand(1, "r1", "14"), cand(2, "r2", "15")]
    gw = ModelGateway(scripted(tmp_path, [("*", [[answer_candidate("14")]])]))
    adjudicate("q", cands, ReasonerConfig(t_a=2), gw)
    assert len(gw.calls) == 1
    assert gw.calls[0].image_sizes == []


def test_short_circuit_disabled_calls_model(tmp_path):
    cands = [cand(1, "r1", "14"), cand(2, "r2", "14")]
    cfg = ReasonerConfig(t_a=2, short_circuit=False)
    gw = ModelGateway(scripted(tmp_path, [("*", [[answer_candidate("14")]])]))
    adj = adjudicate("q", cands, cfg, gw)
    assert not adj.short_circuited
    assert len(gw.calls) == 1


def test_adjudicate_unparseable_reply(tmp_path):
    cands = [cand(1, "r1", "14"), cand(2, "r2", "15")]
    gw = ModelGateway(scripted(tmp_path, [("*", [["garbage"]])]))
    with pytest.raises(UnparseableResponse):
        adjudicate("q", cands, ReasonerConfig(t_a=2), gw)


def test_adjudicate_requires_candidates(tmp_path):
    gw = ModelGateway(scripted(tmp_path, [("*", [["x"]])]))
    with pytest.raises(ValueError):
        adjudicate("q", [], ReasonerConfig(), gw)
