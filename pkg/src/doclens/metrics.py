"""Evidence-localization and answer metrics.

Page-level precision/recall/F1 are plain set arithmetic over predicted
vs gold page indices. Element-level metrics match predicted boxes to
gold boxes one-to-one, greedily by descending IoU, admitting pairs at
IoU >= threshold (0.5 by default).

Degenerate cases (both empty / exactly one side empty) are fixed here
so "correctly predicted no evidence" scores 1.0 and a one-sided miss
scores 0.0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import prompts
from .document import BBox
from .errors import JudgeUnparseable
from .gateway import GatewayConfig, ModelGateway, ModelRequest, TextPart, as_gateway
from .parsing import recover_json_object


@dataclass(frozen=True)
class PageMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ElementMatchResult:
    matches: tuple[tuple[BBox, BBox, float], ...]  # (pred, gt, iou)
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    if tp == 0 and fp == 0 and fn == 0:
        return 1.0, 1.0, 1.0
    if (tp + fp == 0) or (tp + fn == 0):
        # exactly one side empty: nothing predicted or nothing to find
        return 0.0, 0.0, 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def page_metrics(pred, gt) -> PageMetrics:
    """Precision/recall/F1 over predicted vs gold page-index sets."""
    pred = set(pred)
    gt = set(gt)
    tp = len(pred & gt)
    fp = len(pred - gt)
    fn = len(gt - pred)
    precision, recall, f1 = prf_from_counts(tp, fp, fn)
    return PageMetrics(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    return inter / union


def match_elements(pred, gt, threshold: float = 0.5) -> ElementMatchResult:
    """One-to-one box matching, greedy by descending IoU.

    Pairs with IoU >= threshold are considered in descending IoU order
    (ties broken by gold index, then predicted index); each gold and
    each predicted box joins at most one match.
    """
    if not (0 < threshold <= 1):
        raise ValueError("threshold must be in (0, 1]")
    pred = list(pred)
    gt = list(gt)
    pairs = []
    for gi, g in enumerate(gt):
        for pi, p in enumerate(pred):
            score = iou(p, g)
            if score >= threshold:
                pairs.append((score, gi, pi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    used_gt: set[int] = set()
    used_pred: set[int] = set()
    matches: list[tuple[BBox, BBox, float]] = []
    for score, gi, pi in pairs:
        if gi in used_gt or pi in used_pred:
            continue
        used_gt.add(gi)
        used_pred.add(pi)
        matches.append((pred[pi], gt[gi], score))

    tp = len(matches)
    fp = len(pred) - tp
    fn = len(gt) - tp
    precision, recall, f1 = prf_from_counts(tp, fp, fn)
    return ElementMatchResult(
        matches=tuple(matches), tp=tp, fp=fp, fn=fn,
        precision=precision, recall=recall, f1=f1,
    )


_WS_RE = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    """Normalization for exact matching: case, whitespace, trailing
    periods, and a trailing percent marker ("45%" and "45 percent"
    both reduce to "45")."""
    out = _WS_RE.sub(" ", text.lower().strip())
    while out.endswith("."):
        out = out[:-1].rstrip()
    if out.endswith("%"):
        out = out[:-1].rstrip()
    elif out.endswith("percent"):
        out = out[: -len("percent")].rstrip()
    return out


def score_answer(
    pred: str,
    gold: str,
    mode: str = "exact_norm",
    gw: GatewayConfig | ModelGateway | None = None,
    question: str = "",
) -> float:
    """Binary answer score: normalized exact match, or an LLM judge."""
    if mode == "exact_norm":
        return 1.0 if normalize_answer(pred) == normalize_answer(gold) else 0.0
    if mode != "llm_judge":
        raise ValueError(f"unknown scoring mode: {mode!r}")
    if gw is None:
        raise ValueError("llm_judge mode requires a gateway config")
    payload = f"Question: {question}\nGround Truth: {gold}\nPrediction: {pred}"
    req = ModelRequest(
        system_prompt=prompts.load(prompts.JUDGE),
        parts=(TextPart(payload),),
        temperature=0.0,
        candidate_count=1,
    )
    resp = as_gateway(gw).complete(req)
    try:
        obj = recover_json_object(resp.candidates[0])
        score = float(obj["score"])
    except Exception as exc:
        raise JudgeUnparseable(f"judge reply unusable: {exc}")
    if score not in (0.0, 1.0):
        raise JudgeUnparseable(f"judge score must be 0.0 or 1.0, got {score}")
    return score
