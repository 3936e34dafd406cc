"""Benchmark evaluation: run the pipeline over records, score, report.

Records are one JSON object per line. Reports come in two forms: a
canonical JSON report (machine) and a Markdown accuracy table split by
evidence source (human). Every metric is recomputable from persisted
traces alone, so a finished run can be audited or replayed without any
model calls.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .document import BBox, load_document
from .errors import StageError, TraceIncomplete
from .gateway import GatewayConfig, ModelGateway
from .metrics import match_elements, page_metrics, prf_from_counts, score_answer
from .pipeline import PipelineConfig, ask
from .trace import RunTrace, canonical_json, load_run, new_run_id, save_trace

log = logging.getLogger(__name__)

SOURCE_ORDER = ("TXT", "LAY", "CHA", "TAB", "FIG", "UNA")


@dataclass(frozen=True)
class BenchmarkRecord:
    question_id: str
    doc: str
    question: str
    gold_answer: str
    gold_pages: tuple[int, ...] = ()
    gold_element_boxes: dict | None = None   # page index -> list of BBox
    sources: tuple[str, ...] = ()
    answerable: bool = True


def load_records(path: str | Path) -> list[BenchmarkRecord]:
    """Read benchmark records from a JSONL file; doc paths resolve
    relative to the file's directory."""
    path = Path(path)
    base = path.parent
    records = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}")
        boxes = None
        if raw.get("element_boxes"):
            boxes = {
                int(page): tuple(BBox(*b) for b in blist)
                for page, blist in raw["element_boxes"].items()
            }
        doc_path = raw["doc"]
        if not Path(doc_path).is_absolute():
            doc_path = str(base / doc_path)
        records.append(
            BenchmarkRecord(
                question_id=str(raw["question_id"]),
                doc=doc_path,
                question=raw["question"],
                gold_answer=raw.get("answer", ""),
                gold_pages=tuple(sorted(raw.get("evidence_pages", []))),
                gold_element_boxes=boxes,
                sources=tuple(raw.get("evidence_sources", [])),
                answerable=bool(raw.get("answerable", True)),
            )
        )
    return records


def _retrieved_pages(trace: RunTrace) -> list[int]:
    nav = trace.stages.get("navigation")
    if nav is not None:
        return list(nav["e_pred"])
    loc = trace.stages.get("localization")
    if loc is not None:
        return list(loc["pages"])
    return []


def _element_metrics(trace: RunTrace, record: BenchmarkRecord) -> dict | None:
    """Block-level localization vs gold boxes, micro-averaged over the
    record's annotated pages; None when the record carries no gold boxes."""
    if not record.gold_element_boxes:
        return None
    detected = (trace.stages.get("localization") or {}).get("elements", {})
    tp = fp = fn = 0
    for page, gold_boxes in sorted(record.gold_element_boxes.items()):
        pred_boxes = [BBox(*e["bbox"]) for e in detected.get(str(page), [])]
        result = match_elements(pred_boxes, list(gold_boxes))
        tp += result.tp
        fp += result.fp
        fn += result.fn
    precision, recall, f1 = prf_from_counts(tp, fp, fn)
    return {
        "tp": tp, "fp": fp, "fn": fn,
        "precision": precision, "recall": recall, "f1": f1,
    }


def build_report(traces, records, score_mode: str = "exact_norm") -> dict:
    """Compute the full report from traces alone (no model calls).

    Answer scores are read from each trace's scoring stage, where the
    runner froze them; page metrics are recomputed from the traced
    page sets against the records' gold pages.
    """
    by_id = {r.question_id: r for r in records}
    rows = []
    for trace in sorted(traces, key=lambda t: t.question_id):
        record = by_id.get(trace.question_id)
        if record is None:
            raise TraceIncomplete(f"no benchmark record for trace {trace.question_id}")
        if trace.error is None:
            scoring = trace.stages.get("scoring")
            if scoring is None or trace.final_answer is None:
                raise TraceIncomplete(
                    f"trace {trace.question_id} has no scoring stage; cannot recompute"
                )
            score = float(scoring["score"])
        else:
            score = 0.0
        e_pred = _retrieved_pages(trace)
        pm = page_metrics(e_pred, record.gold_pages)
        rows.append({
            "question_id": trace.question_id,
            "doc_id": trace.doc_id,
            "score": score,
            "final_answer": trace.final_answer,
            "gold_answer": record.gold_answer,
            "e_pred": e_pred,
            "gold_pages": list(record.gold_pages),
            "retrieved_pages": len(e_pred),
            "page_metrics": {
                "tp": pm.tp, "fp": pm.fp, "fn": pm.fn,
                "precision": pm.precision, "recall": pm.recall, "f1": pm.f1,
            },
            "element_metrics": _element_metrics(trace, record),
            "sources": list(record.sources),
            "error": trace.error,
        })

    n = len(rows)
    def mean(values):
        return sum(values) / len(values) if values else 0.0

    by_source: dict[str, dict] = {}
    for row in rows:
        for tag in row["sources"]:
            bucket = by_source.setdefault(tag, {"n": 0, "correct": 0.0})
            bucket["n"] += 1
            bucket["correct"] += row["score"]
    by_source_out = {
        tag: {"n": b["n"], "accuracy": b["correct"] / b["n"]}
        for tag, b in by_source.items()
    }

    with_elements = [r["element_metrics"] for r in rows if r["element_metrics"]]
    aggregate = {
        "accuracy": mean([r["score"] for r in rows]),
        "mean_retrieved_pages": mean([r["retrieved_pages"] for r in rows]),
        "page_precision": mean([r["page_metrics"]["precision"] for r in rows]),
        "page_recall": mean([r["page_metrics"]["recall"] for r in rows]),
        "page_f1": mean([r["page_metrics"]["f1"] for r in rows]),
    }
    if with_elements:
        aggregate["element_precision"] = mean([m["precision"] for m in with_elements])
        aggregate["element_recall"] = mean([m["recall"] for m in with_elements])
        aggregate["element_f1"] = mean([m["f1"] for m in with_elements])

    return {
        "run_id": traces[0].run_id if traces else "",
        "score_mode": score_mode,
        "n_records": n,
        "aggregate": aggregate,
        "by_source": by_source_out,
        "records": rows,
    }


def report_markdown(report: dict) -> str:
    """Accuracy table split by evidence source, one column per source plus ALL."""
    tags = [t for t in SOURCE_ORDER if t in report["by_source"]]
    tags += sorted(set(report["by_source"]) - set(SOURCE_ORDER))
    header = tags + ["ALL"]
    cells = [f"{report['by_source'][t]['accuracy'] * 100:.1f}" for t in tags]
    cells.append(f"{report['aggregate']['accuracy'] * 100:.1f}")
    agg = report["aggregate"]
    lines = [
        "# Evaluation report",
        "",
        f"Run `{report['run_id']}`, {report['n_records']} records, "
        f"scoring mode `{report['score_mode']}`.",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
        "| " + " | ".join(cells) + " |",
        "",
        f"- Mean retrieved pages: {agg['mean_retrieved_pages']:.2f}",
        f"- Page precision / recall / F1: {agg['page_precision']:.3f} / "
        f"{agg['page_recall']:.3f} / {agg['page_f1']:.3f}",
        "",
    ]
    return "\n".join(lines)


def run_benchmark(
    records,
    cfg: PipelineConfig,
    out_dir: str | Path | None = None,
    score_mode: str = "exact_norm",
    judge_gw: GatewayConfig | ModelGateway | None = None,
    run_id: str | None = None,
    parallelism: int = 1,
) -> dict:
    """Execute the pipeline per record, score answers, and build the report.

    Per-record errors are recorded and the run continues. With the
    ``oracle_pages`` ablation, each record's gold pages replace
    navigation (records must carry them).
    """
    run_id = run_id or new_run_id()
    runs_dir = Path(out_dir) / "runs" if out_dir is not None else None
    docs: dict[str, object] = {}

    if "oracle_pages" in cfg.ablations:
        missing = [r.question_id for r in records if not r.gold_pages]
        if missing:
            raise ValueError(
                f"oracle_pages requires gold evidence pages; missing for {missing}"
            )

    def one(record: BenchmarkRecord) -> RunTrace:
        doc = docs[record.doc]
        rec_cfg = cfg
        if "oracle_pages" in cfg.ablations:
            rec_cfg = replace(cfg, oracle_pages=record.gold_pages)
        trace = None
        try:
            _, trace = ask(
                doc, record.question, rec_cfg,
                question_id=record.question_id, run_id=run_id,
            )
            score = score_answer(
                trace.final_answer, record.gold_answer, mode=score_mode,
                gw=judge_gw, question=record.question,
            )
            trace.stages["scoring"] = {
                "mode": score_mode, "score": score, "gold_answer": record.gold_answer,
            }
        except StageError as exc:
            log.error("record %s failed: %s", record.question_id, exc)
            trace = exc.trace
        except Exception as exc:
            log.error("record %s failed outside the pipeline: %s", record.question_id, exc)
            if trace is None:
                trace = RunTrace(
                    run_id=run_id, question_id=record.question_id,
                    doc_id=doc.doc_id, question=record.question, config={},
                )
            trace.error = {"stage": "scoring", "message": str(exc)}
        if runs_dir is not None:
            save_trace(trace, runs_dir)
        return trace

    # document loads are cached; preload sequentially to keep the cache
    # simple, then evaluate records concurrently
    for record in records:
        if record.doc not in docs:
            docs[record.doc] = load_document(record.doc)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            traces = list(pool.map(one, records))
    else:
        traces = [one(r) for r in records]

    report = build_report(traces, records, score_mode=score_mode)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(canonical_json(report), encoding="utf-8")
        (out / "report.md").write_text(report_markdown(report), encoding="utf-8")
    return report


def recompute_from_trace(traces, records, score_mode: str = "exact_norm") -> dict:
    """Rebuild the report from persisted traces; must equal the original.

    ``traces`` may be RunTrace objects or a (runs_dir, run_id) pair.
    """
    if isinstance(traces, tuple) and len(traces) == 2:
        traces = load_run(*traces)
    return build_report(list(traces), records, score_mode=score_mode)


def sweep(
    records,
    parameter: str,
    values,
    cfg: PipelineConfig,
    out_dir: str | Path | None = None,
    score_mode: str = "exact_norm",
) -> dict:
    """Test-time scaling curves from one maximal run.

    Runs the pipeline once at the largest value, then prefix-truncates
    the per-sample traces: navigator sweeps report recall@k samples,
    sampler sweeps report best-of-N and (where determinable without a
    model call) adjudicated accuracy.
    """
    if parameter not in ("t_e", "t_a"):
        raise ValueError("parameter must be t_e or t_a")
    values = [int(v) for v in values]
    if not values or values != sorted(values) or values[0] < 1:
        raise ValueError("values must be ascending positive integers")
    maximal = values[-1]
    if parameter == "t_e":
        run_cfg = replace(cfg, navigator=replace(cfg.navigator, t_e=maximal))
    else:
        run_cfg = replace(cfg, reasoner=replace(cfg.reasoner, t_a=maximal))

    report = run_benchmark(records, run_cfg, out_dir=out_dir, score_mode=score_mode)
    runs_dir = Path(out_dir) / "runs" if out_dir is not None else None
    # the traces were just produced; rebuild them from the report rows is
    # not enough (we need per-sample data), so keep them via a second run
    # only if not persisted
    if runs_dir is not None:
        traces = load_run(runs_dir, report["run_id"])
    else:
        raise ValueError("sweep requires an out_dir to persist and reread traces")

    by_id = {r.question_id: r for r in records}
    points = []
    for k in values:
        if parameter == "t_e":
            # same per-record recall definition as the report (degenerate
            # rules included), so the maximal value reproduces it exactly
            recalls, counts = [], []
            for trace in traces:
                record = by_id[trace.question_id]
                samples = trace.stages["navigation"]["samples"]
                union: set[int] = set()
                for s in samples[:k]:
                    union |= set(s)
                recalls.append(page_metrics(union, record.gold_pages).recall)
                counts.append(len(union))
            points.append({
                "value": k,
                "recall": sum(recalls) / len(recalls),
                "mean_pages": sum(counts) / len(counts),
            })
        else:
            best, adjudicated = [], []
            for trace in traces:
                record = by_id[trace.question_id]
                cands = trace.stages["sampling"]["candidates"][:k]
                scores = [
                    score_answer(c["answer"], record.gold_answer, mode="exact_norm")
                    for c in cands
                ]
                best.append(max(scores) if scores else 0.0)
                all_cands = trace.stages["sampling"]["candidates"]
                if k >= len(all_cands):
                    adjudicated.append(
                        score_answer(trace.final_answer, record.gold_answer, mode="exact_norm")
                    )
                elif len({c["answer"] for c in cands}) == 1:
                    # unanimity: the adjudicator would short-circuit here
                    adjudicated.append(
                        score_answer(cands[0]["answer"], record.gold_answer, mode="exact_norm")
                    )
                else:
                    adjudicated.append(None)
            point = {
                "value": k,
                "best_of_n_accuracy": sum(best) / len(best),
            }
            known = [a for a in adjudicated if a is not None]
            point["adjudicated_accuracy"] = (
                sum(known) / len(known) if len(known) == len(adjudicated) else None
            )
            points.append(point)

    curve = {
        "parameter": parameter,
        "values": values,
        "points": points,
        "full_run": {
            "run_id": report["run_id"],
            "accuracy": report["aggregate"]["accuracy"],
            "page_recall": report["aggregate"]["page_recall"],
        },
    }
    if out_dir is not None:
        path = Path(out_dir) / f"sweep_{parameter}.json"
        path.write_text(canonical_json(curve), encoding="utf-8")
    return curve
