"""Command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import apply_flag_overrides, load_config
from .document import load_document
from .errors import DocLensError
from .harness import load_records, recompute_from_trace, run_benchmark, sweep
from .pipeline import ask
from .tools import ToolBackendConfig, crop_cache_path, crop_element, detect_layout, ocr_page, write_crop_cache
from .trace import canonical_json, load_run


def _pipeline_flags(fn):
    for deco in reversed([
        click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="TOML config file; flags override it."),
        click.option("--te", type=int, default=None, help="Navigator sample count."),
        click.option("--ta", type=int, default=None, help="Answer sample count."),
        click.option("--temperature", type=float, default=None, help="Sampling temperature."),
        click.option("--chunk-size", type=int, default=None,
                      help="Pages per navigator chunk (forces chunking)."),
        click.option("--no-lens", is_flag=True, help="Ablation: skip navigation and cropping."),
        click.option("--no-reasoning", is_flag=True,
                      help="Ablation: single temperature-0 answer call."),
        click.option("--no-sampling", is_flag=True, help="Ablation: navigator samples once."),
        click.option("--no-ocr", is_flag=True, help="Ablation: images only."),
        click.option("--navigator-model", default=None, help="Backbone for navigation."),
        click.option("--reasoner-model", default=None, help="Backbone for reasoning."),
        click.option("--backend", default=None,
                      type=click.Choice(["http_openai_style", "http_gemini_style", "mock"]),
                      help="Gateway backend for both roles."),
        click.option("--mock-script", type=click.Path(exists=True), default=None,
                      help="Scripted responses for the mock backend."),
        click.option("--tools-mode", default=None,
                      type=click.Choice(["cached", "http", "mock"]),
                      help="Parsing-tools backend."),
        click.option("--cache-dir", type=click.Path(), default=None, help="Crop cache directory."),
    ]):
        fn = deco(fn)
    return fn


def _build_cfg(config_path, oracle_pages=None, oracle_mode=False, **flags):
    cfg, extras = load_config(config_path)
    cfg = apply_flag_overrides(cfg, oracle_pages=oracle_pages, oracle_mode=oracle_mode, **flags)
    return cfg, extras


@click.group()
def main():
    """Document QA pipeline: navigate pages, crop elements, sample and adjudicate answers."""


@main.command()
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("--tools-mode", default="cached", type=click.Choice(["cached", "http", "mock"]))
@click.option("--endpoint", default=None, help="Parsing-service URL for http mode.")
@click.option("--cache-dir", type=click.Path(), default=None)
def ingest(bundle, tools_mode, endpoint, cache_dir):
    """Validate a bundle and precompute OCR/layout/crop caches."""
    doc = load_document(bundle)
    click.echo(f"bundle ok: doc_id={doc.doc_id} pages={doc.page_count}")
    tools = ToolBackendConfig(
        mode=tools_mode, endpoint=endpoint,
        cache_dir=Path(cache_dir) if cache_dir else None,
    )
    if tools.cache_dir is None:
        return
    base = Path(tools.cache_dir) / doc.doc_id
    base.mkdir(parents=True, exist_ok=True)
    for page in doc.pages:
        try:
            text = ocr_page(page, tools, doc_id=doc.doc_id)
            (base / f"p{page.index}.md").write_text(text, encoding="utf-8")
        except DocLensError as exc:
            click.echo(f"page {page.index}: no OCR ({exc})")
        manifest = detect_layout(page, tools, doc_id=doc.doc_id)
        (base / f"p{page.index}_layout.json").write_text(
            json.dumps({
                "page_index": manifest.page_index,
                "elements": [
                    {"kind": el.kind, "bbox": el.bbox.as_list()} for el in manifest.elements
                ],
            }, indent=2) + "\n",
            encoding="utf-8",
        )
        for k, el in enumerate(manifest.elements):
            crop = crop_element(page, el.bbox)
            write_crop_cache(crop_cache_path(tools, doc.doc_id, page.index, k), crop)
    click.echo(f"caches written under {tools.cache_dir}")


@main.command("ask")
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.option("-q", "--question", required=True)
@click.option("--oracle-pages", default=None,
              help="Comma-separated gold page indices; replaces navigation.")
@click.option("--runs-dir", type=click.Path(), default="runs", show_default=True)
@click.option("--question-id", default="q0", show_default=True)
@click.option("--run-id", default=None, help="Fix the run id (default: timestamped).")
@_pipeline_flags
def ask_cmd(bundle, question, oracle_pages, runs_dir, question_id, run_id, config_path, **flags):
    """Answer one question over a bundle."""
    pages = None
    if oracle_pages is not None:
        try:
            pages = tuple(int(p) for p in oracle_pages.split(",") if p.strip())
        except ValueError:
            raise click.UsageError("--oracle-pages must be a comma-separated integer list")
    cfg, _ = _build_cfg(config_path, oracle_pages=pages, **flags)
    doc = load_document(bundle)
    adjudication, trace = ask(
        doc, question, cfg,
        question_id=question_id, run_id=run_id, runs_dir=runs_dir,
    )
    click.echo(f"run_id: {trace.run_id}")
    click.echo(f"evidence pages: {trace.stages.get('localization', {}).get('pages', [])}")
    click.echo(f"answer: {adjudication.final_answer}")


@main.command("eval")
@click.argument("records", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--oracle-pages", "oracle_mode", is_flag=True,
              help="Use each record's gold pages instead of navigation.")
@click.option("--score-mode", default="exact_norm",
              type=click.Choice(["exact_norm", "llm_judge"]), show_default=True)
@click.option("--parallelism", type=int, default=None)
@click.option("--run-id", default=None)
@_pipeline_flags
def eval_cmd(records, out_dir, oracle_mode, score_mode, parallelism, run_id, config_path, **flags):
    """Run the benchmark over a JSONL record file."""
    recs = load_records(records)
    cfg, extras = _build_cfg(config_path, oracle_mode=oracle_mode, **flags)
    if oracle_mode and any(not r.gold_pages for r in recs):
        bad = [r.question_id for r in recs if not r.gold_pages]
        raise click.UsageError(f"--oracle-pages requires gold pages in records; missing: {bad}")
    judge_gw = cfg.reasoner_gateway if score_mode == "llm_judge" else None
    report = run_benchmark(
        recs, cfg, out_dir=out_dir, score_mode=score_mode, judge_gw=judge_gw,
        run_id=run_id, parallelism=parallelism or extras.get("parallelism", 1),
    )
    agg = report["aggregate"]
    click.echo(f"run_id: {report['run_id']}")
    click.echo(
        f"accuracy: {agg['accuracy']:.3f}  "
        f"page P/R/F1: {agg['page_precision']:.3f}/{agg['page_recall']:.3f}/{agg['page_f1']:.3f}  "
        f"mean pages: {agg['mean_retrieved_pages']:.2f}"
    )
    click.echo(f"report: {Path(out_dir) / 'report.json'}")


@main.command("sweep")
@click.argument("records", type=click.Path(exists=True, dir_okay=False))
@click.option("--param", required=True, type=click.Choice(["te", "ta"]))
@click.option("--values", required=True, help="Comma-separated ascending counts, e.g. 1,2,4,8")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_pipeline_flags
def sweep_cmd(records, param, values, out_dir, config_path, **flags):
    """Test-time scaling sweep from one maximal run."""
    try:
        parsed = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError("--values must be a comma-separated integer list")
    recs = load_records(records)
    cfg, _ = _build_cfg(config_path, **flags)
    parameter = {"te": "t_e", "ta": "t_a"}[param]
    curve = sweep(recs, parameter, parsed, cfg, out_dir=out_dir)
    for point in curve["points"]:
        click.echo(json.dumps(point, sort_keys=True))
    click.echo(f"curve: {Path(out_dir) / f'sweep_{parameter}.json'}")


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(), default="doclens_data", show_default=True)
@click.option("--bundle", "bundles", multiple=True, type=click.Path(exists=True, file_okay=False),
              help="Bundle directories to preload (repeatable).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve_cmd(port, host, data_dir, bundles, config_path):
    """Serve the HTTP API (and the UI when built)."""
    import uvicorn

    from .service import create_app

    cfg, _ = load_config(config_path)
    app = create_app(Path(data_dir), cfg, preload=[Path(b) for b in bundles])
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("replay")
@click.argument("run_id")
@click.option("--runs-dir", type=click.Path(exists=True), required=True,
              help="The eval output dir's runs/ directory.")
@click.option("--records", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--report", "report_path", type=click.Path(exists=True), default=None,
              help="Original report.json to compare against.")
@click.option("--score-mode", default="exact_norm")
def replay_cmd(run_id, runs_dir, records, report_path, score_mode):
    """Recompute a run's report from its traces, without model calls."""
    recs = load_records(records)
    traces = load_run(runs_dir, run_id)
    report = recompute_from_trace(traces, recs, score_mode=score_mode)
    rendered = canonical_json(report)
    if report_path is None:
        candidate = Path(runs_dir).parent / "report.json"
        report_path = candidate if candidate.exists() else None
    if report_path is not None:
        original = Path(report_path).read_text(encoding="utf-8")
        if original == rendered:
            click.echo("report matches original exactly")
        else:
            click.echo("report DIFFERS from original", err=True)
            sys.exit(1)
    else:
        click.echo(rendered)


if __name__ == "__main__":
    main()
