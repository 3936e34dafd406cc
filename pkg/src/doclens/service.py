"""HTTP service: bundle management, asynchronous question runs, SSE progress.

Each question starts an isolated pipeline run on a worker thread. Status
polls never block on model calls; the trace grows stage by stage and the
/runs/{id}/events stream pushes one "stage" event per transition.
"""

from __future__ import annotations

import copy
import io
import json
import secrets
import threading
import zipfile
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .config import apply_flag_overrides
from .document import Document, get_page, load_document, serialize_manifest
from .errors import DocLensError, StageError
from .pipeline import PipelineConfig, ask
from .tools import crop_element
from .trace import new_run_id

STAGE_ORDER = ("navigating", "localizing", "sampling", "adjudicating")


class RunState:
    def __init__(self, run_id: str):
        self.run_id = run_id
        self.status = "pending"
        self.trace: dict = {}
        self.events: list[dict] = []
        self.cond = threading.Condition()

    def push(self, stage: str, status: str, trace_dict: dict | None = None):
        with self.cond:
            if trace_dict is not None:
                self.trace = trace_dict
            self.events.append({"run_id": self.run_id, "stage": stage, "status": status})
            if status == "started":
                self.status = stage
            elif status in ("done", "error"):
                self.status = status
            self.cond.notify_all()

    @property
    def finished(self) -> bool:
        return self.status in ("done", "error")


def create_app(
    data_dir: Path,
    base_cfg: PipelineConfig,
    preload: list[Path] | None = None,
    ui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="document QA service")
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    documents: dict[str, tuple[Path, Document]] = {}
    runs: dict[str, RunState] = {}
    lock = threading.Lock()

    def register(bundle: Path) -> Document:
        doc = load_document(bundle)
        with lock:
            documents[doc.doc_id] = (bundle, doc)
        return doc

    for bundle in preload or []:
        register(bundle)

    def doc_or_404(doc_id: str) -> tuple[Path, Document]:
        with lock:
            entry = documents.get(doc_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown document: {doc_id}")
        return entry

    @app.post("/documents")
    async def upload_document(bundle: UploadFile):
        raw = await bundle.read()
        target = data_dir / "bundles" / secrets.token_hex(8)
        try:
            with zipfile.ZipFile(io.BytesIO(raw)) as zf:
                for name in zf.namelist():
                    # refuse entries escaping the target dir
                    dest = (target / name).resolve()
                    if not str(dest).startswith(str(target.resolve())):
                        raise HTTPException(status_code=409, detail="unsafe zip entry")
                target.mkdir(parents=True, exist_ok=True)
                zf.extractall(target)
        except zipfile.BadZipFile:
            raise HTTPException(status_code=409, detail="upload is not a zip archive")
        # tolerate archives that wrap the bundle in a single top directory
        bundle_dir = target
        if not (bundle_dir / "manifest.json").exists():
            subdirs = [p for p in target.iterdir() if p.is_dir()]
            if len(subdirs) == 1 and (subdirs[0] / "manifest.json").exists():
                bundle_dir = subdirs[0]
        try:
            doc = register(bundle_dir)
        except DocLensError as exc:
            raise HTTPException(status_code=409, detail=f"invalid bundle: {exc}")
        return {"doc_id": doc.doc_id, "page_count": doc.page_count}

    @app.get("/documents")
    def list_documents():
        with lock:
            entries = list(documents.items())
        return {
            "documents": [
                {"doc_id": doc_id, "page_count": doc.page_count}
                for doc_id, (_, doc) in sorted(entries)
            ]
        }

    @app.get("/documents/{doc_id}")
    def get_manifest(doc_id: str):
        bundle, doc = doc_or_404(doc_id)
        return serialize_manifest(doc, bundle)

    @app.get("/documents/{doc_id}/pages/{n}/image")
    def page_image(doc_id: str, n: int):
        _, doc = doc_or_404(doc_id)
        try:
            page = get_page(doc, n)
        except DocLensError:
            raise HTTPException(status_code=404, detail=f"no page {n}")
        media = "image/jpeg" if page.image_ref.suffix.lower() in (".jpg", ".jpeg") else "image/png"
        return FileResponse(page.image_ref, media_type=media)

    @app.get("/documents/{doc_id}/pages/{n}/elements/{k}/crop")
    def element_crop(doc_id: str, n: int, k: int):
        _, doc = doc_or_404(doc_id)
        try:
            page = get_page(doc, n)
        except DocLensError:
            raise HTTPException(status_code=404, detail=f"no page {n}")
        if k < 0 or k >= len(page.elements):
            raise HTTPException(status_code=404, detail=f"no element {k} on page {n}")
        image = crop_element(page, page.elements[k].bbox)
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/questions")
    async def post_question(request: Request):
        body = await request.json()
        doc_id = body.get("doc_id")
        question = body.get("question")
        if not isinstance(doc_id, str) or not isinstance(question, str) or not question:
            return JSONResponse(
                status_code=422, content={"detail": "doc_id and question are required"}
            )
        _, doc = doc_or_404(doc_id)
        overrides = body.get("config") or {}
        try:
            cfg = _apply_overrides(base_cfg, overrides)
        except (ValueError, TypeError) as exc:
            return JSONResponse(status_code=422, content={"detail": f"bad config: {exc}"})

        run_id = new_run_id()
        state = RunState(run_id)
        with lock:
            runs[run_id] = state

        def on_stage(stage: str, status: str, trace):
            state.push(stage, status, copy.deepcopy(trace.to_dict()))

        def work():
            try:
                _, trace = ask(
                    doc, question, cfg,
                    question_id="q0", run_id=run_id,
                    runs_dir=data_dir / "runs", on_stage=on_stage,
                )
                state.push("done", "done", copy.deepcopy(trace.to_dict()))
            except StageError:
                pass  # on_stage already recorded the error event
            except Exception as exc:  # defensive: never leave a run hanging
                state.push("internal", "error", {"error": {"stage": "internal", "message": str(exc)}})

        threading.Thread(target=work, daemon=True).start()
        return {"run_id": run_id}

    def run_or_404(run_id: str) -> RunState:
        with lock:
            state = runs.get(run_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown run: {run_id}")
        return state

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        state = run_or_404(run_id)
        with state.cond:
            return {
                "run_id": run_id,
                "status": state.status,
                "trace": copy.deepcopy(state.trace),
            }

    @app.get("/runs/{run_id}/events")
    def run_events(run_id: str):
        state = run_or_404(run_id)

        def stream():
            sent = 0
            while True:
                with state.cond:
                    while sent >= len(state.events) and not state.finished:
                        state.cond.wait(timeout=30)
                    batch = state.events[sent:]
                    sent += len(batch)
                    finished = state.finished and sent >= len(state.events)
                for event in batch:
                    yield f"event: stage\ndata: {json.dumps(event, sort_keys=True)}\n\n"
                if finished:
                    return

        return StreamingResponse(stream(), media_type="text/event-stream")

    ui = ui_dir if ui_dir is not None else Path("frontend/dist")
    if ui.is_dir():
        app.mount("/ui", StaticFiles(directory=ui, html=True), name="ui")

    return app


def _apply_overrides(base: PipelineConfig, overrides: dict) -> PipelineConfig:
    allowed = {
        "te", "ta", "temperature", "chunk_size",
        "ablations", "oracle_pages",
    }
    unknown = set(overrides) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    ablations = overrides.get("ablations", [])
    if not isinstance(ablations, list):
        raise ValueError("ablations must be a list")
    cfg = apply_flag_overrides(
        base,
        te=overrides.get("te"),
        ta=overrides.get("ta"),
        temperature=overrides.get("temperature"),
        chunk_size=overrides.get("chunk_size"),
        no_lens="no_lens" in ablations,
        no_reasoning="no_reasoning" in ablations,
        no_sampling="no_sampling" in ablations,
        no_ocr="no_ocr" in ablations,
        oracle_pages=tuple(overrides["oracle_pages"]) if overrides.get("oracle_pages") else None,
    )
    return cfg
