"""Persisted run traces: one JSON file per question under runs/{run_id}/.

Traces are the audit substrate: every model call's fingerprint, the
stage-by-stage outputs, and a config snapshot, serialized canonically
(sorted keys, fixed layout, no timestamps or absolute paths) so a rerun
with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import json
import os
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import TraceIncomplete

STAGES = ("navigation", "localization", "sampling", "adjudication")


def new_run_id() -> str:
    """Timestamp-sortable unique run identifier."""
    return time.strftime("%Y%m%d-%H%M%S") + "-" + secrets.token_hex(3)


@dataclass
class RunTrace:
    run_id: str
    question_id: str
    doc_id: str
    question: str
    config: dict
    stages: dict = field(default_factory=dict)
    calls: list = field(default_factory=list)   # dicts: stage/fingerprint/usage
    error: dict | None = None

    def add_call(self, stage: str, record) -> None:
        usage = record.usage
        self.calls.append({
            "stage": stage,
            "fingerprint": record.fingerprint,
            "backend": record.backend,
            "model": record.model,
            "candidate_count": record.candidate_count,
            "input_tokens": usage.input_tokens if usage else None,
            "output_tokens": usage.output_tokens if usage else None,
        })

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "question_id": self.question_id,
            "doc_id": self.doc_id,
            "question": self.question,
            "config": self.config,
            "stages": self.stages,
            "calls": self.calls,
            "error": self.error,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def final_answer(self) -> str | None:
        adj = self.stages.get("adjudication")
        if adj is not None:
            return adj.get("final_answer")
        sampling = self.stages.get("sampling")
        if sampling and sampling.get("mode") == "direct" and sampling.get("candidates"):
            return sampling["candidates"][0]["answer"]
        return None

    @classmethod
    def from_dict(cls, data: dict) -> RunTrace:
        required = ("run_id", "question_id", "doc_id", "question", "config", "stages", "calls")
        for key in required:
            if key not in data:
                raise TraceIncomplete(f"trace missing key: {key}")
        return cls(
            run_id=data["run_id"],
            question_id=data["question_id"],
            doc_id=data["doc_id"],
            question=data["question"],
            config=data["config"],
            stages=data["stages"],
            calls=data["calls"],
            error=data.get("error"),
        )


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def trace_path(runs_dir: str | Path, run_id: str, question_id: str) -> Path:
    return Path(runs_dir) / run_id / f"{question_id}.json"


def save_trace(trace: RunTrace, runs_dir: str | Path) -> Path:
    path = trace_path(runs_dir, trace.run_id, trace.question_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(trace.to_json(), encoding="utf-8")
    os.replace(tmp, path)
    return path


def load_trace(path: str | Path) -> RunTrace:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TraceIncomplete(f"unreadable trace {path}: {exc}")
    return RunTrace.from_dict(data)


def load_run(runs_dir: str | Path, run_id: str) -> list[RunTrace]:
    run_dir = Path(runs_dir) / run_id
    if not run_dir.is_dir():
        raise TraceIncomplete(f"no such run: {run_id}")
    return [load_trace(p) for p in sorted(run_dir.glob("*.json"))]
