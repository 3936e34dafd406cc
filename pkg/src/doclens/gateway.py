"""Uniform access to vision-language model backends.

One entry point, :func:`complete` (or a :class:`ModelGateway` instance when
call state matters), hides three backends: OpenAI-style chat completions,
Gemini-style generateContent, and a deterministic scripted mock. The
gateway owns multi-candidate sampling (native ``n`` when the backend
supports it, otherwise sequential single-candidate calls), transient-error
retries, and the resolution fallback that halves oversized images until
the backend accepts them.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import httpx
from PIL import Image

from .errors import (
    BackendUnavailable,
    ContextLimitExceeded,
    ImageTooLarge,
    MalformedBackendReply,
)

log = logging.getLogger(__name__)

BACKENDS = ("http_openai_style", "http_gemini_style", "mock")
MIN_IMAGE_SIDE = 64  # floor for the resolution fallback, longer side in px

API_KEY_ENV = "DOCLENS_API_KEY"
API_BASE_ENV = "DOCLENS_API_BASE"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    label: str | None = None


Part = TextPart | ImagePart


@dataclass(frozen=True)
class ModelRequest:
    system_prompt: str
    parts: tuple[Part, ...]
    temperature: float = 0.0
    candidate_count: int = 1

    def __post_init__(self):
        if not self.parts:
            raise ValueError("request must have at least one part")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def image_parts(self) -> list[ImagePart]:
        return [p for p in self.parts if isinstance(p, ImagePart)]


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int


@dataclass(frozen=True)
class ModelResponse:
    candidates: tuple[str, ...]
    usage: Usage | None = None


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "mock"
    model_name: str = "mock-model"
    supports_candidate_count: bool = True
    max_retries: int = 2
    request_timeout: float = 120.0
    api_base: str | None = None
    api_key: str | None = None
    mock_script: Path | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend: {self.backend!r}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def resolved_base(self) -> str:
        base = self.api_base or os.environ.get(API_BASE_ENV, "")
        if not base:
            raise BackendUnavailable(f"no API base configured ({API_BASE_ENV})")
        return base.rstrip("/")

    def resolved_key(self) -> str:
        return self.api_key or os.environ.get(API_KEY_ENV, "")


def fingerprint(req: ModelRequest) -> str:
    """Stable content hash of a request; keys mock scripts and trace blobs."""
    h = hashlib.sha256()

    def feed(tag: bytes, data: bytes):
        h.update(tag)
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)

    feed(b"sys", req.system_prompt.encode("utf-8"))
    for part in req.parts:
        if isinstance(part, TextPart):
            feed(b"txt", part.text.encode("utf-8"))
        else:
            feed(b"lbl", (part.label or "").encode("utf-8"))
            feed(b"img", part.data)
    feed(b"tmp", repr(float(req.temperature)).encode("ascii"))
    feed(b"cnd", str(req.candidate_count).encode("ascii"))
    return h.hexdigest()


@dataclass
class CallRecord:
    """One observed backend call; feeds run traces and tests."""

    fingerprint: str
    backend: str
    model: str
    candidate_count: int
    image_sizes: list[tuple[int, int]] = field(default_factory=list)
    usage: Usage | None = None


class _MockScript:
    """Scripted responses keyed by request fingerprint.

    Each entry holds ordered candidate rounds; a per-entry cursor advances
    one round per call so repeated sampling can draw different sets. The
    key "*" matches any request without an exact entry. A round whose
    first candidate starts with "!error:" raises instead of answering.
    """

    def __init__(self, path: Path):
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendUnavailable(f"mock script unreadable: {exc}")
        self.rounds: dict[str, list[list[str]]] = {}
        self.cursors: dict[str, int] = {}
        for entry in raw.get("entries", []):
            self.rounds[entry["fingerprint"]] = entry["candidates_rounds"]

    def next_round(self, fp: str) -> list[str]:
        key = fp if fp in self.rounds else "*"
        if key not in self.rounds:
            raise BackendUnavailable(f"mock script has no entry for {fp}")
        rounds = self.rounds[key]
        cursor = self.cursors.get(key, 0)
        self.cursors[key] = cursor + 1
        return rounds[min(cursor, len(rounds) - 1)]


_ERROR_SENTINELS = {
    "!error:image_too_large": ImageTooLarge,
    "!error:context_limit": ContextLimitExceeded,
    "!error:unavailable": BackendUnavailable,
    "!error:malformed": MalformedBackendReply,
}

# global in-flight cap shared by every gateway in the process
_inflight: threading.BoundedSemaphore | None = None
_inflight_lock = threading.Lock()


def set_inflight_cap(n: int | None) -> None:
    global _inflight
    with _inflight_lock:
        _inflight = threading.BoundedSemaphore(n) if n else None


class ModelGateway:
    """A configured backend plus its per-run call log and mock state."""

    def __init__(self, cfg: GatewayConfig):
        self.cfg = cfg
        self.calls: list[CallRecord] = []
        self._script: _MockScript | None = None
        if cfg.backend == "mock":
            if cfg.mock_script is None:
                raise BackendUnavailable("mock backend requires mock_script")
            self._script = _MockScript(cfg.mock_script)

    # -- public API --

    def complete(self, req: ModelRequest) -> ModelResponse:
        """Run a request, returning exactly ``req.candidate_count`` candidates.

        Oversized-image rejections trigger the resolution fallback: all
        image parts are halved and the request retried, down to a floor of
        64px on the longer side.
        """
        current = req
        while True:
            try:
                return self._complete_at_resolution(current)
            except ImageTooLarge:
                shrunk = _halve_images(current)
                if shrunk is None:
                    raise BackendUnavailable(
                        "backend rejected images at minimum resolution"
                    )
                log.info("image rejected for size; retrying at half resolution")
                current = shrunk

    # -- candidate fan-out --

    def _complete_at_resolution(self, req: ModelRequest) -> ModelResponse:
        if req.candidate_count == 1 or self.cfg.supports_candidate_count:
            return self._call_backend(req)
        # backend cannot sample n candidates natively: invoke it
        # sequentially, once per candidate
        candidates: list[str] = []
        in_toks = 0
        out_toks = 0
        saw_usage = False
        single = replace(req, candidate_count=1)
        for _ in range(req.candidate_count):
            resp = self._call_backend(single)
            candidates.extend(resp.candidates)
            if resp.usage is not None:
                saw_usage = True
                in_toks += resp.usage.input_tokens
                out_toks += resp.usage.output_tokens
        usage = Usage(in_toks, out_toks) if saw_usage else None
        return ModelResponse(candidates=tuple(candidates), usage=usage)

    # -- one backend invocation (with transient retries) --

    def _call_backend(self, req: ModelRequest) -> ModelResponse:
        attempt = 0
        while True:
            try:
                return self._call_once(req)
            except BackendUnavailable as exc:
                if attempt >= self.cfg.max_retries:
                    raise
                delay = 0.5 * (2 ** attempt) + random.uniform(0, 0.25)
                # scripted failures in tests should not sleep for real
                if self.cfg.backend != "mock":
                    time.sleep(delay)
                attempt += 1
                log.warning("transient backend failure (attempt %d): %s", attempt, exc)

    def _call_once(self, req: ModelRequest) -> ModelResponse:
        fp = fingerprint(req)
        # every attempt is logged; usage stays None on failure
        record = CallRecord(
            fingerprint=fp,
            backend=self.cfg.backend,
            model=self.cfg.model_name,
            candidate_count=req.candidate_count,
            image_sizes=[_image_size(p.data) for p in req.image_parts()],
        )
        self.calls.append(record)
        sem = _inflight
        if sem is not None:
            sem.acquire()
        try:
            if self.cfg.backend == "mock":
                resp = self._call_mock(req, fp)
            elif self.cfg.backend == "http_openai_style":
                resp = self._call_openai(req)
            else:
                resp = self._call_gemini(req)
        finally:
            if sem is not None:
                sem.release()
        if len(resp.candidates) != req.candidate_count:
            raise MalformedBackendReply(
                f"expected {req.candidate_count} candidates, got {len(resp.candidates)}"
            )
        record.usage = resp.usage
        return resp

    # -- mock backend --

    def _call_mock(self, req: ModelRequest, fp: str) -> ModelResponse:
        round_ = self._script.next_round(fp)
        if round_ and round_[0] in _ERROR_SENTINELS:
            raise _ERROR_SENTINELS[round_[0]](f"scripted: {round_[0]}")
        candidates = tuple(round_[: req.candidate_count])
        in_toks = len(req.system_prompt) // 4
        for part in req.parts:
            if isinstance(part, TextPart):
                in_toks += len(part.text) // 4
            else:
                in_toks += 258
        out_toks = sum(len(c) // 4 for c in candidates)
        return ModelResponse(candidates=candidates, usage=Usage(in_toks, out_toks))

    # -- OpenAI-style backend --

    def _call_openai(self, req: ModelRequest) -> ModelResponse:
        content: list[dict] = []
        for part in req.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                if part.label:
                    content.append({"type": "text", "text": part.label})
                url = f"data:{_mime(part.data)};base64,{base64.b64encode(part.data).decode('ascii')}"
                content.append({"type": "image_url", "image_url": {"url": url}})
        body = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": content},
            ],
            "temperature": req.temperature,
            "n": req.candidate_count,
        }
        headers = {"Content-Type": "application/json"}
        key = self.cfg.resolved_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        data = self._post(f"{self.cfg.resolved_base()}/chat/completions", body, headers)
        try:
            candidates = tuple(
                choice["message"]["content"] for choice in data["choices"]
            )
        except (KeyError, TypeError) as exc:
            raise MalformedBackendReply(f"unexpected chat completion shape: {exc}")
        usage = None
        if isinstance(data.get("usage"), dict):
            u = data["usage"]
            usage = Usage(int(u.get("prompt_tokens", 0)), int(u.get("completion_tokens", 0)))
        return ModelResponse(candidates=candidates, usage=usage)

    # -- Gemini-style backend --

    def _call_gemini(self, req: ModelRequest) -> ModelResponse:
        parts: list[dict] = []
        for part in req.parts:
            if isinstance(part, TextPart):
                parts.append({"text": part.text})
            else:
                if part.label:
                    parts.append({"text": part.label})
                parts.append({
                    "inline_data": {
                        "mime_type": _mime(part.data),
                        "data": base64.b64encode(part.data).decode("ascii"),
                    }
                })
        body = {
            "system_instruction": {"parts": [{"text": req.system_prompt}]},
            "contents": [{"role": "user", "parts": parts}],
            "generationConfig": {
                "temperature": req.temperature,
                "candidateCount": req.candidate_count,
            },
        }
        headers = {"Content-Type": "application/json"}
        key = self.cfg.resolved_key()
        if key:
            headers["x-goog-api-key"] = key
        url = f"{self.cfg.resolved_base()}/models/{self.cfg.model_name}:generateContent"
        data = self._post(url, body, headers)
        try:
            candidates = tuple(
                "".join(p.get("text", "") for p in cand["content"]["parts"])
                for cand in data["candidates"]
            )
        except (KeyError, TypeError) as exc:
            raise MalformedBackendReply(f"unexpected generateContent shape: {exc}")
        usage = None
        if isinstance(data.get("usageMetadata"), dict):
            u = data["usageMetadata"]
            usage = Usage(
                int(u.get("promptTokenCount", 0)),
                int(u.get("candidatesTokenCount", 0)),
            )
        return ModelResponse(candidates=candidates, usage=usage)

    def _post(self, url: str, body: dict, headers: dict) -> dict:
        try:
            resp = httpx.post(url, json=body, headers=headers, timeout=self.cfg.request_timeout)
        except httpx.TransportError as exc:
            raise BackendUnavailable(f"{url}: {exc}")
        if resp.status_code in (429, 500, 502, 503, 504):
            raise BackendUnavailable(f"{url} returned {resp.status_code}")
        if resp.status_code != 200:
            message = _error_message(resp)
            lowered = message.lower()
            if "image" in lowered and ("size" in lowered or "large" in lowered or "resolution" in lowered):
                raise ImageTooLarge(message)
            if "context" in lowered or "token limit" in lowered or "too long" in lowered:
                raise ContextLimitExceeded(message)
            raise BackendUnavailable(f"{url} returned {resp.status_code}: {message}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedBackendReply(f"non-JSON reply from {url}: {exc}")


def _error_message(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        if isinstance(data, dict):
            err = data.get("error")
            if isinstance(err, dict):
                return str(err.get("message", ""))
            if isinstance(err, str):
                return err
    except ValueError:
        pass
    return resp.text[:500]


def _mime(data: bytes) -> str:
    if data[:3] == b"\xff\xd8\xff":
        return "image/jpeg"
    return "image/png"


def _image_size(data: bytes) -> tuple[int, int]:
    with Image.open(io.BytesIO(data)) as img:
        return img.size


def _halve_images(req: ModelRequest) -> ModelRequest | None:
    """Halve every image part above the size floor; None if all are at it."""
    any_shrunk = False
    parts: list[Part] = []
    for part in req.parts:
        if not isinstance(part, ImagePart):
            parts.append(part)
            continue
        with Image.open(io.BytesIO(part.data)) as img:
            w, h = img.size
            if max(w, h) <= MIN_IMAGE_SIDE:
                parts.append(part)
                continue
            nw, nh = max(1, round(w / 2)), max(1, round(h / 2))
            shrunk = img.resize((nw, nh))
            buf = io.BytesIO()
            shrunk.save(buf, format="PNG")
        parts.append(ImagePart(data=buf.getvalue(), label=part.label))
        any_shrunk = True
    if not any_shrunk:
        return None
    return replace(req, parts=tuple(parts))


def as_gateway(gw: GatewayConfig | ModelGateway) -> ModelGateway:
    return gw if isinstance(gw, ModelGateway) else ModelGateway(gw)


def complete(req: ModelRequest, cfg: GatewayConfig | ModelGateway) -> ModelResponse:
    """One-shot completion; see :meth:`ModelGateway.complete`."""
    return as_gateway(cfg).complete(req)
