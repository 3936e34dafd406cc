"""Tolerant JSON extraction for model responses.

Models are told to emit a single JSON object, but replies arrive wrapped
in code fences, prefixed with chatter, or otherwise mangled. These
helpers recover the object when possible and raise controlled errors
(never crash) when not.
"""

from __future__ import annotations

import json
import re

from .errors import MissingField, UnparseableResponse

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*\n(.*?)\n?```\s*$", re.DOTALL)
_INT_RE = re.compile(r"-?\d+")


def strip_code_fence(text: str) -> str:
    """Remove one leading/trailing Markdown code fence, if present."""
    m = _FENCE_RE.match(text.strip())
    return m.group(1) if m else text


def recover_json_object(raw: str) -> dict:
    """Parse a JSON object out of a raw model reply.

    Tries the fence-stripped text directly, then the outermost
    {...} substring. Raises UnparseableResponse when nothing works.
    """
    if not isinstance(raw, str):
        raise UnparseableResponse("response is not text")
    text = strip_code_fence(raw).strip()
    for attempt in (text, _outer_braces(text)):
        if attempt is None:
            continue
        try:
            obj = json.loads(attempt)
        except (json.JSONDecodeError, RecursionError):
            continue
        if isinstance(obj, dict):
            return obj
    raise UnparseableResponse("no JSON object recoverable from response")


def _outer_braces(text: str) -> str | None:
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        return None
    return text[start : end + 1]


def require_str_field(obj: dict, name: str) -> str:
    """Fetch a field, coercing scalars to text; missing raises MissingField."""
    if name not in obj:
        raise MissingField(name)
    value = obj[name]
    if isinstance(value, str):
        return value
    if isinstance(value, (int, float, bool)):
        return json.dumps(value)
    if value is None:
        return ""
    return json.dumps(value, ensure_ascii=False)


def parse_int_list(value, warnings: list[str]) -> list[int]:
    """Decode a located-pages value: a string-encoded list like "[3, 10, 12]".

    Accepts an actual JSON list too. Non-integer entries are dropped with a
    warning; a string that is not valid JSON falls back to digit scanning.
    """
    if isinstance(value, str):
        text = strip_code_fence(value).strip()
        try:
            decoded = json.loads(text) if text else []
        except json.JSONDecodeError:
            found = [int(tok) for tok in _INT_RE.findall(text)]
            if text and not found:
                warnings.append(f"located_pages not parseable: {text[:80]!r}")
            return found
    else:
        decoded = value

    if decoded is None:
        return []
    if isinstance(decoded, (int, float)):
        decoded = [decoded]
    if not isinstance(decoded, list):
        warnings.append(f"located_pages has unexpected shape: {type(decoded).__name__}")
        return []
    out: list[int] = []
    for item in decoded:
        if isinstance(item, bool):
            warnings.append(f"ignoring non-integer page entry: {item!r}")
        elif isinstance(item, int):
            out.append(item)
        elif isinstance(item, float) and item.is_integer():
            out.append(int(item))
        elif isinstance(item, str) and _INT_RE.fullmatch(item.strip()):
            out.append(int(item.strip()))
        else:
            warnings.append(f"ignoring non-integer page entry: {item!r}")
    return out
