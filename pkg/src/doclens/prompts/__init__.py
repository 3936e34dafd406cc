"""Versioned system-prompt resources, checksum-pinned.

Each template ships as a text file next to this module along with its
sha256 in ``checksums.json``. Loading verifies the pin so an accidental
edit of a template fails loudly instead of silently changing behavior.
"""

from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources

PAGE_NAVIGATOR = "page_navigator"
ANSWER_SAMPLER = "answer_sampler"
ADJUDICATOR = "adjudicator"
ANSWER_EXTRACTION = "answer_extraction"
JUDGE = "judge"

_ALL = (PAGE_NAVIGATOR, ANSWER_SAMPLER, ADJUDICATOR, ANSWER_EXTRACTION, JUDGE)


class PromptIntegrityError(RuntimeError):
    pass


@lru_cache(maxsize=1)
def _checksums() -> dict[str, str]:
    raw = resources.files(__package__).joinpath("checksums.json").read_text("utf-8")
    return json.loads(raw)


@lru_cache(maxsize=None)
def load(name: str) -> str:
    """Return a template's text, verifying its pinned checksum."""
    if name not in _ALL:
        raise KeyError(f"unknown prompt template: {name!r}")
    fname = f"{name}.txt"
    data = resources.files(__package__).joinpath(fname).read_bytes()
    want = _checksums()[fname]
    got = hashlib.sha256(data).hexdigest()
    if got != want:
        raise PromptIntegrityError(f"{fname}: checksum {got} != pinned {want}")
    return data.decode("utf-8")


def checksum(name: str) -> str:
    """The pinned sha256 of a template."""
    return _checksums()[f"{name}.txt"]
