"""Prompt construction with explicit prompt/source boundaries.

A decode input is one token sequence partitioned into three spans: the prompt
(few-shot exemplars, headers, dialogue history), the source the output must
stay faithful to, and the tokens generated so far. ``s`` and ``c`` are the
token indices closing the prompt and source spans respectively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .backend.base import Backend


@dataclass(frozen=True)
class SegmentedSequence:
    tokens: tuple[int, ...]
    s: int
    c: int
    generated_from: int = -1

    def __post_init__(self) -> None:
        if self.generated_from == -1:
            object.__setattr__(self, "generated_from", self.c)
        if not 0 <= self.s <= self.c <= len(self.tokens):
            raise ValueError(
                f"invalid spans: need 0 <= s={self.s} <= c={self.c} <= {len(self.tokens)}"
            )
        if self.generated_from != self.c:
            raise ValueError("generated_from must equal c at construction")

    @property
    def has_source(self) -> bool:
        return self.c > self.s


@dataclass(frozen=True)
class TaskTemplate:
    name: str
    shots: tuple[str, ...] = field(default=())
    source_header: str = ""
    response_header: str = ""
    separator: str = "\n"

    def __post_init__(self) -> None:
        if self.name not in ("summarization", "dialogue"):
            raise ValueError(f"unknown task template name {self.name!r}")
        if not self.source_header or not self.response_header:
            raise ValueError("template headers must be non-empty")

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskTemplate":
        return cls(
            name=doc["name"],
            shots=tuple(doc.get("shots", ())),
            source_header=doc["source_header"],
            response_header=doc["response_header"],
            separator=doc.get("separator", "\n"),
        )


def load_template(path: str) -> TaskTemplate:
    with open(path, encoding="utf-8") as fh:
        return TaskTemplate.from_dict(json.load(fh))


def render_prompt(
    tpl: TaskTemplate,
    source: str,
    history: Sequence[str] | None = None,
) -> tuple[str, tuple[int, int]]:
    """Render the few-shot prompt and report the character span of the source.

    Layout: each shot followed by the separator, then the headed source, then
    any speaker-tagged history turns, then the response header. The returned
    span covers exactly the instance's source content (for dialogue, the
    knowledge snippet; history is part of the prompt, not the source).
    """
    if not source.strip():
        raise ValueError("instance source must be non-empty")
    parts = []
    for shot in tpl.shots:
        parts.append(shot)
        parts.append(tpl.separator)
    parts.append(tpl.source_header)
    start = sum(len(p) for p in parts)
    parts.append(source)
    end = start + len(source)
    parts.append(tpl.separator)
    for turn in history or ():
        parts.append(turn)
        parts.append(tpl.separator)
    parts.append(tpl.response_header)
    return "".join(parts), (start, end)


def segment(
    text: str, source_char_span: tuple[int, int], backend: Backend
) -> SegmentedSequence:
    """Tokenize ``text`` and bracket the source span with token indices.

    Boundaries come from tokenizing the text prefixes ending at the span
    edges. A token partially overlapping an edge is included whole, so the
    token range [s, c) always covers at least the (whitespace-trimmed)
    requested span. Exact for tokenizers whose output on a text prefix is a
    prefix of their output on the text, which holds for whitespace and
    word-level tokenization.
    """
    start, end = source_char_span
    if not 0 <= start <= end <= len(text):
        raise ValueError(f"span {source_char_span} outside text of length {len(text)}")
    # Trim span edges that point at whitespace; no token covers those chars.
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start == end:
        raise ValueError(f"source span {source_char_span} maps to an empty token range")
    ids = backend.tokenize(text)
    if not ids:
        raise ValueError("text tokenized to an empty sequence")
    s = len(backend.tokenize(text[:start]))
    if start > 0 and not text[start - 1].isspace():
        # The span starts inside a token; expand outward to include it whole.
        s -= 1
    c = len(backend.tokenize(text[:end]))
    s = max(0, min(s, len(ids)))
    c = min(c, len(ids))
    if c <= s:
        raise ValueError(f"source span {source_char_span} maps to an empty token range")
    return SegmentedSequence(tokens=tuple(ids), s=s, c=c)
