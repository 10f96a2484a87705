"""Phase 1: segment the specification and extract function descriptions.

The document is split into sentences, grouped into segments of ``m``
sentences, and sent to the LLM one segment at a time. Each prompt carries the
template hint and the ``k`` most recent items extracted so far.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from . import prompts
from .gateway import ChatRequest, LLMGateway
from .responses import MalformedResponse

log = logging.getLogger(__name__)

DEFAULT_M = 12
DEFAULT_K = 5

ABBREVIATIONS = frozenset(
    {"e.g.", "i.e.", "fig.", "figs.", "etc.", "vs.", "approx.", "no.", "sec.", "eq.",
     "cf.", "al.", "resp.", "max.", "min.", "ref.", "tab."}
)
_BOUNDARY = re.compile(r"[.!?][\"')\]]*(\s+)(?=[A-Za-z0-9_\"'(`])")
_TABLE_SEP = re.compile(r"^\|?\s*:?-{2,}:?\s*(\|\s*:?-{2,}:?\s*)*\|?$")
_BULLET = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+")


class EmptyDocument(ValueError):
    pass


@dataclass(frozen=True)
class SpecDocument:
    raw_text: str
    sentences: tuple

    @classmethod
    def from_text(cls, raw: str) -> "SpecDocument":
        return cls(raw, tuple(split_sentences(raw)))


@dataclass(frozen=True)
class Segment:
    index: int
    sentences: tuple

    @property
    def text(self) -> str:
        return "\n".join(self.sentences)


@dataclass(frozen=True)
class FunctionDescription:
    text: str
    source_segment: int
    critical: Optional[bool] = None
    flags: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"text": self.text, "source_segment": self.source_segment,
                "critical": self.critical, "flags": list(self.flags)}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionDescription":
        return cls(d["text"], d["source_segment"], d.get("critical"), tuple(d.get("flags", ())))


def _row_cells(line: str) -> list[str]:
    return [c.strip() for c in line.strip().strip("|").split("|")]


def prose_blocks(raw: str) -> list[str]:
    """Paragraphs, list items and linearized table rows, in document order.

    Headings and fenced code are dropped. A table row becomes
    ``"header1: value1; header2: value2."``.
    """
    blocks: list[str] = []
    para: list[str] = []
    header: list[str] | None = None
    in_code = False

    def flush():
        if para:
            blocks.append(" ".join(para))
            para.clear()

    for line in raw.replace("\r\n", "\n").split("\n"):
        stripped = line.strip()
        if stripped.startswith("```"):
            flush()
            in_code = not in_code
            continue
        if in_code:
            continue
        if stripped.startswith("|"):
            flush()
            if _TABLE_SEP.match(stripped):
                continue
            cells = _row_cells(stripped)
            if header is None:
                header = cells
                continue
            pairs = [f"{h}: {v}" for h, v in zip(header, cells) if v]
            if pairs:
                blocks.append("; ".join(pairs).rstrip(".") + ".")
            continue
        header = None
        if not stripped or stripped.startswith("#"):
            flush()
            continue
        if _BULLET.match(line):
            flush()
            para.append(_BULLET.sub("", line, count=1).strip())
            continue
        para.append(stripped)
    flush()
    return blocks


def _split_block(block: str) -> list[str]:
    out = []
    start = 0
    for m in _BOUNDARY.finditer(block):
        end = m.start(1)
        candidate = block[start:end]
        last_word = candidate.rsplit(None, 1)[-1].lower() if candidate.strip() else ""
        if last_word in ABBREVIATIONS:
            continue
        out.append(candidate.strip())
        start = m.end(1)
    tail = block[start:].strip()
    if tail:
        out.append(tail)
    return [s for s in out if s]


def split_sentences(raw: str) -> list[str]:
    """Split on ``.``/``!``/``?`` followed by whitespace and a word start,
    skipping common abbreviations.

    Lowercase starts count because specs often open a sentence with a
    signal name (``busy returns low ...``).
    """
    sentences = []
    for block in prose_blocks(raw):
        sentences.extend(_split_block(block))
    return sentences


def segment(doc: SpecDocument, m: int = DEFAULT_M) -> list[Segment]:
    if m < 1:
        raise ValueError("m must be at least 1")
    if not doc.sentences:
        raise EmptyDocument("specification has no sentences")
    s = doc.sentences
    return [Segment(i, tuple(s[j:j + m])) for i, j in enumerate(range(0, len(s), m))]


def build_phase1_prompt(
    template: str,
    seg: Segment,
    history: list,
    k: int = DEFAULT_K,
    temperature: float = 0.7,
) -> ChatRequest:
    """Template hint, then the segment, then the newest ``k`` history items."""
    if k < 1:
        raise ValueError("k must be at least 1")
    recent = list(history)[-k:]
    hist = "\n".join(f"- {d.text}" for d in recent) if recent else prompts.NO_HISTORY
    user = prompts.EXTRACT_USER.format(
        template=template, index=seg.index, segment=seg.text, history=hist
    )
    return ChatRequest(prompts.EXTRACT_SYSTEM, user, temperature)


def parse_item_lines(text: str, segment_index: int) -> list[str]:
    """Items from a ``- item`` per line answer; ``NONE`` means no items."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines == ["NONE"]:
        return []
    items = []
    for ln in lines:
        if not ln.startswith("- "):
            raise MalformedResponse(f"line is not a '- ' item: {ln[:60]!r}", f"segment {segment_index}")
        body = ln[2:].strip()
        if not body:
            raise MalformedResponse("empty item", f"segment {segment_index}")
        # one sentence per item: split run-ons instead of rejecting them
        items.extend(_split_block(body))
    return items


def extract_descriptions(
    doc: SpecDocument,
    m: int,
    k: int,
    gateway: LLMGateway,
    template: str = prompts.TEMPLATE_HINT,
    temperature: float = 0.7,
) -> list[FunctionDescription]:
    """Run the extraction loop strictly in segment order."""
    if not doc.sentences:
        return []
    items: list[FunctionDescription] = []
    for seg in segment(doc, m):
        req = build_phase1_prompt(template, seg, items, k, temperature)
        reply = gateway.complete(req)
        texts = parse_item_lines(reply, seg.index)
        log.debug("segment %d: %d items", seg.index, len(texts))
        items.extend(FunctionDescription(t, seg.index) for t in texts)
    return items
