"""Phase 3: chain-of-thought translation of each critical sentence into one
formal statement per verification object."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import prompts
from .extraction import FunctionDescription
from .gateway import ChatRequest, LLMGateway
from .regularization import MappingTable
from .responses import MalformedResponse, fenced_blocks, identifier_tokens

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FormalStatement:
    text: str
    source_sentence: int
    referenced_signals: tuple
    object_index: int = 0

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "source_sentence": self.source_sentence,
            "object_index": self.object_index,
            "referenced_signals": list(self.referenced_signals),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FormalStatement":
        return cls(d["text"], d["source_sentence"], tuple(d["referenced_signals"]), d.get("object_index", 0))


@dataclass
class BatchResult:
    """Outputs of a per-item LLM stage plus the failures it recorded."""

    items: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def referenced_signals(text: str, table: MappingTable) -> tuple:
    """Table or port names appearing as tokens in ``text``, sorted.

    Always recomputed here; what the model claims to reference is ignored.
    """
    known = table.known_signals
    return tuple(sorted({t for t in identifier_tokens(text) if t in known}))


def make_statement(text: str, sentence: int, table: MappingTable, object_index: int = 0) -> FormalStatement:
    return FormalStatement(text, sentence, referenced_signals(text, table), object_index)


def formalize(item: FunctionDescription, index: int, table: MappingTable, gateway: LLMGateway,
              temperature: float = 0.7) -> list[FormalStatement]:
    signals = ", ".join(table.names) or "(none)"
    req = ChatRequest(
        prompts.FORMALIZE_SYSTEM,
        prompts.FORMALIZE_USER.format(signals=signals, sentence=item.text),
        temperature,
    )
    reply = gateway.complete(req)
    blocks = fenced_blocks(reply)
    if not blocks:
        raise MalformedResponse("no fenced block with formal statements", f"sentence {index}")
    lines = [ln.strip() for b in blocks for ln in b.splitlines() if ln.strip()]
    if not lines:
        raise MalformedResponse("fenced block is empty", f"sentence {index}")
    return [make_statement(text, index, table, j) for j, text in enumerate(lines)]


def formalize_all(items, table: MappingTable, gateway: LLMGateway, temperature: float = 0.7,
                  workers: int = 1) -> BatchResult:
    """Formalize every sentence not marked non-critical; failures are recorded
    per sentence and do not stop the batch."""
    items = list(items)

    def run(pair):
        i, item = pair
        if item.critical is False:
            return [], None
        try:
            return formalize(item, i, table, gateway, temperature), None
        except MalformedResponse as exc:
            log.warning("sentence %d: %s", i, exc)
            return [], {"sentence": i, "error": type(exc).__name__, "detail": str(exc)}

    result = BatchResult()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for stmts, err in pool.map(run, enumerate(items)):
            result.items.extend(stmts)
            if err:
                result.errors.append(err)
    return result


def passthrough_statements(items, table: MappingTable) -> list[FormalStatement]:
    """Sentences used verbatim as statements (formalization switched off)."""
    return [make_statement(item.text, i, table) for i, item in enumerate(items) if item.critical is not False]
