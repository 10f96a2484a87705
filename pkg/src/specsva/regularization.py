"""Phase 2: signal mapping table and the three regularization steps
(redundancy removal, description-to-name conversion, non-critical pruning)."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from . import prompts
from .extraction import FunctionDescription, SpecDocument
from .gateway import ChatRequest, LLMGateway
from .responses import MalformedResponse, fenced_blocks, identifier_tokens, looks_like_signal
from .sva import is_identifier

log = logging.getLogger(__name__)

FLAG_HALLUCINATED = "hallucinated_signal"
FLAG_SUBSTITUTION_MALFORMED = "substitution_malformed"
FLAG_CRITICALITY_UNPARSED = "criticality_unparsed"


class HallucinatedSignal(ValueError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(set(names))
        super().__init__("identifiers outside the signal table: " + ", ".join(self.names))


@dataclass(frozen=True)
class MappingTable:
    entries: tuple = ()  # (signal_name, description) pairs
    port_names: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        bad = [n for n in names if not is_identifier(n)]
        if bad:
            raise ValueError(f"invalid signal names: {bad}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate signal names in mapping table")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    @property
    def known_signals(self) -> frozenset:
        return frozenset(self.names) | self.port_names

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [{"name": n, "description": d} for n, d in self.entries],
            "port_names": sorted(self.port_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MappingTable":
        entries = tuple((e["name"], e["description"]) for e in d.get("entries", []))
        return cls(entries, frozenset(d.get("port_names", [])))

    @classmethod
    def from_json_file(cls, path) -> "MappingTable":
        data = json.loads(Path(path).read_text())
        if "data" in data and isinstance(data["data"], dict):
            data = data["data"]
        return cls.from_dict(data)

    def render(self) -> str:
        return "\n".join(f"{n}: {d}" for n, d in self.entries)


def _parse_table_json(text: str) -> list:
    blocks = fenced_blocks(text)
    candidate = blocks[0] if blocks else text
    start, end = candidate.find("["), candidate.rfind("]")
    if start < 0 or end < start:
        raise MalformedResponse("no JSON array in mapping table answer", "mapping")
    try:
        rows = json.loads(candidate[start:end + 1])
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"mapping table JSON does not parse: {exc}", "mapping") from exc
    if not isinstance(rows, list):
        raise MalformedResponse("mapping table answer is not a list", "mapping")
    return rows


def build_mapping_table(doc: SpecDocument, gateway: LLMGateway, temperature: float = 0.7) -> MappingTable:
    req = ChatRequest(prompts.MAPPING_SYSTEM, prompts.MAPPING_USER.format(spec=doc.raw_text.strip()), temperature)
    rows = _parse_table_json(gateway.complete(req))
    entries, ports, seen = [], set(), set()
    for row in rows:
        if not isinstance(row, dict) or "name" not in row:
            raise MalformedResponse(f"mapping row without a name: {row!r}", "mapping")
        name = str(row["name"]).strip()
        if not is_identifier(name):
            log.warning("dropping mapping entry with invalid signal name %r", name)
            continue
        if name in seen:
            log.warning("dropping duplicate mapping entry %r", name)
            continue
        seen.add(name)
        entries.append((name, str(row.get("description", "")).strip()))
        if row.get("port"):
            ports.add(name)
    if not entries:
        log.warning("mapping table is empty")
    return MappingTable(tuple(entries), frozenset(ports))


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def dedupe(items: Iterable[FunctionDescription]) -> list[FunctionDescription]:
    """Keep the first of each group of sentences equal up to case and whitespace."""
    seen = set()
    out = []
    for item in items:
        key = _normalize(item.text)
        if key not in seen:
            seen.add(key)
            out.append(item)
    return out


def check_identifiers(rewritten: str, original: str, table: MappingTable) -> None:
    """Raise HallucinatedSignal if the rewrite introduces a signal-looking
    token found neither in the table nor in the original sentence."""
    allowed = table.known_signals | set(identifier_tokens(original))
    bad = [t for t in identifier_tokens(rewritten) if looks_like_signal(t) and t not in allowed]
    if bad:
        raise HallucinatedSignal(bad)


def _single_line(reply: str) -> str:
    lines = [ln.strip() for ln in reply.strip().splitlines() if ln.strip()]
    if len(lines) != 1:
        raise MalformedResponse(f"expected one line, got {len(lines)}")
    line = lines[0]
    if line.startswith("- "):
        line = line[2:].strip()
    if len(line) >= 2 and line[0] == line[-1] and line[0] in "\"'":
        line = line[1:-1].strip()
    if not line:
        raise MalformedResponse("empty rewrite")
    return line


def _substitute_one(item: FunctionDescription, table: MappingTable, gateway: LLMGateway,
                    temperature: float) -> FunctionDescription:
    rendered = table.render()
    req = ChatRequest(
        prompts.SUBSTITUTE_SYSTEM,
        prompts.SUBSTITUTE_USER.format(table=rendered, sentence=item.text),
        temperature,
    )
    error: Exception | None = None
    for attempt in range(2):
        try:
            rewritten = _single_line(gateway.complete(req))
            check_identifiers(rewritten, item.text, table)
            return replace(item, text=rewritten)
        except HallucinatedSignal as exc:
            error = exc
            req = ChatRequest(
                prompts.SUBSTITUTE_SYSTEM,
                prompts.SUBSTITUTE_RETRY.format(bad=", ".join(exc.names), table=rendered, sentence=item.text),
                temperature,
            )
        except MalformedResponse as exc:
            error = exc
    flag = FLAG_HALLUCINATED if isinstance(error, HallucinatedSignal) else FLAG_SUBSTITUTION_MALFORMED
    log.warning("keeping original sentence %r: %s", item.text, error)
    return replace(item, flags=item.flags + (flag,))


def substitute_names(items, table: MappingTable, gateway: LLMGateway,
                     temperature: float = 0.7, workers: int = 1) -> list[FunctionDescription]:
    """Rewrite descriptive phrases into signal names, one LLM call per sentence.

    A rewrite that introduces an unknown signal-looking identifier is retried
    once; if it fails again the original sentence is kept and flagged.
    """
    items = list(items)
    if not len(table):
        log.warning("empty mapping table: name substitution skipped")
        return items
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda it: _substitute_one(it, table, gateway, temperature), items))


_YES_NO = re.compile(r"^\W*(YES|NO)\b", re.IGNORECASE)


def classify_critical(reply: str) -> bool | None:
    m = _YES_NO.match(reply.strip())
    if m is None:
        return None
    return m.group(1).upper() == "YES"


def _prune_one(item: FunctionDescription, gateway: LLMGateway, temperature: float) -> FunctionDescription | None:
    req = ChatRequest(prompts.CRITICAL_SYSTEM, prompts.CRITICAL_USER.format(sentence=item.text), temperature)
    verdict = classify_critical(gateway.complete(req))
    if verdict is None:
        # fail open: an unreadable verdict keeps the behavior
        log.warning("unreadable criticality verdict for %r, keeping it", item.text)
        return replace(item, critical=True, flags=item.flags + (FLAG_CRITICALITY_UNPARSED,))
    return replace(item, critical=True) if verdict else None


def prune_noncritical(items, gateway: LLMGateway, temperature: float = 0.7,
                      workers: int = 1) -> list[FunctionDescription]:
    items = list(items)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda it: _prune_one(it, gateway, temperature), items))
    return [r for r in results if r is not None]


def regularize(items, table: MappingTable, gateway: LLMGateway, temperature: float = 0.7,
               workers: int = 1) -> list[FunctionDescription]:
    """dedupe, then substitute names, then prune non-critical sentences."""
    items = dedupe(items)
    items = substitute_names(items, table, gateway, temperature, workers)
    return prune_noncritical(items, gateway, temperature, workers)
