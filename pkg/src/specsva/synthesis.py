"""Phase 4: statement pruning, antecedent/consequent decomposition and
deterministic SVA assembly."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from . import prompts
from ._validation import check_identifier
from .formalization import BatchResult, FormalStatement, referenced_signals
from .gateway import ChatRequest, LLMGateway
from .regularization import MappingTable
from .responses import fenced_blocks, labeled_blocks
from .sva import AssertionAst, SvaSyntaxError, parse_sequence, print_ast, print_sequence, sequence_signals

log = logging.getLogger(__name__)

_CONNECTIVE = re.compile(r"=>|\bimplies\b", re.IGNORECASE)
_CLOCK = re.compile(r"^(clk|clock)", re.IGNORECASE)
_RESET = re.compile(r"^(rst|reset)", re.IGNORECASE)


class DecompositionFailed(ValueError):
    pass


@dataclass(frozen=True)
class SequencePair:
    antecedent: str
    consequent: str
    source_statement: int

    def to_dict(self) -> dict:
        return {"antecedent": self.antecedent, "consequent": self.consequent,
                "source_statement": self.source_statement}


@dataclass(frozen=True)
class GeneratedAssertion:
    name: str
    source: str
    statement: int
    pair: Optional[SequencePair] = None


def prune_statements(stmts, table: MappingTable) -> list[FormalStatement]:
    """Drop statements that mention no signal from the table or port list."""
    return [s for s in stmts if referenced_signals(s.text, table)]


def _validate_side(label: str, text: str, known: frozenset) -> str:
    try:
        seq = parse_sequence(" ".join(text.split()))
    except SvaSyntaxError as exc:
        raise DecompositionFailed(f"{label} does not parse: {exc}") from None
    names = sequence_signals(seq)
    unknown = sorted(names - known)
    if unknown:
        raise DecompositionFailed(f"{label} uses unknown signals: {', '.join(unknown)}")
    if not names:
        raise DecompositionFailed(f"{label} references no known signal")
    return print_sequence(seq)


def _read_pair(reply: str, index: int, known: frozenset) -> SequencePair:
    blocks = labeled_blocks(reply)
    missing = [k for k in ("ANTECEDENT", "CONSEQUENT") if k not in blocks]
    if missing:
        raise DecompositionFailed(f"missing labeled block(s): {', '.join(missing)}")
    return SequencePair(
        _validate_side("antecedent", blocks["ANTECEDENT"], known),
        _validate_side("consequent", blocks["CONSEQUENT"], known),
        index,
    )


def decompose(stmt: FormalStatement, index: int, table: MappingTable, gateway: LLMGateway,
              temperature: float = 0.7, require_connective: bool = True) -> SequencePair:
    """Ask for antecedent/consequent sequences; one retry with the rejection
    reason echoed back, then DecompositionFailed."""
    if require_connective and not _CONNECTIVE.search(stmt.text):
        raise DecompositionFailed("statement has no implication structure")
    known = table.known_signals
    base = prompts.DECOMPOSE_USER.format(signals=", ".join(sorted(known)), statement=stmt.text)
    req = ChatRequest(prompts.DECOMPOSE_SYSTEM, base, temperature)
    try:
        return _read_pair(gateway.complete(req), index, known)
    except DecompositionFailed as exc:
        log.info("statement %d: retrying decomposition: %s", index, exc)
        retry = ChatRequest(prompts.DECOMPOSE_SYSTEM, prompts.DECOMPOSE_RETRY.format(base=base, error=exc),
                            temperature)
    try:
        return _read_pair(gateway.complete(retry), index, known)
    except DecompositionFailed as exc:
        raise DecompositionFailed(f"statement {index}: {exc}") from None


def assemble(pair: SequencePair, clock: str, reset: Optional[str], name: str,
             reset_active_low: bool = False) -> str:
    """Deterministic SVA text for a validated pair."""
    check_identifier(name, "assertion name")
    check_identifier(clock, "clock name")
    if reset is not None:
        check_identifier(reset, "reset name")
    ast = AssertionAst(name, clock, parse_sequence(pair.antecedent), parse_sequence(pair.consequent),
                       reset, reset_active_low)
    return print_ast(ast)


def one_shot(stmt: FormalStatement, table: MappingTable, gateway: LLMGateway, clock: str,
             reset: Optional[str], name: str, temperature: float = 0.7) -> str:
    """Whole assertion from a single request, returned unchecked."""
    req = ChatRequest(
        prompts.ONESHOT_SYSTEM,
        prompts.ONESHOT_USER.format(signals=", ".join(sorted(table.known_signals)), clock=clock,
                                    reset=reset or "(none)", statement=stmt.text, name=name),
        temperature,
    )
    reply = gateway.complete(req)
    blocks = fenced_blocks(reply)
    text = (blocks[0] if blocks else reply).strip()
    return text + "\n"


def guess_clock_reset(table: MappingTable) -> tuple[str, Optional[str], bool]:
    """First table entries that look like a clock and a reset; a trailing
    ``n``/``_n``/``_b`` marks the reset active-low."""
    clock = next((n for n in table.names if _CLOCK.match(n)), None)
    reset = next((n for n in table.names if _RESET.match(n)), None)
    if clock is None:
        log.warning("no clock-like signal in the mapping table, using 'clk'")
        clock = "clk"
    low = bool(reset) and bool(re.search(r"(_n|_b|n)$", reset, re.IGNORECASE))
    return clock, reset, low


def generate_assertions(
    stmts,
    table: MappingTable,
    gateway: LLMGateway,
    clock: str,
    reset: Optional[str] = None,
    reset_active_low: bool = False,
    decomposition: bool = True,
    require_connective: bool = True,
    temperature: float = 0.7,
    workers: int = 1,
) -> BatchResult:
    """Prune, decompose and assemble. Assertion ``p<i>`` comes from statement
    ``i`` of the input list, so a failure never renames its neighbours."""
    stmts = list(stmts)
    known = table.known_signals
    kept = [(i, s) for i, s in enumerate(stmts) if referenced_signals(s.text, table)]

    def run(pair):
        i, stmt = pair
        name = f"p{i}"
        if not decomposition:
            return GeneratedAssertion(name, one_shot(stmt, table, gateway, clock, reset, name, temperature), i), None
        try:
            sp = decompose(stmt, i, table, gateway, temperature, require_connective)
        except DecompositionFailed as exc:
            return None, {"statement": i, "error": "DecompositionFailed", "detail": str(exc)}
        source = assemble(sp, clock, reset, name, reset_active_low)
        # final gate: nothing outside the table/port list reaches the output
        assert sequence_signals(parse_sequence(sp.antecedent)) | sequence_signals(parse_sequence(sp.consequent)) <= known
        return GeneratedAssertion(name, source, i, sp), None

    result = BatchResult()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for made, err in pool.map(run, kept):
            if made is not None:
                result.items.append(made)
            if err is not None:
                result.errors.append(err)
    pruned = len(stmts) - len(kept)
    if pruned:
        log.info("pruned %d statement(s) without known signals", pruned)
    return result
