"""Parser, printer and temporal event extraction for an SVA subset.

Supported: boolean expressions over signals, fixed ``##N`` delays,
overlapped implication ``|->``, the ``property ... endproperty`` wrapper with
an optional ``disable iff`` clause, and ``assert property`` directives.
Ranged delays, repetition, ``throughout`` and local variables are rejected.

>>> ast = parse("property p0; @(posedge clk) req && !ack |-> ##3 timeout ##1 retry; endproperty")
>>> ant, cons = events(ast)
>>> sorted(ant), cons
([TemporalEvent(signal='ack', offset=0), TemporalEvent(signal='req', offset=0)], [TemporalEvent(signal='timeout', offset=3), TemporalEvent(signal='retry', offset=4)])
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from ._lexer import LexError, Token, TokenStream, make_lexer

__all__ = [
    "Ident", "Number", "Select", "Unary", "Binary", "Call", "Expr",
    "Step", "Sequence", "AssertionAst", "TemporalEvent", "SvaSyntaxError",
    "parse", "parse_sequence", "parse_file", "print_ast", "print_sequence",
    "print_expr", "events", "sequence_signals", "is_identifier", "split_units",
]

IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
KEYWORDS = frozenset(
    {"property", "endproperty", "assert", "posedge", "negedge", "disable", "iff",
     "sequence", "endsequence", "throughout", "within", "intersect", "and", "or", "not"}
)


def is_identifier(name: str) -> bool:
    return bool(IDENT_RE.match(name)) and name not in KEYWORDS


class SvaSyntaxError(ValueError):
    """Raised on malformed SVA, with 1-based position and expected tokens."""

    def __init__(self, message: str, line: int = 0, col: int = 0, expected: frozenset = frozenset()):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Number:
    text: str


@dataclass(frozen=True)
class Select:
    name: str
    msb: "Expr"
    lsb: Optional["Expr"] = None


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Ident, Number, Select, Unary, Binary, Call]


@dataclass(frozen=True)
class Step:
    delay: int
    expr: Expr


@dataclass(frozen=True)
class Sequence:
    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a sequence needs at least one step")


@dataclass(frozen=True)
class AssertionAst:
    name: str
    clock: str
    antecedent: Sequence
    consequent: Sequence
    reset: Optional[str] = None
    reset_active_low: bool = False


@dataclass(frozen=True, order=True)
class TemporalEvent:
    signal: str
    offset: int

    def __str__(self) -> str:
        return f"{self.signal}@{self.offset}"

    @classmethod
    def from_string(cls, text: str) -> "TemporalEvent":
        signal, _, offset = text.rpartition("@")
        return cls(signal, int(offset))


# -- precedence table (lowest first) ------------------------------------------

BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^", "^~", "~^"),
    ("&",),
    ("==", "!=", "===", "!=="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]
PRECEDENCE = {op: i for i, ops in enumerate(BINARY_LEVELS) for op in ops}
UNARY_OPS = ("!", "~")
_UNARY_PREC = len(BINARY_LEVELS)

_OPERATORS = [
    "|->", "|=>", "##", "===", "!==", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>",
    "^~", "~^", "<", ">", "!", "~", "&", "|", "^", "+", "-", "*", "/", "%",
    "(", ")", "[", "]", ":", ";", "@", ",",
]
_tokenize = make_lexer(_OPERATORS)


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        try:
            tokens = _tokenize(src)
        except LexError as exc:
            raise SvaSyntaxError(str(exc).split(" at line")[0], exc.line, exc.col) from None
        self.ts = TokenStream(tokens, SvaSyntaxError)

    # unit-level ------------------------------------------------------------
    def unit(self) -> AssertionAst:
        ts = self.ts
        if ts.at("property"):
            ast = self.property_decl()
            if not ts.at_kind("eof"):
                self.assert_directive(ast.name)
            ts.expect_kind("eof", "end of input")
            return ast
        label = None
        if ts.tok.kind == "id" and ts.peek().text == ":" and ts.tok.text not in KEYWORDS:
            label = ts.advance().text
            ts.expect(":")
        if not ts.at("assert"):
            raise ts.fail({"property", "assert"})
        ts.expect("assert")
        ts.expect("property")
        ts.expect("(")
        clock, reset, low, ant, cons = self.property_body()
        ts.expect(")")
        ts.expect(";")
        ts.expect_kind("eof", "end of input")
        name = label[:-2] if label and label.endswith("_a") else (label or "anon")
        return AssertionAst(name, clock, ant, cons, reset, low)

    def property_decl(self) -> AssertionAst:
        ts = self.ts
        ts.expect("property")
        name = self.identifier("property name")
        ts.expect(";")
        clock, reset, low, ant, cons = self.property_body()
        ts.expect(";")
        ts.expect("endproperty")
        if ts.accept(":"):
            closing = self.identifier("property name")
            if closing != name:
                raise ts.fail({name}, f"endproperty label {closing!r} does not match {name!r}")
        return AssertionAst(name, clock, ant, cons, reset, low)

    def assert_directive(self, prop_name: str) -> None:
        ts = self.ts
        if ts.tok.kind == "id" and ts.peek().text == ":":
            self.identifier("assertion label")
            ts.expect(":")
        ts.expect("assert")
        ts.expect("property")
        ts.expect("(")
        target = self.identifier("property name")
        if target != prop_name:
            raise ts.fail({prop_name}, f"assert refers to {target!r}, expected {prop_name!r}")
        ts.expect(")")
        ts.expect(";")

    def property_body(self):
        ts = self.ts
        ts.expect("@")
        ts.expect("(")
        ts.expect("posedge")
        clock = self.identifier("clock signal")
        ts.expect(")")
        reset, low = None, False
        if ts.accept("disable"):
            ts.expect("iff")
            ts.expect("(")
            low = bool(ts.accept("!"))
            reset = self.identifier("reset signal")
            ts.expect(")")
        ant = self.sequence()
        if ts.at("|=>"):
            raise ts.fail({"|->"}, "non-overlapped implication '|=>' is not supported")
        ts.expect("|->")
        cons = self.sequence()
        return clock, reset, low, ant, cons

    def identifier(self, label: str) -> str:
        t = self.ts.tok
        if t.kind == "id" and t.text not in KEYWORDS:
            self.ts.advance()
            return t.text
        raise self.ts.fail({label})

    # sequences -------------------------------------------------------------
    def sequence(self) -> Sequence:
        ts = self.ts
        steps = []
        delay = self.delay() if ts.at("##") else 0
        steps.append(Step(delay, self.expr()))
        while ts.at("##"):
            delay = self.delay()
            steps.append(Step(delay, self.expr()))
        return Sequence(tuple(steps))

    def delay(self) -> int:
        ts = self.ts
        ts.expect("##")
        if ts.at("["):
            raise ts.fail({"integer delay"}, "ranged delays '##[m:n]' are not supported")
        t = ts.tok
        if t.kind != "num" or not t.text.replace("_", "").isdigit():
            raise ts.fail({"non-negative integer delay"})
        ts.advance()
        return int(t.text.replace("_", ""))

    # expressions -----------------------------------------------------------
    def expr(self, level: int = 0) -> Expr:
        if level == _UNARY_PREC:
            return self.unary()
        ts = self.ts
        left = self.expr(level + 1)
        while ts.tok.kind == "op" and ts.tok.text in BINARY_LEVELS[level]:
            op = ts.advance().text
            right = self.expr(level + 1)
            left = Binary(op, left, right)
        return left

    def unary(self) -> Expr:
        ts = self.ts
        if ts.tok.kind == "op" and ts.tok.text in UNARY_OPS:
            op = ts.advance().text
            return Unary(op, self.unary())
        return self.primary()

    def no_repetition(self) -> None:
        ts = self.ts
        if ts.at("[") and ts.peek().text in ("*", "=", "-", "+"):
            raise ts.fail({"expression"}, "repetition operators are not supported")

    def primary(self) -> Expr:
        ts = self.ts
        t = ts.tok
        if t.kind == "num":
            ts.advance()
            return Number(re.sub(r"\s+", "", t.text))
        if t.kind == "sysid":
            ts.advance()
            ts.expect("(")
            args = [self.expr()]
            while ts.accept(","):
                args.append(self.expr())
            ts.expect(")")
            return Call(t.text, tuple(args))
        if t.kind == "id" and t.text not in KEYWORDS:
            ts.advance()
            self.no_repetition()
            if ts.accept("["):
                msb = self.expr()
                lsb = self.expr() if ts.accept(":") else None
                ts.expect("]")
                return Select(t.text, msb, lsb)
            return Ident(t.text)
        if ts.accept("("):
            inner = self.expr()
            ts.expect(")")
            self.no_repetition()
            return inner
        if t.kind == "op" and t.text == "[":
            raise ts.fail({"expression"}, "repetition operators are not supported")
        raise ts.fail({"identifier", "number", "(", "!", "~", "$function"})


def parse(src: str) -> AssertionAst:
    """Parse one assertion: a property declaration (optionally followed by
    its ``assert property`` directive) or an inline ``assert property(...)``."""
    return _Parser(src).unit()


def parse_sequence(src: str) -> Sequence:
    p = _Parser(src)
    seq = p.sequence()
    p.ts.expect_kind("eof", "end of input")
    return seq


def parse_expr(src: str) -> Expr:
    p = _Parser(src)
    e = p.expr()
    p.ts.expect_kind("eof", "end of input")
    return e


# -- file handling -----------------------------------------------------------

_ASSERT_REF = re.compile(r"^\s*(?:[A-Za-z_]\w*\s*:\s*)?assert\s+property\s*\(\s*([A-Za-z_]\w*)\s*\)\s*;")
_PROPERTY_START = re.compile(r"^\s*property\s+([A-Za-z_]\w*)")
_ASSERT_START = re.compile(r"^\s*(?:[A-Za-z_]\w*\s*:\s*)?assert\b")


def _strip_comments(src: str) -> str:
    src = re.sub(r"/\*.*?\*/", lambda m: "\n" * m.group().count("\n"), src, flags=re.DOTALL)
    return re.sub(r"//[^\n]*", "", src)


def split_units(src: str) -> list[tuple[int, str]]:
    """Split an .sv file into assertion units as ``(first line number, text)``.

    A unit starts at a ``property`` line or at an ``assert`` line that does not
    refer to the property currently open; everything up to the next start
    belongs to the unit.
    """
    units: list[tuple[int, list[str]]] = []
    open_prop: str | None = None
    for lineno, line in enumerate(_strip_comments(src).splitlines(), start=1):
        if not line.strip():
            continue
        m = _PROPERTY_START.match(line)
        ref = _ASSERT_REF.match(line)
        if m:
            open_prop = m.group(1)
            units.append((lineno, [line]))
        elif ref and open_prop == ref.group(1) and units:
            units[-1][1].append(line)
            open_prop = None
        elif _ASSERT_START.match(line) or not units:
            open_prop = None
            units.append((lineno, [line]))
        else:
            units[-1][1].append(line)
    return [(n, "\n".join(lines)) for n, lines in units]


def parse_file(src: str) -> Iterator[tuple[int, str, AssertionAst | SvaSyntaxError]]:
    """Yield ``(line, unit_text, ast_or_error)`` for every unit in a file.

    Errors are yielded, not raised, so one bad assertion does not hide the rest.
    """
    for lineno, text in split_units(src):
        try:
            yield lineno, text, parse(text)
        except SvaSyntaxError as exc:
            yield lineno, text, exc


# -- printer -----------------------------------------------------------------

def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return PRECEDENCE[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    return _UNARY_PREC + 1


def print_expr(e: Expr) -> str:
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Number):
        return e.text
    if isinstance(e, Select):
        inner = print_expr(e.msb) if e.lsb is None else f"{print_expr(e.msb)}:{print_expr(e.lsb)}"
        return f"{e.name}[{inner}]"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        inner = print_expr(e.operand)
        if _prec(e.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"{e.op}{inner}"
    if isinstance(e, Binary):
        p = PRECEDENCE[e.op]
        left = print_expr(e.left)
        right = print_expr(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


def print_sequence(seq: Sequence) -> str:
    parts = []
    for i, step in enumerate(seq.steps):
        body = print_expr(step.expr)
        if i == 0 and step.delay == 0:
            parts.append(body)
        else:
            parts.append(f"##{step.delay} {body}")
    return " ".join(parts)


def print_ast(ast: AssertionAst) -> str:
    header = f"@(posedge {ast.clock})"
    if ast.reset:
        header += f" disable iff ({'!' if ast.reset_active_low else ''}{ast.reset})"
    return (
        f"property {ast.name};\n"
        f"  {header} {print_sequence(ast.antecedent)} |-> {print_sequence(ast.consequent)};\n"
        f"endproperty\n"
        f"{ast.name}_a: assert property({ast.name});\n"
    )


# -- temporal events ---------------------------------------------------------

def _expr_signals(e: Expr) -> Iterator[str]:
    if isinstance(e, Ident):
        yield e.name
    elif isinstance(e, Select):
        yield e.name
        yield from _expr_signals(e.msb)
        if e.lsb is not None:
            yield from _expr_signals(e.lsb)
    elif isinstance(e, Unary):
        yield from _expr_signals(e.operand)
    elif isinstance(e, Binary):
        yield from _expr_signals(e.left)
        yield from _expr_signals(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _expr_signals(a)


def _step_events(seq: Sequence, start: int) -> tuple[list[TemporalEvent], int]:
    out: list[TemporalEvent] = []
    t = start
    for step in seq.steps:
        t += step.delay
        seen = set()
        for name in _expr_signals(step.expr):
            if name not in seen:
                seen.add(name)
                out.append(TemporalEvent(name, t))
    return out, t


def sequence_signals(seq: Sequence) -> set[str]:
    return {name for step in seq.steps for name in _expr_signals(step.expr)}


def events(ast: AssertionAst) -> tuple[frozenset, list[TemporalEvent]]:
    """Temporally index an assertion.

    Antecedent steps accumulate their delays from tick 0. Under overlapped
    implication the consequent starts at the antecedent's last tick, so the
    handshake ``req && !ack |-> ##3 timeout ##1 retry`` gives
    ``{req@0, ack@0}`` and ``[timeout@3, retry@4]``.
    """
    ant, last = _step_events(ast.antecedent, 0)
    cons, _ = _step_events(ast.consequent, last)
    seen = set()
    ordered = []
    for ev in cons:
        if ev not in seen:
            seen.add(ev)
            ordered.append(ev)
    return frozenset(ant), ordered
