"""Golden-RTL static analysis: a Verilog subset parser and the temporally
unrolled Signal Dependency Graph (SDG) built from it.

Only whole signals are tracked; bit- and part-selects collapse to their base
identifier.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from ._lexer import LexError, TokenStream, make_lexer
from .sva import TemporalEvent

log = logging.getLogger(__name__)

COMBINATIONAL = "combinational"
SEQUENTIAL = "sequential"


class RtlError(ValueError):
    pass


class RtlSyntaxError(RtlError):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected: frozenset = frozenset()):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected


class UnsupportedConstruct(RtlError):
    def __init__(self, construct: str, line: int = 0):
        super().__init__(f"unsupported construct {construct!r} at line {line}")
        self.construct = construct
        self.line = line


class CombinationalCycle(RtlError):
    def __init__(self, cycle: list[str]):
        super().__init__("combinational cycle: " + " -> ".join(cycle))
        self.cycle = cycle


class DepthTooSmall(RtlError):
    pass


@dataclass(frozen=True)
class Condition:
    """An ``if``/``case`` selector; ``uid`` identifies the syntactic occurrence."""

    uid: int
    signals: tuple


@dataclass(frozen=True)
class Assignment:
    target: str
    rhs: tuple  # identifier occurrences, duplicates kept
    kind: str
    conditions: tuple = ()
    line: int = 0


@dataclass
class RtlModule:
    name: str
    ports: dict = field(default_factory=dict)  # name -> direction
    nets: dict = field(default_factory=dict)  # name -> wire/reg/logic/integer
    params: dict = field(default_factory=dict)
    assigns: list = field(default_factory=list)

    @property
    def signals(self) -> set[str]:
        return set(self.ports) | set(self.nets)


@dataclass
class RtlDesign:
    modules: list

    @property
    def signals(self) -> set[str]:
        out: set[str] = set()
        for m in self.modules:
            out |= m.signals
        return out

    @property
    def assigns(self) -> list[Assignment]:
        return [a for m in self.modules for a in m.assigns]


@dataclass(frozen=True, order=True)
class DependencyEdge:
    src: str
    dst: str
    weight: int
    kind: str


# -- parser ------------------------------------------------------------------

_OPERATORS = [
    "<<<", ">>>", "===", "!==", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>",
    "~&", "~|", "~^", "^~", "**", "->", "+:", "-:",
    "<", ">", "!", "~", "&", "|", "^", "+", "-", "*", "/", "%", "?", ":",
    "(", ")", "[", "]", "{", "}", ";", ",", "=", "@", "#", ".",
]
_tokenize = make_lexer(_OPERATORS)

_UNSUPPORTED_ITEMS = {
    "initial", "generate", "endgenerate", "function", "task", "genvar", "specify",
    "primitive", "for", "while", "repeat", "forever", "fork", "defparam",
}
_NET_TYPES = ("wire", "reg", "logic", "integer", "tri")
_DIRECTIONS = ("input", "output", "inout")

# Verilog binary precedence, lowest first.
_BINARY = [
    ("||",), ("&&",), ("|", "~|"), ("^", "~^", "^~"), ("&", "~&"),
    ("==", "!=", "===", "!=="), ("<", "<=", ">", ">="),
    ("<<", ">>", "<<<", ">>>"), ("+", "-"), ("*", "/", "%"), ("**",),
]
_UNARY = ("!", "~", "&", "|", "^", "~&", "~|", "~^", "^~", "-", "+")


class _Parser:
    def __init__(self, src: str):
        try:
            self.ts = TokenStream(_tokenize(src), RtlSyntaxError)
        except LexError as exc:
            raise RtlSyntaxError(str(exc).split(" at line")[0], exc.line, exc.col) from None
        self._cond_uid = 0
        self.module: RtlModule | None = None

    def design(self) -> RtlDesign:
        modules = []
        ts = self.ts
        while not ts.at_kind("eof"):
            if ts.at("module"):
                modules.append(self.module_decl())
            else:
                raise ts.fail({"module"})
        if not modules:
            raise RtlSyntaxError("no module found", ts.tok.line, ts.tok.col, frozenset({"module"}))
        for m in modules:
            _check_declared(m)
        return RtlDesign(modules)

    def ident(self, label: str = "identifier") -> str:
        t = self.ts.tok
        if t.kind == "id":
            self.ts.advance()
            return t.text
        raise self.ts.fail({label})

    def module_decl(self) -> RtlModule:
        ts = self.ts
        ts.expect("module")
        self.module = mod = RtlModule(self.ident("module name"))
        if ts.accept("#"):
            ts.expect("(")
            while not ts.at(")"):
                ts.accept("parameter")
                self.param_assign()
                if not ts.accept(","):
                    break
            ts.expect(")")
        if ts.accept("("):
            self.port_list()
            ts.expect(")")
        ts.expect(";")
        while not ts.at("endmodule"):
            if ts.at_kind("eof"):
                raise ts.fail({"endmodule"})
            self.module_item()
        ts.expect("endmodule")
        self.module = None
        return mod

    def port_list(self) -> None:
        ts = self.ts
        direction = None
        while not ts.at(")"):
            if ts.at(*_DIRECTIONS):
                direction = ts.advance().text
                net = "wire"
                if ts.at(*_NET_TYPES):
                    net = ts.advance().text
                ts.accept("signed")
                if ts.at("["):
                    self.skip_range()
                name = self.ident("port name")
                self.module.ports[name] = direction
                self.module.nets[name] = net
            else:
                name = self.ident("port name")
                if direction is not None:
                    self.module.ports[name] = direction
                    self.module.nets.setdefault(name, "wire")
                else:
                    self.module.ports[name] = None
            if not ts.accept(","):
                break

    def skip_range(self) -> None:
        ts = self.ts
        ts.expect("[")
        self.expr()
        if ts.accept(":", "+:", "-:"):
            self.expr()
        ts.expect("]")

    def param_assign(self) -> None:
        ts = self.ts
        if ts.at("integer"):
            ts.advance()
        if ts.at("["):
            self.skip_range()
        name = self.ident("parameter name")
        ts.expect("=")
        start = ts.pos
        self.expr()
        self.module.params[name] = " ".join(t.text for t in ts.tokens[start:ts.pos])

    def module_item(self) -> None:
        ts = self.ts
        t = ts.tok
        if t.kind == "id" and t.text in _UNSUPPORTED_ITEMS:
            raise UnsupportedConstruct(t.text, t.line)
        if ts.at("parameter", "localparam"):
            ts.advance()
            self.param_assign()
            while ts.accept(","):
                self.param_assign()
            ts.expect(";")
        elif ts.at(*_DIRECTIONS):
            direction = ts.advance().text
            net = "wire"
            if ts.at(*_NET_TYPES):
                net = ts.advance().text
            ts.accept("signed")
            if ts.at("["):
                self.skip_range()
            names = [self.ident("port name")]
            while ts.accept(","):
                names.append(self.ident("port name"))
            ts.expect(";")
            for n in names:
                if n not in self.module.ports:
                    raise RtlSyntaxError(f"{n!r} is not in the port list", t.line, t.col)
                self.module.ports[n] = direction
                if net != "wire" or n not in self.module.nets:
                    self.module.nets[n] = net
        elif ts.at(*_NET_TYPES):
            self.net_decl()
        elif ts.at("assign"):
            ts.advance()
            self.continuous_assign()
            while ts.accept(","):
                self.continuous_assign()
            ts.expect(";")
        elif ts.at("always", "always_ff", "always_comb", "always_latch"):
            self.always_block()
        elif t.kind == "id" and ts.peek().kind == "id" or (t.kind == "id" and ts.peek().text == "#"):
            raise UnsupportedConstruct("module instantiation", t.line)
        else:
            raise ts.fail({"parameter", "input", "output", "wire", "reg", "assign", "always", "endmodule"})

    def net_decl(self) -> None:
        ts = self.ts
        line = ts.tok.line
        net = ts.advance().text
        ts.accept("signed")
        if ts.at("["):
            self.skip_range()
        while True:
            name = self.ident("net name")
            if ts.at("["):
                self.skip_range()  # memory dimension
            if name in self.module.nets and name not in self.module.ports:
                raise RtlSyntaxError(f"{name!r} declared twice", line, 0)
            self.module.nets[name] = net
            if ts.accept("="):
                rhs = self.expr()
                self.module.assigns.append(Assignment(name, tuple(rhs), COMBINATIONAL, (), line))
            if not ts.accept(","):
                break
        ts.expect(";")

    def continuous_assign(self) -> None:
        ts = self.ts
        line = ts.tok.line
        targets, index_ids = self.lvalue()
        ts.expect("=")
        rhs = self.expr()
        for target in targets:
            self.module.assigns.append(
                Assignment(target, tuple(rhs + index_ids), COMBINATIONAL, (), line)
            )

    def lvalue(self) -> tuple[list[str], list[str]]:
        ts = self.ts
        if ts.accept("{"):
            targets, idx = self.lvalue()
            while ts.accept(","):
                more, more_idx = self.lvalue()
                targets += more
                idx += more_idx
            ts.expect("}")
            return targets, idx
        name = self.ident("assignment target")
        idx: list[str] = []
        while ts.accept("["):
            idx += self.expr()
            if ts.accept(":", "+:", "-:"):
                idx += self.expr()
            ts.expect("]")
        return [name], idx

    def always_block(self) -> None:
        ts = self.ts
        keyword = ts.advance().text
        kind = COMBINATIONAL
        if keyword == "always_comb":
            pass
        elif keyword == "always_latch":
            raise UnsupportedConstruct("always_latch", ts.tok.line)
        else:
            ts.expect("@")
            if ts.accept("*"):
                pass
            else:
                ts.expect("(")
                if ts.accept("*"):
                    pass
                else:
                    edges = []
                    while True:
                        edge = ts.accept("posedge", "negedge")
                        edges.append(edge is not None)
                        self.ident("sensitivity signal")
                        if not ts.accept("or", ","):
                            break
                    if any(edges):
                        if not all(edges):
                            raise UnsupportedConstruct("mixed edge/level sensitivity", ts.tok.line)
                        kind = SEQUENTIAL
                ts.expect(")")
        if keyword == "always_ff" and kind != SEQUENTIAL:
            raise RtlSyntaxError("always_ff needs an edge sensitivity list", ts.tok.line, ts.tok.col)
        self.statement(kind, ())

    def next_condition(self, signals: list[str]) -> Condition:
        self._cond_uid += 1
        return Condition(self._cond_uid, tuple(signals))

    def statement(self, kind: str, conds: tuple) -> None:
        ts = self.ts
        t = ts.tok
        if t.kind == "id" and t.text in _UNSUPPORTED_ITEMS:
            raise UnsupportedConstruct(t.text, t.line)
        if ts.accept(";"):
            return
        if ts.accept("begin"):
            if ts.accept(":"):
                self.ident("block label")
            while not ts.at("end"):
                if ts.at_kind("eof"):
                    raise ts.fail({"end"})
                self.statement(kind, conds)
            ts.expect("end")
            return
        if ts.accept("if"):
            ts.expect("(")
            cond = self.next_condition(self.expr())
            ts.expect(")")
            self.statement(kind, conds + (cond,))
            if ts.accept("else"):
                self.statement(kind, conds + (cond,))
            return
        if ts.at("case", "casez", "casex", "unique", "priority"):
            if ts.at("unique", "priority"):
                ts.advance()
            ts.expect("case", "casez", "casex")
            ts.expect("(")
            cond = self.next_condition(self.expr())
            ts.expect(")")
            inner = conds + (cond,)
            while not ts.at("endcase"):
                if ts.at_kind("eof"):
                    raise ts.fail({"endcase"})
                if ts.accept("default"):
                    ts.accept(":")
                    self.statement(kind, inner)
                    continue
                labels = self.expr()
                while ts.accept(","):
                    labels += self.expr()
                ts.expect(":")
                label_cond = self.next_condition(labels) if labels else None
                self.statement(kind, inner + ((label_cond,) if label_cond else ()))
            ts.expect("endcase")
            return
        line = t.line
        targets, idx = self.lvalue()
        if not ts.accept("=", "<="):
            raise ts.fail({"=", "<="})
        if ts.at("#"):
            raise UnsupportedConstruct("intra-assignment delay", ts.tok.line)
        rhs = self.expr()
        ts.expect(";")
        for target in targets:
            self.module.assigns.append(Assignment(target, tuple(rhs + idx), kind, conds, line))

    # expressions return the identifier occurrences they contain
    def expr(self) -> list[str]:
        ts = self.ts
        ids = self.binary(0)
        if ts.accept("?"):
            ids += self.expr()
            ts.expect(":")
            ids += self.expr()
        return ids

    def binary(self, level: int) -> list[str]:
        if level == len(_BINARY):
            return self.unary()
        ts = self.ts
        ids = self.binary(level + 1)
        while ts.tok.kind == "op" and ts.tok.text in _BINARY[level]:
            ts.advance()
            ids += self.binary(level + 1)
        return ids

    def unary(self) -> list[str]:
        ts = self.ts
        if ts.tok.kind == "op" and ts.tok.text in _UNARY:
            ts.advance()
            return self.unary()
        return self.primary()

    def primary(self) -> list[str]:
        ts = self.ts
        t = ts.tok
        if t.kind == "num":
            ts.advance()
            return []
        if t.kind == "sysid":
            ts.advance()
            ids: list[str] = []
            if ts.accept("("):
                ids += self.expr()
                while ts.accept(","):
                    ids += self.expr()
                ts.expect(")")
            return ids
        if t.kind == "id":
            ts.advance()
            if ts.at("("):
                raise UnsupportedConstruct("function call", t.line)
            ids = [] if self.module is not None and t.text in self.module.params else [t.text]
            while ts.accept("["):
                ids += self.expr()
                if ts.accept(":", "+:", "-:"):
                    ids += self.expr()
                ts.expect("]")
            return ids
        if ts.accept("("):
            ids = self.expr()
            ts.expect(")")
            return ids
        if ts.accept("{"):
            first = self.expr()
            if ts.at("{"):  # replication {N{...}}
                ts.advance()
                ids = first + self.expr()
                while ts.accept(","):
                    ids += self.expr()
                ts.expect("}")
                ts.expect("}")
                return ids
            ids = first
            while ts.accept(","):
                ids += self.expr()
            ts.expect("}")
            return ids
        raise ts.fail({"identifier", "number", "(", "{"})


def _check_declared(mod: RtlModule) -> None:
    for name, direction in mod.ports.items():
        if direction is None:
            raise RtlSyntaxError(f"port {name!r} has no direction declaration")
    known = mod.signals
    for a in mod.assigns:
        if a.target not in known:
            raise RtlSyntaxError(f"assignment to undeclared signal {a.target!r}", a.line)
        for name in list(a.rhs) + [s for c in a.conditions for s in c.signals]:
            if name not in known:
                raise RtlSyntaxError(f"undeclared identifier {name!r}", a.line)


def parse_rtl(src: str) -> RtlDesign:
    """Parse Verilog source in the supported subset.

    Raises RtlSyntaxError on malformed input and UnsupportedConstruct for
    constructs outside the subset (``initial``, ``generate``, instantiation...).
    """
    lines = []
    for lineno, line in enumerate(src.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("`timescale") or stripped.startswith("`default_nettype"):
            line = ""
        elif "`" in line.split("//")[0]:
            raise UnsupportedConstruct("compiler directive", lineno)
        lines.append(line)
    return _Parser("\n".join(lines)).design()


# -- dependency edges ---------------------------------------------------------

def dependency_edges(design: RtlDesign, include_conditions: bool = True) -> list[DependencyEdge]:
    """Direct-influence edges ``src -> dst`` weighted by occurrence count.

    Every rhs occurrence of A in an assignment to B adds one. An enclosing
    ``if``/``case`` selector adds its occurrences once per target it guards,
    not once per branch.
    """
    weights: dict[tuple[str, str, str], int] = defaultdict(int)
    seen_conditions: set[tuple[int, str]] = set()
    for a in design.assigns:
        for name in a.rhs:
            weights[(name, a.target, a.kind)] += 1
        if include_conditions:
            for cond in a.conditions:
                if (cond.uid, a.target) in seen_conditions:
                    continue
                seen_conditions.add((cond.uid, a.target))
                for name in cond.signals:
                    weights[(name, a.target, a.kind)] += 1
    edges = [DependencyEdge(s, d, w, k) for (s, d, k), w in weights.items()]
    edges.sort()
    _check_combinational_cycles(edges)
    return edges


def _check_combinational_cycles(edges: Iterable[DependencyEdge]) -> None:
    succ: dict[str, list[str]] = defaultdict(list)
    for e in edges:
        if e.kind == COMBINATIONAL:
            succ[e.src].append(e.dst)
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = defaultdict(int)
    for root in sorted(succ):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(sorted(succ[root])))]
        path = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
            elif color[nxt] == GREY:
                raise CombinationalCycle(path[path.index(nxt):] + [nxt])
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append((nxt, iter(sorted(succ[nxt]))))


# -- unrolled graph ------------------------------------------------------------

class SignalDependencyGraph:
    """Immutable weighted DAG over temporal events ``signal@t``."""

    def __init__(self, nodes: Iterable[TemporalEvent], edges: dict, unroll_depth: int):
        self.nodes = tuple(sorted(set(nodes)))
        self.edges = dict(sorted(edges.items()))
        self.unroll_depth = unroll_depth
        self._succ: dict[TemporalEvent, dict] = {n: {} for n in self.nodes}
        self._pred: dict[TemporalEvent, dict] = {n: {} for n in self.nodes}
        for (src, dst), w in self.edges.items():
            if w < 1:
                raise ValueError(f"edge {src}->{dst} has non-positive weight {w}")
            if src not in self._succ or dst not in self._succ:
                raise ValueError(f"edge {src}->{dst} references an unknown node")
            self._succ[src][dst] = w
            self._pred[dst][src] = w

    def __contains__(self, node) -> bool:
        return node in self._succ

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"SignalDependencyGraph(nodes={len(self.nodes)}, edges={len(self.edges)}, depth={self.unroll_depth})"

    def successors(self, node: TemporalEvent) -> dict:
        return self._succ[node]

    def predecessors(self, node: TemporalEvent) -> dict:
        return self._pred[node]

    @property
    def signals(self) -> set[str]:
        return {n.signal for n in self.nodes}

    def ancestors(self, node: TemporalEvent) -> set[TemporalEvent]:
        """Nodes with a path to ``node`` (``node`` itself excluded)."""
        seen: set[TemporalEvent] = set()
        stack = [node]
        while stack:
            for p in self._pred[stack.pop()]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def topological_order(self) -> list[TemporalEvent]:
        indeg = {n: len(self._pred[n]) for n in self.nodes}
        ready = [n for n in self.nodes if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop()
            order.append(n)
            for s in self._succ[n]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
        if len(order) != len(self.nodes):
            raise ValueError("graph has a cycle")
        return order

    def to_dot(self) -> str:
        lines = ["digraph sdg {", f"  // unroll_depth={self.unroll_depth}"]
        lines += [f'  "{n}";' for n in self.nodes]
        lines += [f'  "{s}" -> "{d}" [weight={w}];' for (s, d), w in self.edges.items()]
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dot(cls, text: str) -> "SignalDependencyGraph":
        import re

        depth = int(re.search(r"unroll_depth=(\d+)", text).group(1))
        nodes = [TemporalEvent.from_string(m) for m in re.findall(r'^\s*"([^"]+)";', text, re.M)]
        edges = {
            (TemporalEvent.from_string(s), TemporalEvent.from_string(d)): int(w)
            for s, d, w in re.findall(r'^\s*"([^"]+)" -> "([^"]+)" \[weight=(\d+)\];', text, re.M)
        }
        return cls(nodes, edges, depth)


def unroll(edges: Iterable[DependencyEdge], depth: int, required_depth: int = 0) -> SignalDependencyGraph:
    """Unroll signal-level edges over ticks ``0..depth``.

    Combinational ``A->B`` becomes ``A@t -> B@t``; sequential becomes
    ``A@t -> B@t+1``. Every signal on some edge gets a node at every tick.
    """
    if depth < 0 or depth < required_depth:
        raise DepthTooSmall(f"unroll depth {depth} is below the required {max(required_depth, 0)}")
    edges = list(edges)
    signals = {e.src for e in edges} | {e.dst for e in edges}
    nodes = [TemporalEvent(s, t) for s in signals for t in range(depth + 1)]
    out: dict[tuple, int] = defaultdict(int)
    for e in edges:
        if e.kind == COMBINATIONAL:
            for t in range(depth + 1):
                out[(TemporalEvent(e.src, t), TemporalEvent(e.dst, t))] += e.weight
        elif e.kind == SEQUENTIAL:
            for t in range(depth):
                out[(TemporalEvent(e.src, t), TemporalEvent(e.dst, t + 1))] += e.weight
        else:
            raise ValueError(f"unknown edge kind {e.kind!r}")
    return SignalDependencyGraph(nodes, out, depth)


def build_sdg(src: str, depth: int, include_conditions: bool = True) -> SignalDependencyGraph:
    return unroll(dependency_edges(parse_rtl(src), include_conditions), depth)
