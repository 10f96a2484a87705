"""Assertion importance scoring over a Signal Dependency Graph.

An assertion's importance sums, over each consequent event ``c`` and each of
its causal events ``p``, the spatial distance ``D(p, c)``:

    D(c, c) = PR(c)
    D(a, c) = PR(a) + sum over successors b of a that reach c of w(a, b) * D(b, c)

where ``PR`` is the PageRank of the node in the unrolled SDG. Causal events of
``c`` are the antecedent events with a path to ``c`` plus the consequent events
that occur strictly earlier than ``c``.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .rtl import DepthTooSmall, SignalDependencyGraph
from .sva import AssertionAst, TemporalEvent, events

log = logging.getLogger(__name__)


class EmptyGraph(ValueError):
    pass


class NodeNotInGraph(KeyError):
    pass


class MissingSignal(ValueError):
    def __init__(self, signal: str, assertion: str = ""):
        where = f" (assertion {assertion})" if assertion else ""
        super().__init__(f"signal {signal!r} is not declared in the design{where}")
        self.signal = signal


@dataclass(frozen=True)
class PageRankVector:
    scores: Mapping
    damping: float
    tolerance: float
    iterations: int = 0

    def __getitem__(self, node: TemporalEvent) -> float:
        return self.scores[node]

    def __len__(self) -> int:
        return len(self.scores)


def pagerank(
    g: SignalDependencyGraph, damping: float = 0.85, tol: float = 1e-9, max_iter: int = 10_000
) -> PageRankVector:
    """Weighted PageRank by power iteration along the influence direction.

    Rank flows from ``src`` to ``dst`` in proportion to edge weight; dangling
    nodes spread their rank uniformly; teleport is uniform.

    The iteration is a ``damping``-contraction in L1, so the distance to the
    fixed point is at most ``damping / (1 - damping)`` times the last step.
    Iteration stops once that bound drops below ``tol``, which makes ``tol``
    an accuracy guarantee rather than a step size.
    """
    if len(g) == 0:
        raise EmptyGraph("cannot rank an empty graph")
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    nodes = g.nodes  # sorted, so the result is independent of insertion order
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    src = np.array([index[s] for s, _ in g.edges], dtype=np.intp)
    dst = np.array([index[d] for _, d in g.edges], dtype=np.intp)
    w = np.array(list(g.edges.values()), dtype=float)
    out_weight = np.zeros(n)
    np.add.at(out_weight, src, w)
    dangling = out_weight == 0
    share = w / out_weight[src] if len(w) else w

    x = np.full(n, 1.0 / n)
    step_tol = tol * (1.0 - damping) / damping
    it = 0
    for it in range(1, max_iter + 1):
        nxt = np.zeros(n)
        np.add.at(nxt, dst, damping * x[src] * share)
        nxt += (damping * x[dangling].sum() + (1.0 - damping)) / n
        delta = np.abs(nxt - x).sum()
        x = nxt
        if delta < step_tol:
            break
    else:
        log.warning("pagerank did not converge in %d iterations", max_iter)
    return PageRankVector({node: float(x[i]) for node, i in index.items()}, damping, tol, it)


class _DistanceCache:
    """Memoized spatial distances, one table per consequent node."""

    def __init__(self, g: SignalDependencyGraph, pr: Mapping):
        self.g = g
        self.pr = pr
        self._order: list | None = None
        self._tables: dict = {}

    def table(self, dst: TemporalEvent) -> dict:
        if dst not in self._tables:
            if self._order is None:
                self._order = self.g.topological_order()
            relevant = self.g.ancestors(dst)
            relevant.add(dst)
            d: dict = {}
            for node in reversed(self._order):
                if node not in relevant:
                    continue
                total = self.pr[node]
                for succ, w in self.g.successors(node).items():
                    if succ in relevant:
                        total += w * d[succ]
                d[node] = total
            self._tables[dst] = d
        return self._tables[dst]


def spatial_distance(
    g: SignalDependencyGraph,
    pr: PageRankVector | Mapping,
    src: TemporalEvent,
    dst: TemporalEvent,
    cache: _DistanceCache | None = None,
) -> float:
    """Recursive spatial distance from ``src`` to ``dst``; 0 if ``dst`` is
    unreachable from ``src``."""
    for node in (src, dst):
        if node not in g:
            raise NodeNotInGraph(str(node))
    scores = pr.scores if isinstance(pr, PageRankVector) else pr
    cache = cache or _DistanceCache(g, scores)
    table = cache.table(dst)
    if src not in table:
        log.warning("non-causal pair: %s cannot reach %s", src, dst)
        return 0.0
    return table[src]


@dataclass(frozen=True)
class Contribution:
    consequent: TemporalEvent
    cause: TemporalEvent
    distance: float


@dataclass
class AssertionScore:
    name: str
    raw_score: float
    breakdown: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    normalized_score: float = 0.0
    rank: int = 0


def importance(
    ast: AssertionAst,
    g: SignalDependencyGraph,
    pr: PageRankVector | Mapping,
    design_signals: Iterable[str] | None = None,
    cache: _DistanceCache | None = None,
) -> AssertionScore:
    """Score one assertion against the unrolled SDG."""
    scores = pr.scores if isinstance(pr, PageRankVector) else pr
    known = set(design_signals) if design_signals is not None else g.signals
    antecedent, consequent = events(ast)
    for ev in sorted(antecedent) + consequent:
        if ev.signal not in known:
            raise MissingSignal(ev.signal, ast.name)
        if ev.offset > g.unroll_depth:
            raise DepthTooSmall(
                f"{ast.name}: event {ev} lies beyond unroll depth {g.unroll_depth}"
            )
    cache = cache or _DistanceCache(g, scores)
    warnings: list[str] = []
    breakdown: list[Contribution] = []

    def present(ev: TemporalEvent) -> bool:
        if ev in g:
            return True
        warnings.append(f"{ev} has no dependency edges in the design")
        return False

    ant_nodes = [ev for ev in sorted(antecedent) if present(ev)]
    for c in consequent:
        if c not in g:
            warnings.append(f"{c} has no dependency edges in the design")
            continue
        table = cache.table(c)
        causes = [p for p in ant_nodes if p in table]
        earlier = [p for p in consequent if p.offset < c.offset and p not in causes]
        if not causes:
            warnings.append(f"no antecedent event reaches {c}")
        for p in causes:
            breakdown.append(Contribution(c, p, table[p]))
        for p in earlier:
            if p not in g:
                continue
            if p not in table:
                warnings.append(f"non-causal pair: {p} cannot reach {c}")
            breakdown.append(Contribution(c, p, table.get(p, 0.0)))
    raw = 0.0
    for item in breakdown:
        raw += item.distance
    for w in warnings:
        log.info("%s: %s", ast.name, w)
    return AssertionScore(ast.name, raw, breakdown, warnings)


@dataclass
class ImportanceReport:
    entries: list
    top_n: int = 10
    syntax_correct: int = 0
    syntax_incorrect: int = 0
    skipped: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def top(self) -> list:
        return self.entries[: self.top_n]

    def averages(self) -> dict:
        def mean(values):
            return sum(values) / len(values) if values else 0.0

        return {
            "all_raw": mean([e.raw_score for e in self.entries]),
            "all_normalized": mean([e.normalized_score for e in self.entries]),
            "top_raw": mean([e.raw_score for e in self.top]),
            "top_normalized": mean([e.normalized_score for e in self.top]),
        }

    def to_dict(self) -> dict:
        return {
            "syntax_correct": self.syntax_correct,
            "syntax_incorrect": self.syntax_incorrect,
            "top_n": self.top_n,
            "averages": self.averages(),
            "top": [e.name for e in self.top],
            "assertions": [
                {
                    "name": e.name,
                    "rank": e.rank,
                    "raw": e.raw_score,
                    "normalized": e.normalized_score,
                    "breakdown": [
                        {"consequent": str(c.consequent), "cause": str(c.cause), "distance": c.distance}
                        for c in e.breakdown
                    ],
                    "warnings": e.warnings,
                }
                for e in self.entries
            ],
            "skipped": self.skipped,
            "warnings": self.warnings,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "raw", "normalized", "rank"])
        for e in self.entries:
            writer.writerow([e.name, repr(e.raw_score), repr(e.normalized_score), e.rank])
        return buf.getvalue()


def rank(entries: Iterable[AssertionScore], top_n: int = 10) -> ImportanceReport:
    """Sort by raw score (descending, ties by name) and normalize by the max."""
    ordered = sorted(entries, key=lambda e: (-e.raw_score, e.name))
    best = ordered[0].raw_score if ordered else 0.0
    for i, e in enumerate(ordered, start=1):
        e.rank = i
        e.normalized_score = e.raw_score / best if best > 0 else 0.0
    return ImportanceReport(ordered, top_n=top_n)
