"""Independent oracles and random generators shared by the tests.

Nothing here calls into specsva.importance: PageRank is solved as a linear
system and distances come from explicit path enumeration.
"""

from __future__ import annotations

import random

import numpy as np

from specsva.rtl import SignalDependencyGraph
from specsva.sva import (
    AssertionAst, Binary, Call, Ident, Number, Select, Sequence, Step, TemporalEvent, Unary,
    BINARY_LEVELS,
)

# -- PageRank ------------------------------------------------------------------


def exact_pagerank(nodes, edges: dict, damping: float = 0.85) -> dict:
    """Stationary vector of the Google matrix by direct solve."""
    nodes = list(nodes)
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    out = np.zeros(n)
    for (a, _), w in edges.items():
        out[idx[a]] += w
    M = np.zeros((n, n))  # M[i, j]: probability of moving i -> j
    for (a, b), w in edges.items():
        M[idx[a], idx[b]] += damping * w / out[idx[a]]
    for i in range(n):
        if out[i] == 0:
            M[i, :] += damping / n
    M += (1 - damping) / n
    A = np.vstack([M.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1
    x = np.linalg.lstsq(A, b, rcond=None)[0]
    return {node: float(x[idx[node]]) for node in nodes}


def two_node(d: float) -> tuple[float, float]:
    """a -> b, b dangling: PR(a) = 1/(2+d), PR(b) = (1+d)/(2+d)."""
    return 1 / (2 + d), (1 + d) / (2 + d)


def three_chain(d: float) -> tuple[float, float, float]:
    """a -> b -> c, c dangling."""
    s = 1 / (3 + 2 * d + d * d)
    return s, s * (1 + d), s * (1 + d + d * d)


# -- spatial distance ----------------------------------------------------------


def paths(edges: dict, src, dst):
    succ = {}
    for (a, b) in edges:
        succ.setdefault(a, []).append(b)
    out = []

    def walk(path):
        if path[-1] == dst:
            out.append(tuple(path))
            return
        for nxt in succ.get(path[-1], ()):
            walk(path + [nxt])

    walk([src])
    return out


def distance_by_paths(edges: dict, pr: dict, src, dst) -> float:
    """Sum over the distinct prefixes of all src->dst paths of prod(w)*PR(end)."""
    prefixes = {p[:i] for p in paths(edges, src, dst) for i in range(1, len(p) + 1)}
    total = 0.0
    for prefix in prefixes:
        prod = 1
        for a, b in zip(prefix, prefix[1:]):
            prod *= edges[a, b]
        total += prod * pr[prefix[-1]]
    return total


def distance_by_recursion(edges: dict, pr: dict, src, dst) -> float:
    """Direct, unmemoized recursion; successors that cannot reach dst add nothing."""
    if src == dst:
        return pr[dst]
    total = pr[src]
    reached = False
    for (a, b), w in edges.items():
        if a == src and paths(edges, b, dst):
            total += w * distance_by_recursion(edges, pr, b, dst)
            reached = True
    return total if reached else 0.0


def importance_oracle(antecedent, consequent, edges: dict, pr: dict, nodes) -> float:
    nodes = set(nodes)
    total = 0.0
    for i, c in enumerate(consequent):
        if c not in nodes:
            continue
        causes = {p for p in antecedent if p in nodes and paths(edges, p, c)}
        causes |= {p for p in consequent[:i] if p.offset < c.offset and p in nodes}
        total += sum(distance_by_paths(edges, pr, p, c) for p in causes)
    return total


# -- random graphs ---------------------------------------------------------------


def random_dag(rng: random.Random, max_nodes: int = 10, max_weight: int = 3, p: float = 0.35):
    n = rng.randint(1, max_nodes)
    nodes = [TemporalEvent(f"n{i}", i % 3) for i in range(n)]
    rng.shuffle(nodes)  # topological order differs from sorted order
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges[nodes[i], nodes[j]] = rng.randint(1, max_weight)
    return SignalDependencyGraph(nodes, edges, 3), edges


def random_pr(rng: random.Random, nodes) -> dict:
    raw = {n: rng.random() + 0.01 for n in nodes}
    s = sum(raw.values())
    return {n: v / s for n, v in raw.items()}


# -- random SVA ASTs -------------------------------------------------------------

_SIGNALS = ["a", "b", "req", "ack", "data_in", "cnt", "x1", "valid_q"]
_BINOPS = [op for level in BINARY_LEVELS for op in level]


def random_expr(rng: random.Random, depth: int = 3):
    if depth == 0 or rng.random() < 0.3:
        roll = rng.random()
        if roll < 0.6:
            return Ident(rng.choice(_SIGNALS))
        if roll < 0.75:
            return Number(rng.choice(["0", "1", "3", "1'b1", "8'hff", "2'd2"]))
        if roll < 0.9:
            msb = Number(str(rng.randint(0, 7)))
            lsb = Number("0") if rng.random() < 0.5 else None
            return Select(rng.choice(_SIGNALS), msb, lsb)
        return Call(rng.choice(["$rose", "$fell", "$past", "$stable"]), (Ident(rng.choice(_SIGNALS)),))
    if rng.random() < 0.25:
        return Unary(rng.choice(["!", "~"]), random_expr(rng, depth - 1))
    return Binary(rng.choice(_BINOPS), random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def random_sequence(rng: random.Random, leading_delay: bool) -> Sequence:
    steps = []
    for i in range(rng.randint(1, 3)):
        delay = rng.randint(0, 4) if (i or leading_delay) else 0
        steps.append(Step(delay, random_expr(rng)))
    return Sequence(tuple(steps))


def random_ast(rng: random.Random, name: str = "p") -> AssertionAst:
    reset = rng.choice([None, "rst", "rst_n"])
    return AssertionAst(
        name,
        rng.choice(["clk", "clock", "aclk"]),
        random_sequence(rng, leading_delay=False),
        random_sequence(rng, leading_delay=True),
        reset,
        reset is not None and rng.random() < 0.5,
    )
