import logging
import random

import pytest

from specsva.fixtures import DATA
from specsva.importance import (
    AssertionScore, EmptyGraph, MissingSignal, NodeNotInGraph, importance, pagerank, rank, spatial_distance,
)
from specsva.rtl import DepthTooSmall, SignalDependencyGraph, build_sdg
from specsva.sva import TemporalEvent, events, parse

from helpers import (
    distance_by_paths, distance_by_recursion, exact_pagerank, importance_oracle, random_dag, random_pr,
    three_chain, two_node,
)


def ev(s):
    return TemporalEvent.from_string(s)


def graph(edges: dict, depth: int = 4) -> SignalDependencyGraph:
    edges = {(ev(a), ev(b)): w for (a, b), w in edges.items()}
    nodes = {n for e in edges for n in e}
    return SignalDependencyGraph(nodes, edges, depth)


def test_single_node():
    g = SignalDependencyGraph([ev("a@0")], {}, 0)
    assert pagerank(g).scores == {ev("a@0"): pytest.approx(1.0, abs=1e-12)}


def test_empty_graph():
    with pytest.raises(EmptyGraph):
        pagerank(SignalDependencyGraph([], {}, 0))


@pytest.mark.parametrize("d", [0.5, 0.85, 0.95])
def test_two_node_closed_form(d):
    g = graph({("a@0", "b@0"): 1})
    pr = pagerank(g, damping=d)
    pa, pb = two_node(d)
    assert abs(pr[ev("a@0")] - pa) <= 1e-9
    assert abs(pr[ev("b@0")] - pb) <= 1e-9


def test_three_chain_closed_form():
    g = graph({("a@0", "b@0"): 1, ("b@0", "c@0"): 1})
    pr = pagerank(g)
    for node, want in zip(["a@0", "b@0", "c@0"], three_chain(0.85)):
        assert abs(pr[ev(node)] - want) <= 1e-9


def test_weights_shift_rank():
    g = graph({("a@0", "b@0"): 3, ("a@0", "c@0"): 1})
    pr = pagerank(g)
    assert pr[ev("b@0")] > pr[ev("c@0")]
    exact = exact_pagerank(g.nodes, g.edges)
    for n in g.nodes:
        assert abs(pr[n] - exact[n]) <= 1e-9


def test_insertion_order_independent():
    edges = {("a@0", "b@1"): 2, ("c@0", "b@1"): 1, ("b@1", "d@1"): 1}
    g1 = graph(edges)
    g2 = graph(dict(reversed(list(edges.items()))))
    assert pagerank(g1).scores == pagerank(g2).scores


def test_tolerance_is_an_accuracy_bound():
    rng = random.Random(3)
    for _ in range(50):
        g, edges = random_dag(rng)
        exact = exact_pagerank(g.nodes, g.edges)
        pr = pagerank(g, tol=1e-9)
        assert sum(abs(pr[n] - exact[n]) for n in g.nodes) <= 1e-9


def test_distance_base_case():
    g = graph({("a@0", "b@0"): 1})
    pr = pagerank(g)
    assert spatial_distance(g, pr, ev("b@0"), ev("b@0")) == pr[ev("b@0")]


def test_chain_distance():
    g = graph({("a@0", "b@0"): 1, ("b@0", "c@0"): 1})
    pr = pagerank(g).scores
    want = pr[ev("a@0")] + pr[ev("b@0")] + pr[ev("c@0")]
    assert spatial_distance(g, pr, ev("a@0"), ev("c@0")) == pytest.approx(want, abs=1e-12)


def test_diamond_distance():
    g = graph({("a@0", "b@0"): 1, ("a@0", "c@0"): 1, ("b@0", "d@0"): 1, ("c@0", "d@0"): 1})
    pr = pagerank(g).scores
    a, b, c, d = (pr[ev(f"{x}@0")] for x in "abcd")
    got = spatial_distance(g, pr, ev("a@0"), ev("d@0"))
    assert got == pytest.approx(a + (b + d) + (c + d), abs=1e-12)


def test_side_branch_does_not_count():
    g = graph({("a@0", "b@0"): 1, ("a@0", "x@0"): 5, ("b@0", "c@0"): 1})
    pr = pagerank(g).scores
    got = spatial_distance(g, pr, ev("a@0"), ev("c@0"))
    assert got == pytest.approx(pr[ev("a@0")] + pr[ev("b@0")] + pr[ev("c@0")], abs=1e-12)


def test_unreachable_pair_warns(caplog):
    g = graph({("a@0", "b@0"): 1, ("c@0", "b@0"): 1})
    with caplog.at_level(logging.WARNING):
        assert spatial_distance(g, pagerank(g), ev("a@0"), ev("c@0")) == 0.0
    assert "non-causal" in caplog.text


def test_missing_node():
    g = graph({("a@0", "b@0"): 1})
    with pytest.raises(NodeNotInGraph):
        spatial_distance(g, pagerank(g), ev("z@0"), ev("b@0"))


def test_random_dags_against_both_oracles():
    rng = random.Random(11)
    for _ in range(150):
        g, edges = random_dag(rng, max_nodes=8)
        pr = random_pr(rng, g.nodes)
        for src in g.nodes:
            for dst in g.nodes:
                got = spatial_distance(g, pr, src, dst)
                assert abs(got - distance_by_paths(edges, pr, src, dst)) <= 1e-9
                assert abs(got - distance_by_recursion(edges, pr, src, dst)) <= 1e-9


def fig3_assertion():
    return parse("property f; @(posedge clk) a ##1 a |-> ##1 b1 ##2 b2; endproperty")


def test_fig3_consequent_collects_from_both_a_events_and_b1():
    g = build_sdg((DATA / "fig3" / "fig3.v").read_text(), 4)
    pr = pagerank(g)
    score = importance(fig3_assertion(), g, pr)
    pairs = {(str(c.consequent), str(c.cause)) for c in score.breakdown}
    assert {("b2@4", "a@0"), ("b2@4", "a@1"), ("b2@4", "b1@2"), ("b1@2", "a@0")} <= pairs
    ant, cons = events(fig3_assertion())
    want = importance_oracle(ant, cons, g.edges, pr.scores, g.nodes)
    assert abs(score.raw_score - want) <= 1e-12
    assert score.raw_score == pytest.approx(sum(c.distance for c in score.breakdown))


def test_unreachable_consequent_scores_zero():
    g = graph({("a@0", "b@1"): 1, ("c@0", "d@1"): 1})
    ast = parse("property p; @(posedge clk) a |-> ##1 d; endproperty")
    score = importance(ast, g, pagerank(g))
    assert score.raw_score == 0.0 and score.warnings


def test_missing_signal_and_depth():
    g = graph({("a@0", "b@1"): 1}, depth=1)
    with pytest.raises(MissingSignal):
        importance(parse("property p; @(posedge clk) a |-> ##1 zz; endproperty"), g, pagerank(g))
    with pytest.raises(DepthTooSmall):
        importance(parse("property p; @(posedge clk) a |-> ##5 b; endproperty"), g, pagerank(g))


def test_handshake_matches_oracle():
    rtl = (DATA / "handshake" / "handshake.v").read_text()
    g = build_sdg(rtl, 8)
    pr = pagerank(g)
    ast = parse("property p0; @(posedge clk) req && !ack |-> ##3 timeout ##1 retry; endproperty")
    ant, cons = events(ast)
    want = importance_oracle(ant, cons, g.edges, pr.scores, g.nodes)
    assert abs(importance(ast, g, pr).raw_score - want) <= 1e-12
    exact = exact_pagerank(g.nodes, g.edges)
    assert abs(importance(ast, g, exact).raw_score - importance_oracle(ant, cons, g.edges, exact, g.nodes)) <= 1e-12


def _entry(name, raw):
    return AssertionScore(name, raw)


def test_rank_order_and_normalization():
    report = rank([_entry("x", 3.0), _entry("y", 1.0), _entry("z", 2.0)])
    assert [e.raw_score for e in report.entries] == [3.0, 2.0, 1.0]
    assert [round(e.normalized_score, 3) for e in report.entries] == [1.0, 0.667, 0.333]
    assert [e.rank for e in report.entries] == [1, 2, 3]


def test_rank_all_zero_and_ties():
    report = rank([_entry("b", 0.0), _entry("a", 0.0)])
    assert [e.name for e in report.entries] == ["a", "b"]
    assert all(e.normalized_score == 0.0 for e in report.entries)


def test_report_top_n_and_csv():
    report = rank([_entry(f"p{i}", float(i)) for i in range(12)], top_n=10)
    assert len(report.top) == 10 and report.top[0].name == "p11"
    avg = report.averages()
    assert avg["all_raw"] == pytest.approx(5.5)
    assert avg["top_raw"] == pytest.approx(sum(range(2, 12)) / 10)
    csv = report.to_csv().splitlines()
    assert csv[0] == "name,raw,normalized,rank" and csv[1].startswith("p11,11.0,1.0,1")
