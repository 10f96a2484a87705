import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from specsva.estimator import ImportanceScorer
from specsva.fixtures import DATA
from specsva.importance import MissingSignal
from specsva.rtl import parse_rtl
from specsva.sva import parse

HS = DATA / "handshake"


def test_fit_accepts_text_path_and_design():
    text = (HS / "handshake.v").read_text()
    for X in (text, HS / "handshake.v", str(HS / "handshake.v"), parse_rtl(text)):
        scorer = ImportanceScorer().fit(X)
        assert "retry" in scorer.signals_


def test_params_and_clone():
    scorer = ImportanceScorer(damping=0.5, top_n=3)
    assert scorer.get_params()["damping"] == 0.5
    assert clone(scorer).get_params() == scorer.get_params()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ImportanceScorer().transform(["property p; @(posedge clk) a |-> b; endproperty"])


def test_transform_matches_report():
    scorer = ImportanceScorer().fit(HS / "handshake.v")
    sv = (HS / "handshake.sv").read_text()
    report = scorer.report(sv)
    asts = [parse("property handshake_timeout_retry; @(posedge clk) req && !ack |-> ##3 timeout ##1 retry; endproperty"),
            parse("property retry_after_timeout; @(posedge clk) timeout |-> ##1 retry; endproperty")]
    # same batch depth as the report so the graphs agree
    scores = ImportanceScorer(unroll_depth=8).fit(HS / "handshake.v").transform(asts)
    by_name = {e.name: e.raw_score for e in report.entries}
    assert np.allclose(scores, [by_name["handshake_timeout_retry"], by_name["retry_after_timeout"]], atol=1e-12)
    assert scorer.transform([]).shape == (0,)


def test_report_counts_and_top1():
    report = ImportanceScorer().fit(HS / "handshake.v").report((HS / "handshake.sv").read_text())
    assert report.syntax_correct == 4 and report.syntax_incorrect == 1
    assert len(report.entries) == 4
    assert report.top[0].name == "handshake_timeout_retry"


def test_unknown_signal_is_skipped_in_report_but_raises_in_transform():
    scorer = ImportanceScorer().fit(HS / "handshake.v")
    src = "property p; @(posedge clk) req |-> ##1 ghost; endproperty"
    report = scorer.report([src])
    assert report.entries == [] and report.skipped[0]["reason"] == "MissingSignal"
    with pytest.raises(MissingSignal):
        scorer.transform([src])


def test_empty_input_report():
    report = ImportanceScorer().fit(HS / "handshake.v").report("")
    assert report.entries == [] and report.syntax_correct == 0 and report.warnings
