import pytest

from specsva import prompts
from specsva._validation import InvalidIdentifier
from specsva.extraction import FunctionDescription
from specsva.formalization import FormalStatement, formalize, formalize_all, make_statement, passthrough_statements
from specsva.gateway import LLMGateway
from specsva.regularization import MappingTable
from specsva.responses import MalformedResponse
from specsva.sva import events, parse
from specsva.synthesis import (
    DecompositionFailed, SequencePair, assemble, decompose, generate_assertions, guess_clock_reset, one_shot,
    prune_statements,
)

TABLE = MappingTable(
    (("req", "request"), ("ack", "acknowledge"), ("timeout", "timeout flag"), ("retry", "retry signal"),
     ("ENABLE", "enable"), ("READY", "ready"), ("tx_outport_req", "outport request"), ("grant", "grant"),
     ("bus_wen", "write enable")),
    frozenset({"clk", "rst_n"}),
)


def fenced(*lines):
    return "Reasoning first.\n```\n" + "\n".join(lines) + "\n```"


class ByKey:
    """Replies chosen by the first key contained in the user prompt."""

    def __init__(self, replies):
        self.replies = replies
        self.seen = []

    def __call__(self, req):
        self.seen.append(req)
        for key, reply in self.replies.items():
            if key in req.user_prompt:
                return reply(req) if callable(reply) else reply
        raise KeyError(req.user_prompt)


GRANT = ("Requests are granted first come first serve, but if two inports request the same "
         "tx_outport_req simultaneously the lower port wins.")


def test_grant_policy_yields_two_statements():
    model = ByKey({GRANT: fenced(
        "tx_outport_req == 1 && no earlier request => grant == requester",
        "two simultaneous tx_outport_req => grant == lower port",
    )})
    stmts = formalize(FunctionDescription(GRANT, 0, True), 4, TABLE, LLMGateway(model))
    assert len(stmts) == 2
    assert [s.object_index for s in stmts] == [0, 1]
    assert all(s.source_sentence == 4 for s in stmts)
    assert stmts[0].referenced_signals == ("grant", "tx_outport_req")


def test_single_clause():
    s = "When ENABLE is high, READY = 1"
    (stmt,) = formalize(FunctionDescription(s, 0), 0, TABLE, LLMGateway(ByKey({s: fenced("ENABLE == 1 => READY == 1")})))
    assert stmt.referenced_signals == ("ENABLE", "READY")


def test_zero_signals_and_no_block():
    s = "The design is compact"
    (stmt,) = formalize(FunctionDescription(s, 0), 0, TABLE, LLMGateway(ByKey({s: fenced("design small => ok")})))
    assert stmt.referenced_signals == ()
    with pytest.raises(MalformedResponse):
        formalize(FunctionDescription(s, 0), 0, TABLE, LLMGateway(ByKey({s: "no block here"})))


def test_batch_order_errors_and_skips():
    items = [FunctionDescription("first", 0), FunctionDescription("second", 0),
             FunctionDescription("skipme", 0, critical=False)]
    model = ByKey({"first": fenced("req => ack", "ack => req"), "second": fenced("timeout => retry")})
    result = formalize_all(items, TABLE, LLMGateway(model), workers=2)
    assert [s.text for s in result.items] == ["req => ack", "ack => req", "timeout => retry"]
    assert result.errors == []

    bad = formalize_all(items[:2], TABLE, LLMGateway(ByKey({"": "nothing"})))
    assert bad.items == [] and len(bad.errors) == 2


def test_passthrough():
    items = [FunctionDescription("req rises", 0), FunctionDescription("fact", 0, critical=False)]
    (stmt,) = passthrough_statements(items, TABLE)
    assert stmt.text == "req rises" and stmt.referenced_signals == ("req",)


def stmt(text, i=0):
    return make_statement(text, i, TABLE)


def test_prune_statements():
    kept = prune_statements([stmt("bus_wen == 1 => data written"), stmt("everything works => fine")], TABLE)
    assert [s.text for s in kept] == ["bus_wen == 1 => data written"]
    assert prune_statements([], TABLE) == []


HANDSHAKE_STMT = "req asserted and ack low implies timeout after 3 cycles then retry"


def pair_reply(ant, cons):
    return f"ANTECEDENT:\n```\n{ant}\n```\nCONSEQUENT:\n```\n{cons}\n```"


def test_decompose_handshake():
    model = ByKey({HANDSHAKE_STMT: pair_reply("req && !ack", "##3 timeout ##1 retry")})
    pair = decompose(stmt(HANDSHAKE_STMT), 0, TABLE, LLMGateway(model))
    assert pair == SequencePair("req && !ack", "##3 timeout ##1 retry", 0)


def test_decompose_needs_implication():
    with pytest.raises(DecompositionFailed):
        decompose(stmt("req and ack are both high"), 0, TABLE, LLMGateway(ByKey({})))


def test_decompose_retry_echoes_error():
    def reply(req):
        if "rejected" in req.user_prompt:
            return pair_reply("req && !ack", "##3 timeout")
        return pair_reply("req && !ghost", "##3 timeout")

    model = ByKey({HANDSHAKE_STMT: reply})
    pair = decompose(stmt(HANDSHAKE_STMT), 0, TABLE, LLMGateway(model))
    assert pair.antecedent == "req && !ack"
    assert "ghost" in model.seen[1].user_prompt


def test_decompose_fails_after_retry():
    model = ByKey({HANDSHAKE_STMT: pair_reply("req", "##[1:3] timeout")})
    with pytest.raises(DecompositionFailed, match="ranged"):
        decompose(stmt(HANDSHAKE_STMT), 0, TABLE, LLMGateway(model))
    model = ByKey({HANDSHAKE_STMT: "ANTECEDENT:\n```\nreq\n```"})
    with pytest.raises(DecompositionFailed, match="CONSEQUENT"):
        decompose(stmt(HANDSHAKE_STMT), 0, TABLE, LLMGateway(model))


def test_assemble_handshake_text():
    text = assemble(SequencePair("req && !ack", "##3 timeout ##1 retry", 0), "clk", None, "p0")
    flat = " ".join(text.split())
    assert flat == ("property p0; @(posedge clk) req && !ack |-> ##3 timeout ##1 retry; endproperty "
                    "p0_a: assert property(p0);")
    ant, cons = events(parse(text))
    assert [str(c) for c in cons] == ["timeout@3", "retry@4"]


def test_assemble_reset_and_bad_name():
    text = assemble(SequencePair("req", "##1 ack", 0), "clk", "rst_n", "p1", reset_active_low=True)
    assert "disable iff (!rst_n)" in text
    with pytest.raises(InvalidIdentifier):
        assemble(SequencePair("req", "ack", 0), "clk", None, "1bad")


def test_one_shot_is_unchecked():
    model = ByKey({HANDSHAKE_STMT: "```systemverilog\nproperty p0; garbage\n```"})
    text = one_shot(stmt(HANDSHAKE_STMT), TABLE, LLMGateway(model), "clk", None, "p0")
    assert text == "property p0; garbage\n"
    assert model.seen[0].system_prompt == prompts.ONESHOT_SYSTEM


def test_generate_keeps_statement_indices():
    stmts = [stmt(HANDSHAKE_STMT), stmt("prose only => nothing"), stmt("timeout == 1 => retry == 1")]
    model = ByKey({
        HANDSHAKE_STMT: pair_reply("req && !ack", "##3 timeout ##1 retry"),
        "timeout == 1": pair_reply("timeout", "##1 ghost"),
    })
    result = generate_assertions(stmts, TABLE, LLMGateway(model), "clk", "rst_n", True, workers=2)
    assert [a.name for a in result.items] == ["p0"]
    assert result.errors[0]["statement"] == 2


def test_guess_clock_reset():
    clock, reset, low = guess_clock_reset(MappingTable((("clk_sys", "c"), ("rst_n", "r"))))
    assert (clock, reset, low) == ("clk_sys", "rst_n", True)
    clock, reset, low = guess_clock_reset(MappingTable((("a", "x"),)))
    assert clock == "clk" and reset is None and not low


def test_statement_dict_round_trip():
    s = FormalStatement("req => ack", 3, ("ack", "req"), 1)
    assert FormalStatement.from_dict(s.to_dict()) == s
