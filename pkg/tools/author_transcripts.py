#!/usr/bin/env python3
"""Author the bundled toy fixtures.

A scripted responder stands in for the LLM. It answers every prompt the
pipeline sends for the toy request-controller spec from the tables below,
and raises on anything it does not recognise so that prompt drift is loud.
The pipeline runs once per ablation arm in record mode, then again in replay
mode to write the golden artifacts, and finally an independent oracle
(networkx PageRank plus brute-force path-prefix enumeration) scores the
golden assertions.

Usage: python3 tools/author_transcripts.py [--arm NAME ...]
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import networkx as nx
import numpy as np

from specsva import prompts
from specsva.config import PipelineConfig
from specsva.fixtures import DATA, TOY, TOY_ARMS, get_case, regenerate
from specsva.gateway import ChatRequest, LLMGateway, Transcript
from specsva.pipeline import run_all
from specsva.rtl import build_sdg
from specsva.sva import SvaSyntaxError, events, parse_file

# -- phase 1: items per segment ------------------------------------------------

EXTRACT = {
    0: [
        "After a timeout, the controller signals a retry to the client.",
        "All logic is synchronous to the rising edge of the system clock.",
    ],
    1: ["busy is high while the controller is serving a request."],
    2: [
        "Reset clears busy.",
        "Reset clears timeout and retry.",
    ],
    3: [
        "When a request is accepted, busy = 1 on the next clock edge.",
        "When the acknowledgment from the bus arrives while busy is high, data_out = data_in.",
        "When ack is high while busy is high, data_valid changes from 0 to 1 for one cycle.",
        "The request line is 1 bit wide.",
    ],
    4: [
        "busy changes from 1 to 0 one cycle after the acknowledgment from the bus arrives.",
        "When req is high and ack stays low, timeout = 1 three cycles later.",
        "One cycle after timeout is asserted, retry goes high.",
        "reset clears busy.",
    ],
    5: ["err is high whenever timeout and retry are high together."],
}

MAPPING = [
    {"name": "clk", "description": "system clock", "port": True},
    {"name": "rst_n", "description": "the reset", "port": True},
    {"name": "req", "description": "the request from the client", "port": True},
    {"name": "ack", "description": "the acknowledgment from the bus", "port": True},
    {"name": "data_in", "description": "data returned by the bus", "port": True},
    {"name": "busy", "description": "the controller is serving a request", "port": True},
    {"name": "timeout", "description": "the acknowledgment did not arrive in time", "port": True},
    {"name": "retry", "description": "the client should reissue the request", "port": True},
    {"name": "data_valid", "description": "data_out holds returned data", "port": True},
    {"name": "data_out", "description": "data forwarded to the client", "port": True},
    {"name": "err", "description": "timeout and retry are both high", "port": True},
    # the model invents a name for the unnamed counter; it is dropped as invalid
    {"name": "wait counter", "description": "the wait counter", "port": False},
    {"name": "busy", "description": "duplicate row", "port": True},
]

# sentence -> rewrites (first attempt, retry); a single entry means accepted first time
SUBSTITUTE = {
    "After a timeout, the controller signals a retry to the client.": [
        "After TIMEOUT_EVT, the controller drives retry_o to the client.",
        "After TIMEOUT_EVT, the controller drives retry_o to the client.",
    ],
    "All logic is synchronous to the rising edge of the system clock.": [
        "All logic is synchronous to the rising edge of clk.",
    ],
    "busy is high while the controller is serving a request.": [
        "busy is high while the controller is serving a request.",
    ],
    "Reset clears busy.": ["When rst_n is low, busy = 0."],
    "Reset clears timeout and retry.": ["When rst_n is low, timeout = 0 and retry = 0."],
    "After the reset is deasserted, the controller waits for the request from the client.": [
        "After rst_n is deasserted, the controller waits for req.",
    ],
    "When a request is accepted, busy = 1 on the next clock edge.": [
        "When REQ_ACCEPT is high, busy = 1 on the next clock edge.",
        "When req is high and busy is low, busy = 1 on the next clock edge.",
    ],
    "When the acknowledgment from the bus arrives while busy is high, data_out = data_in.": [
        "When ack is high while busy is high, data_out = data_in.",
    ],
    "When ack is high while busy is high, data_valid changes from 0 to 1 for one cycle.": [
        "When ack is high while busy is high, data_valid changes from 0 to 1 for one cycle.",
    ],
    "The request line is 1 bit wide.": ["The req line is 1 bit wide."],
    "busy changes from 1 to 0 one cycle after the acknowledgment from the bus arrives.": [
        "busy changes from 1 to 0 one cycle after ack is high.",
    ],
    "When req is high and ack stays low, timeout = 1 three cycles later.": [
        "When req is high and ack stays low, timeout = 1 three cycles later.",
    ],
    "One cycle after timeout is asserted, retry goes high.": [
        "One cycle after timeout is asserted, retry goes high.",
    ],
    "err is high whenever timeout and retry are high together.": [
        "err is high whenever timeout and retry are high together.",
    ],
}

# at low temperature the model gets the accepted-request rewrite right at once
SUBSTITUTE_LOW_T = {
    "When a request is accepted, busy = 1 on the next clock edge.": [
        "When req is high and busy is low, busy = 1 on the next clock edge.",
    ],
}

NOT_CRITICAL = {
    "All logic is synchronous to the rising edge of clk.",
    "After rst_n is deasserted, the controller waits for req.",
    "The req line is 1 bit wide.",
}
UNREADABLE_VERDICT = "busy is high while the controller is serving a request."

# sentence (raw or rewritten) -> formal statements; None means the reply has no fenced block
FORMAL = {
    "After a timeout, the controller signals a retry to the client.": ["timeout == 1 => ##1 retry == 1"],
    "All logic is synchronous to the rising edge of the system clock.": ["posedge clk => registers update"],
    "busy is high while the controller is serving a request.": None,
    "Reset clears busy.": ["!rst_n => ##1 busy == 0"],
    "reset clears busy.": ["!rst_n => ##1 busy == 0"],
    "When rst_n is low, busy = 0.": ["!rst_n => ##1 busy == 0"],
    "Reset clears timeout and retry.": ["!rst_n => ##1 timeout == 0", "!rst_n => ##1 retry == 0"],
    "When rst_n is low, timeout = 0 and retry = 0.": ["!rst_n => ##1 timeout == 0", "!rst_n => ##1 retry == 0"],
    "After the reset is deasserted, the controller waits for the request from the client.": [
        "rst_n rises => controller idle until req",
    ],
    "When a request is accepted, busy = 1 on the next clock edge.": ["req == 1 && busy == 0 => ##1 busy == 1"],
    "When req is high and busy is low, busy = 1 on the next clock edge.": [
        "req == 1 && busy == 0 => ##1 busy == 1",
    ],
    "When the acknowledgment from the bus arrives while busy is high, data_out = data_in.": [
        "ack == 1 && busy == 1 => ##1 data_out == $past(data_in)",
    ],
    "When ack is high while busy is high, data_out = data_in.": [
        "ack == 1 && busy == 1 => ##1 data_out == $past(data_in)",
    ],
    "When ack is high while busy is high, data_valid changes from 0 to 1 for one cycle.": [
        "ack == 1 && busy == 1 => ##1 data_valid == 1",
        "ack == 1 && busy == 1 => ##2 data_valid == 0",
    ],
    "The request line is 1 bit wide.": ["width of req is 1"],
    "busy changes from 1 to 0 one cycle after the acknowledgment from the bus arrives.": [
        "busy == 1 && ack == 1 => ##1 busy == 0",
    ],
    "busy changes from 1 to 0 one cycle after ack is high.": ["busy == 1 && ack == 1 => ##1 busy == 0"],
    "When req is high and ack stays low, timeout = 1 three cycles later.": [
        "req == 1 && ack == 0 => ##3 timeout == 1",
    ],
    "One cycle after timeout is asserted, retry goes high.": [
        "req asserted and ack low implies timeout after 3 cycles then retry",
    ],
    "err is high whenever timeout and retry are high together.": ["timeout == 1 && retry == 1 => err == 1"],
}

# statement -> [(antecedent, consequent), retry pair]; a failing side is any text
DECOMPOSE = {
    "timeout == 1 => ##1 retry == 1": [("timeout", "##1 retry")],
    "posedge clk => registers update": [("$rose(clk)", "1"), ("$rose(clk)", "1'b1")],
    "!rst_n => ##1 busy == 0": [("!rst_n", "##1 !busy")],
    "!rst_n => ##1 timeout == 0": [("!rst_n", "##1 !timeout")],
    "!rst_n => ##1 retry == 0": [("!rst_n", "##1 !retry")],
    "rst_n rises => controller idle until req": [("$rose(rst_n)", "!busy")],
    "req == 1 && busy == 0 => ##1 busy == 1": [("req && !accepted", "##1 busy"), ("req && !busy", "##1 busy")],
    "ack == 1 && busy == 1 => ##1 data_out == $past(data_in)": [
        ("ack && busy", "##1 data_out == $past(data_in)"),
    ],
    "ack == 1 && busy == 1 => ##1 data_valid == 1": [("ack && busy", "##1 data_valid")],
    "ack == 1 && busy == 1 => ##2 data_valid == 0": [
        ("ack && busy", "##1 data_valid ##1 !data_valid |-> 1"),
        ("ack && busy", "##[1:2] !data_valid"),
    ],
    "busy == 1 && ack == 1 => ##1 busy == 0": [("busy && ack", "##1 !busy")],
    "req == 1 && ack == 0 => ##3 timeout == 1": [("req && !ack", "##3 timeout")],
    "req asserted and ack low implies timeout after 3 cycles then retry": [("req && !ack", "##3 timeout ##1 retry")],
    "timeout == 1 && retry == 1 => err == 1": [("timeout && retry", "err")],
    # formalization switched off: rewritten sentences arrive verbatim
    "After a timeout, the controller signals a retry to the client.": [("timeout", "##1 retry")],
    "busy is high while the controller is serving a request.": [("req && !busy", "##1 busy")],
    "When rst_n is low, busy = 0.": [("!rst_n", "##1 !busy")],
    "When rst_n is low, timeout = 0 and retry = 0.": [("!rst_n", "##1 !timeout && !retry")],
    "When req is high and busy is low, busy = 1 on the next clock edge.": [("req && !busy", "##1 busy")],
    "When ack is high while busy is high, data_out = data_in.": [("ack && busy", "##1 data_out == $past(data_in)")],
    "When ack is high while busy is high, data_valid changes from 0 to 1 for one cycle.": [
        ("ack && busy", "##1 data_valid ##1 !data_valid"),
    ],
    "busy changes from 1 to 0 one cycle after ack is high.": [("busy && ack", "##1 !busy")],
    "When req is high and ack stays low, timeout = 1 three cycles later.": [("req && !ack", "##3 timeout")],
    "One cycle after timeout is asserted, retry goes high.": [("timeout", "##1 retry")],
    "err is high whenever timeout and retry are high together.": [("timeout && retry", "err")],
}

_PROP = """\
property {name};
  @(posedge clk) disable iff (!rst_n) {body};
endproperty
{name}_a: assert property({name});"""

# statement -> one-shot property body; several are malformed on purpose
ONESHOT = {
    "timeout == 1 => ##1 retry == 1": "timeout |=> retry",
    "!rst_n => ##1 busy == 0": "!rst_n |-> ##1 !busy",
    "!rst_n => ##1 timeout == 0": "!rst_n |-> ##1 !timeout",
    "!rst_n => ##1 retry == 0": "!rst_n |-> ##1 !retry",
    "req == 1 && busy == 0 => ##1 busy == 1": "req && !busy |-> ##1 busy",
    "ack == 1 && busy == 1 => ##1 data_out == $past(data_in)": "ack && busy |-> ##1 data_out == $past(data_in)",
    "ack == 1 && busy == 1 => ##1 data_valid == 1": "ack && busy |-> ##1 data_valid",
    "ack == 1 && busy == 1 => ##2 data_valid == 0": "ack && busy |-> ##1 data_valid ##1 !data_valid",
    "busy == 1 && ack == 1 => ##1 busy == 0": "busy && ack |-> ##[1:2] !busy",
    "req == 1 && ack == 0 => ##3 timeout == 1": "req && !ack [*3] |-> timeout",
    "req asserted and ack low implies timeout after 3 cycles then retry": "req && !ack |-> ##3 timeout ##1 retry",
    "timeout == 1 && retry == 1 => err == 1": "timeout && retry |-> err",
}
ONESHOT_TRUNCATED = "timeout == 1 && retry == 1 => err == 1"


def _between(text: str, start: str, end: str | None = None) -> str:
    i = text.index(start) + len(start)
    j = text.index(end, i) if end else len(text)
    return text[i:j].strip()


def _fenced(body: str, lang: str = "") -> str:
    return f"```{lang}\n{body}\n```"


class ScriptedModel:
    """Deterministic stand-in for the chat model."""

    def __init__(self):
        self.calls = 0

    def __call__(self, req: ChatRequest) -> str:
        self.calls += 1
        system, user = req.system_prompt, req.user_prompt
        low_t = req.temperature < 0.5
        if system == prompts.EXTRACT_SYSTEM:
            index = int(_between(user, "Specification segment ", ":"))
            items = EXTRACT[index]
            return "\n".join(f"- {t}" for t in items) if items else "NONE"
        if system == prompts.MAPPING_SYSTEM:
            return "Signals found in the specification:\n" + _fenced(json.dumps(MAPPING, indent=2), "json")
        if system == prompts.SUBSTITUTE_SYSTEM:
            sentence = _between(user, "Sentence:\n", "\n\nRespond")
            table = {**SUBSTITUTE, **SUBSTITUTE_LOW_T} if low_t else SUBSTITUTE
            answers = table[sentence]
            retry = user.startswith("Your previous rewrite")
            return answers[min(int(retry), len(answers) - 1)]
        if system == prompts.CRITICAL_SYSTEM:
            sentence = _between(user, "Sentence:\n", "\n\nIs this")
            if sentence == UNREADABLE_VERDICT:
                return "NO" if low_t else "It depends on whether busy is driven by the request logic."
            if sentence in NOT_CRITICAL:
                return "NO. This is a structural fact, not a causal relation."
            return "YES. It relates a condition to a later signal change."
        if system == prompts.FORMALIZE_SYSTEM:
            sentence = _between(user, "Sentence:\n")
            stmts = FORMAL[sentence]
            if stmts is None:
                return "The sentence states an invariant: busy == 1 while serving => no new request."
            objects = "\n".join(f"{i + 1}. {s.split('=>')[0].strip()} leads to {s.split('=>')[-1].strip()}"
                                for i, s in enumerate(stmts))
            return f"Verification objects:\n{objects}\n\nFormal statements:\n" + _fenced("\n".join(stmts))
        if system == prompts.DECOMPOSE_SYSTEM:
            statement = _between(user, "Formal statement:\n", "\n\nAnswer with")
            pairs = DECOMPOSE[statement]
            retry = "Your previous answer was rejected" in user
            ant, cons = pairs[min(int(retry), len(pairs) - 1)]
            return f"ANTECEDENT:\n{_fenced(ant)}\nCONSEQUENT:\n{_fenced(cons)}"
        if system == prompts.ONESHOT_SYSTEM:
            statement = _between(user, "Statement:\n", "\n\nWrite one")
            name = _between(user, "assertion named ", " as a")
            text = _PROP.format(name=name, body=ONESHOT[statement])
            if statement == ONESHOT_TRUNCATED:
                text = text.replace("endproperty\n", "")
            return _fenced(text, "systemverilog")
        raise KeyError(f"unscripted prompt: {system[:60]!r}")


# -- independent scoring oracle ------------------------------------------------

def oracle_pagerank(g, damping: float) -> dict:
    G = nx.DiGraph()
    G.add_nodes_from(g.nodes)
    for (src, dst), w in g.edges.items():
        G.add_edge(src, dst, weight=w)
    nodes = list(G.nodes)
    P = nx.google_matrix(G, alpha=damping, weight="weight", nodelist=nodes)
    # exact stationary vector: x (P - I) = 0 with sum(x) = 1
    A = np.vstack([np.asarray(P).T - np.eye(len(nodes)), np.ones(len(nodes))])
    b = np.zeros(len(nodes) + 1)
    b[-1] = 1.0
    x = np.linalg.lstsq(A, b, rcond=None)[0]
    return dict(zip(nodes, x))


def oracle_distance(succ: dict, pr: dict, src, dst) -> float:
    """Sum over distinct prefixes of src->dst paths of prod(w) * PR(last)."""
    weight = {(a, b): w for a, out in succ.items() for b, w in out}
    prefixes = set()

    def walk(path):
        node = path[-1]
        if node == dst:
            prefixes.update(tuple(path[:i]) for i in range(1, len(path) + 1))
            return
        for nxt, _ in succ.get(node, ()):
            walk(path + [nxt])

    walk([src])
    total = 0.0
    for prefix in prefixes:
        prod = 1
        for a, b in zip(prefix, prefix[1:]):
            prod *= weight[a, b]
        total += prod * pr[prefix[-1]]
    return total


def oracle_scores(sv_text: str, rtl_text: str, config: PipelineConfig) -> dict:
    asts = [r for _, _, r in parse_file(sv_text) if not isinstance(r, SvaSyntaxError)]
    offsets = [ev.offset for a in asts for side in events(a) for ev in side]
    depth = config.unroll_depth if config.unroll_depth is not None else max(offsets, default=0) + config.unroll_depth_margin
    g = build_sdg(rtl_text, depth, config.include_conditions)
    pr = oracle_pagerank(g, config.damping)
    succ = {}
    for (src, dst), w in g.edges.items():
        succ.setdefault(src, []).append((dst, w))
    nodes = set(g.nodes)
    scores = {}
    for a in asts:
        ant, cons = events(a)
        total = 0.0
        for i, c in enumerate(cons):
            if c not in nodes:
                continue
            preds = [p for p in sorted(ant) if p in nodes]
            preds += [p for p in cons[:i] if p.offset < c.offset and p in nodes and p not in preds]
            total += sum(oracle_distance(succ, pr, p, c) for p in preds)
        scores[a.name] = total
    return scores


# -- driver --------------------------------------------------------------------

def author_arm(arm: str) -> None:
    case = get_case(f"toy/{arm}")
    directory = case.directory
    transcript_path = directory / "transcript.jsonl"
    transcript_path.unlink(missing_ok=True)
    config = PipelineConfig.from_file(directory / "config.toml", llm_mode="record")
    model = ScriptedModel()
    gateway = LLMGateway(model, mode="record", transcript=Transcript(transcript_path))
    scratch = directory / "_record"
    run_all(config, TOY / "spec.md", scratch, TOY / "req_ctrl.v", gateway)
    shutil.rmtree(scratch)
    golden = case.golden
    shutil.rmtree(golden, ignore_errors=True)
    regenerate(case, golden)
    replay_config = PipelineConfig.from_file(directory / "config.toml", llm_mode="replay")
    scores = oracle_scores((golden / "assertions.sv").read_text(), (TOY / "req_ctrl.v").read_text(), replay_config)
    (directory / "oracle_scores.json").write_text(json.dumps(scores, indent=2, sort_keys=True) + "\n")
    print(f"{arm}: {model.calls} model calls, {len(gateway.transcript)} transcript rows, {len(scores)} scored")


def author_handshake() -> None:
    case = get_case("handshake")
    shutil.rmtree(case.golden, ignore_errors=True)
    regenerate(case, case.golden)
    config = PipelineConfig.from_file(case.directory / "config.toml")
    scores = oracle_scores((case.directory / "handshake.sv").read_text(),
                           (case.directory / "handshake.v").read_text(), config)
    (case.directory / "oracle_scores.json").write_text(json.dumps(scores, indent=2, sort_keys=True) + "\n")
    print(f"handshake: {len(scores)} scored")


def author_fig3() -> None:
    case = get_case("fig3")
    shutil.rmtree(case.golden, ignore_errors=True)
    regenerate(case, case.golden)
    print("fig3: graph written")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arm", action="append", choices=list(TOY_ARMS))
    ap.add_argument("--skip-toy", action="store_true")
    args = ap.parse_args(argv)
    if not args.skip_toy:
        for arm in args.arm or TOY_ARMS:
            author_arm(arm)
    if not args.arm:
        author_handshake()
        author_fig3()
    return 0


if __name__ == "__main__":
    sys.exit(main())
