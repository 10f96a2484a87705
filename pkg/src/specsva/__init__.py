"""Generate SystemVerilog assertions from natural-language specifications
with a staged LLM pipeline, and score assertion importance against a golden
RTL design."""

__version__ = "0.1.0"

from .estimator import ImportanceScorer
from .gateway import ChatRequest, LLMGateway, Transcript
from .importance import importance, pagerank, rank, spatial_distance
from .rtl import SignalDependencyGraph, dependency_edges, parse_rtl, unroll
from .sva import AssertionAst, TemporalEvent, events, parse, print_ast

__all__ = [
    "ImportanceScorer", "ChatRequest", "LLMGateway", "Transcript",
    "importance", "pagerank", "rank", "spatial_distance",
    "SignalDependencyGraph", "dependency_edges", "parse_rtl", "unroll",
    "AssertionAst", "TemporalEvent", "events", "parse", "print_ast",
]
