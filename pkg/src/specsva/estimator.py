"""scikit-learn style front end for assertion importance scoring."""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_assertions, check_design
from .importance import ImportanceReport, MissingSignal, _DistanceCache, importance, pagerank, rank
from .rtl import DepthTooSmall, dependency_edges, unroll
from .sva import SvaSyntaxError, events, parse_file

log = logging.getLogger(__name__)


class ImportanceScorer(TransformerMixin, BaseEstimator):
    """Rank assertions by structural importance in a golden RTL design.

    ``fit`` takes the golden RTL (source text, a path, or a parsed design) and
    extracts its signal dependencies. ``transform`` maps assertions to raw
    importance scores. One unrolled graph serves a whole batch, with depth
    ``unroll_depth`` or, when unset, the batch's latest consequent tick plus
    ``unroll_margin``.

    Parameters
    ----------
    damping : float
        PageRank damping factor.
    tol : float
        Bound on the L1 error of the PageRank vector.
    max_iter : int
        Power iteration cap.
    unroll_margin : int
        Extra ticks unrolled past the latest consequent event.
    unroll_depth : int or None
        Fixed unroll depth; overrides ``unroll_margin``.
    include_conditions : bool
        Count ``if``/``case`` selectors as influences on guarded targets.
    top_n : int
        Size of the headline list in reports.
    """

    def __init__(self, damping=0.85, tol=1e-9, max_iter=10_000, unroll_margin=4,
                 unroll_depth=None, include_conditions=True, top_n=10):
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter
        self.unroll_margin = unroll_margin
        self.unroll_depth = unroll_depth
        self.include_conditions = include_conditions
        self.top_n = top_n

    def fit(self, X, y=None):
        self.design_ = check_design(X)
        self.edges_ = dependency_edges(self.design_, self.include_conditions)
        self.signals_ = frozenset(self.design_.signals)
        self._graphs = {}
        return self

    def _depth_for(self, asts) -> int:
        if self.unroll_depth is not None:
            return self.unroll_depth
        latest = 0
        for ast in asts:
            ant, cons = events(ast)
            latest = max([latest] + [e.offset for e in ant] + [e.offset for e in cons])
        return latest + self.unroll_margin

    def graph(self, depth: int):
        """The unrolled SDG at ``depth`` with its PageRank and distance cache."""
        check_is_fitted(self, "edges_")
        if depth not in self._graphs:
            g = unroll(self.edges_, depth)
            pr = pagerank(g, self.damping, self.tol, self.max_iter)
            self._graphs[depth] = (g, pr, _DistanceCache(g, pr.scores))
        return self._graphs[depth]

    def transform(self, X) -> np.ndarray:
        """Raw importance per assertion; raises on unknown signals."""
        check_is_fitted(self, "edges_")
        asts = check_assertions(X)
        if not asts:
            return np.zeros(0)
        g, pr, cache = self.graph(self._depth_for(asts))
        return np.array([importance(a, g, pr, self.signals_, cache).raw_score for a in asts])

    def report(self, X) -> ImportanceReport:
        """Score a batch, skipping (and recording) assertions that cannot be
        scored instead of failing the whole batch.

        ``X`` is either .sv file text or an iterable of sources/ASTs.
        """
        check_is_fitted(self, "edges_")
        skipped, asts = [], []
        if isinstance(X, str):
            for line, text, result in parse_file(X):
                if isinstance(result, SvaSyntaxError):
                    skipped.append({"line": line, "reason": "syntax", "detail": str(result)})
                else:
                    asts.append(result)
        else:
            for item in X:
                try:
                    asts.extend(check_assertions([item]))
                except SvaSyntaxError as exc:
                    skipped.append({"line": 0, "reason": "syntax", "detail": str(exc)})
        syntax_ok = len(asts)
        entries, warnings = [], []
        if asts:
            g, pr, cache = self.graph(self._depth_for(asts))
            for ast in asts:
                try:
                    entry = importance(ast, g, pr, self.signals_, cache)
                except (MissingSignal, DepthTooSmall) as exc:
                    skipped.append({"name": ast.name, "reason": type(exc).__name__, "detail": str(exc)})
                    continue
                entries.append(entry)
                warnings += [f"{entry.name}: {w}" for w in entry.warnings]
        else:
            warnings.append("no syntax-correct assertions to score")
        report = rank(entries, self.top_n)
        report.syntax_correct = syntax_ok
        report.syntax_incorrect = sum(1 for s in skipped if s["reason"] == "syntax")
        report.skipped = skipped
        report.warnings = warnings
        return report
