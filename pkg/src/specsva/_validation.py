"""Input coercion shared by the estimator and the CLI."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .rtl import RtlDesign, parse_rtl
from .sva import AssertionAst, is_identifier, parse


class InvalidIdentifier(ValueError):
    pass


def check_identifier(name: str, what: str = "identifier") -> str:
    if not isinstance(name, str) or not is_identifier(name):
        raise InvalidIdentifier(f"invalid {what}: {name!r}")
    return name


def check_design(X) -> RtlDesign:
    """Accept an RtlDesign, Verilog source text, or a path to a .v file."""
    if isinstance(X, RtlDesign):
        return X
    if isinstance(X, Path):
        return parse_rtl(X.read_text())
    if isinstance(X, str):
        if "module" not in X and X.endswith((".v", ".sv")) and Path(X).exists():
            return parse_rtl(Path(X).read_text())
        return parse_rtl(X)
    raise TypeError(f"expected Verilog source or RtlDesign, got {type(X).__name__}")


def check_assertions(X: Iterable) -> list[AssertionAst]:
    if isinstance(X, (str, AssertionAst)):
        X = [X]
    out = []
    for item in X:
        if isinstance(item, AssertionAst):
            out.append(item)
        elif isinstance(item, str):
            out.append(parse(item))
        else:
            raise TypeError(f"expected assertion source or AssertionAst, got {type(item).__name__}")
    return out
