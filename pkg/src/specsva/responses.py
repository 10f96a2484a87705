"""Parsing helpers for LLM responses."""

from __future__ import annotations

import re

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_LABELED = re.compile(r"\b(ANTECEDENT|CONSEQUENT)\b\s*:?\s*```[^\n`]*\n(.*?)```", re.DOTALL | re.IGNORECASE)
_IDENT_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VERILOG_LITERAL = re.compile(r"\d*'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ_?]+")


class MalformedResponse(ValueError):
    """The LLM answer does not follow the format the prompt demanded."""

    def __init__(self, message: str, where=None):
        super().__init__(message if where is None else f"{message} [{where}]")
        self.where = where


def fenced_blocks(text: str) -> list[str]:
    return [m.group(1) for m in _FENCE.finditer(text)]


def labeled_blocks(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for label, body in _LABELED.findall(text):
        out.setdefault(label.upper(), body.strip())
    return out


def identifier_tokens(text: str) -> list[str]:
    """All identifier-shaped tokens, after removing sized Verilog literals."""
    return _IDENT_TOKEN.findall(_VERILOG_LITERAL.sub(" ", text))


def looks_like_signal(token: str) -> bool:
    """Heuristic for tokens that read as signal names rather than English:
    contains ``_`` or a digit, is all caps (2+ chars), or is camelCase."""
    if "_" in token or any(ch.isdigit() for ch in token):
        return True
    if len(token) >= 2 and token.isupper():
        return True
    return any(ch.isupper() for ch in token[1:])
