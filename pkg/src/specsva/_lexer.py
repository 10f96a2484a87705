"""Tiny regex lexer shared by the SVA and Verilog parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "sysid", "num", "op", "eof"
    text: str
    line: int
    col: int

    def __repr__(self) -> str:
        return f"{self.kind}:{self.text!r}@{self.line}:{self.col}"


class LexError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


_COMMENT = r"//[^\n]*|/\*.*?\*/"
_NUMBER = r"\d*'[sS]?[bBoOdDhH]\s*[0-9a-fA-FxXzZ_?]+|'[01xXzZ]|\d[\d_]*"


def make_lexer(operators: Iterable[str]):
    """Return a ``tokenize(src)`` function for the given operator set.

    Longer operators win over their prefixes.
    """
    ops = sorted(set(operators), key=len, reverse=True)
    pattern = re.compile(
        "|".join(
            [
                rf"(?P<ws>\s+|{_COMMENT})",
                rf"(?P<num>{_NUMBER})",
                r"(?P<sysid>\$[A-Za-z_][A-Za-z0-9_$]*)",
                r"(?P<id>[A-Za-z_][A-Za-z0-9_$]*)",
                "(?P<op>" + "|".join(re.escape(o) for o in ops) + ")",
            ]
        ),
        re.DOTALL,
    )

    def tokenize(src: str) -> list[Token]:
        tokens: list[Token] = []
        pos = 0
        line, line_start = 1, 0
        while pos < len(src):
            m = pattern.match(src, pos)
            if m is None:
                raise LexError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
            kind = m.lastgroup
            text = m.group()
            if kind != "ws":
                tokens.append(Token(kind, text, line, pos - line_start + 1))
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rfind("\n") + 1
            pos = m.end()
        tokens.append(Token("eof", "", line, pos - line_start + 1))
        return tokens

    return tokenize


class TokenStream:
    """Cursor over a token list with expected-set error reporting."""

    error_class: type = ValueError

    def __init__(self, tokens: Sequence[Token], error_class: type):
        self.tokens = tokens
        self.pos = 0
        self.error_class = error_class

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 1) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("op", "id") and t.text in texts

    def at_kind(self, kind: str) -> bool:
        return self.tok.kind == kind

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def accept(self, *texts: str) -> Token | None:
        if self.at(*texts):
            return self.advance()
        return None

    def expect(self, *texts: str) -> Token:
        if self.at(*texts):
            return self.advance()
        raise self.fail(set(texts))

    def expect_kind(self, kind: str, label: str | None = None) -> Token:
        if self.tok.kind == kind:
            return self.advance()
        raise self.fail({label or kind})

    def fail(self, expected: set[str], message: str | None = None) -> Exception:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        msg = message or f"expected one of {sorted(expected)}, found {found}"
        return self.error_class(msg, line=t.line, col=t.col, expected=frozenset(expected))
