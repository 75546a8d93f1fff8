"""Tokens and diagnostics for `.psys` scenario files."""

from __future__ import annotations

import re
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    message: str
    excerpt: str = field(default="", compare=False)

    def format(self, path: str = "<input>") -> str:
        head = f"{path}:{self.line}:{self.column}: {self.severity}: {self.message}"
        if not self.excerpt:
            return head
        return f"{head}\n    {self.excerpt}\n    {' ' * (self.column - 1)}^"


class ScenarioError(Exception):
    """Raised with one or more error diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(f"{d.line}:{d.column}: {d.message}" for d in diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, NUMBER, SYM, NEWLINE, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<arrow>->)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*(?:-[A-Za-z0-9_.]+)*)
  | (?P<sym>[{}():,=@+/;])
    """,
    re.VERBOSE,
)


def tokenize(text: str, diagnostics: list[Diagnostic], lines: list[str]) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            diagnostics.append(
                Diagnostic("error", line, col, f"unexpected character {ch!r}", lines[line - 1])
            )
            pos += 1
            continue
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            tokens.append(Token("NEWLINE", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "arrow":
            tokens.append(Token("SYM", "->", line, col))
        elif kind == "number":
            tokens.append(Token("NUMBER", value, line, col))
        elif kind == "name":
            tokens.append(Token("NAME", value, line, col))
        elif kind == "sym":
            tokens.append(Token("SYM", value, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens
