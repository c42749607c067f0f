"""Lexical helpers for the Java subset: masking, bracket matching, tokens, text edits.

Everything structural works on a *masked* copy of the source. The masked copy
has the same length as the original, with comments blanked out and the
contents of string/char literals blanked (quote characters are kept), so
brackets, semicolons and digits inside literals or comments never confuse
the scanners. Offsets found on the masked text are valid on the raw text.
"""

from __future__ import annotations

import re
from typing import Iterable, Iterator, NamedTuple

from .errors import ParseError

OPENERS = {"(": ")", "{": "}", "[": "]"}
CLOSERS = {")": "(", "}": "{", "]": "["}


def mask(text: str) -> str:
    out = list(text)
    i, n = 0, len(text)

    def blank(a: int, b: int) -> None:
        for k in range(a, min(b, n)):
            if out[k] != "\n":
                out[k] = " "

    while i < n:
        c = text[i]
        if c == "/" and text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            blank(i, j)
            i = j
        elif c == "/" and text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            blank(i, j)
            i = j
        elif text.startswith('"""', i):
            j = i + 3
            while j < n and not text.startswith('"""', j):
                j += 2 if text[j] == "\\" else 1
            blank(i + 3, j)
            i = j + 3
        elif c == '"' or c == "'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            blank(i + 1, j)
            i = j + 1
        else:
            i += 1
    return "".join(out)


def line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, max(pos, 0)) + 1


def find_matching(masked: str, start: int) -> int:
    """Index of the bracket closing the one at ``start``."""
    stack = [masked[start]]
    i = start + 1
    n = len(masked)
    while i < n:
        c = masked[i]
        if c in OPENERS:
            stack.append(c)
        elif c in CLOSERS:
            if stack[-1] != CLOSERS[c]:
                raise ParseError(line_of(masked, i), f"mismatched {c!r}")
            stack.pop()
            if not stack:
                return i
        i += 1
    raise ParseError(line_of(masked, start), f"unbalanced {masked[start]!r}")


def check_balanced(masked: str) -> None:
    stack: list[tuple[str, int]] = []
    for i, c in enumerate(masked):
        if c in OPENERS:
            stack.append((c, i))
        elif c in CLOSERS:
            if not stack or stack[-1][0] != CLOSERS[c]:
                raise ParseError(line_of(masked, i), f"unexpected {c!r}")
            stack.pop()
    if stack:
        raise ParseError(line_of(masked, stack[-1][1]), f"unclosed {stack[-1][0]!r}")


def skip_ws(masked: str, i: int, end: int | None = None) -> int:
    end = len(masked) if end is None else end
    while i < end and masked[i].isspace():
        i += 1
    return i


def split_top_level(masked: str, start: int, end: int, sep: str = ",") -> list[tuple[int, int]]:
    """Split ``masked[start:end]`` at depth-0 separators; returns stripped ranges."""
    parts = []
    depth = 0
    seg = start
    for i in range(start, end):
        c = masked[i]
        if c in OPENERS:
            depth += 1
        elif c in CLOSERS:
            depth -= 1
        elif c == sep and depth == 0:
            parts.append((seg, i))
            seg = i + 1
    parts.append((seg, end))
    out = []
    for a, b in parts:
        while a < b and masked[a].isspace():
            a += 1
        while b > a and masked[b - 1].isspace():
            b -= 1
        out.append((a, b))
    if len(out) == 1 and out[0][0] == out[0][1]:
        return []
    return out


IDENT = r"[A-Za-z_$][\w$]*"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?(?:\*/|\Z))
  | (?P<text>\"\"\"(?:\\.|.)*?(?:\"\"\"|\Z))
  | (?P<str>"(?:\\.|[^"\\\n])*"?)
  | (?P<chr>'(?:\\.|[^'\\\n])*'?)
  | (?P<num>0[xX][0-9a-fA-F_]+[lL]?|0[bB][01_]+[lL]?|(?:\d[\d_]*(?:\.(?![A-Za-z_$])[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?)
  | (?P<id>[A-Za-z_$][\w$]*)
  | (?P<op>->|::|\+\+|--|&&|\|\||>>>=|<<=|>>=|[<>=!+\-*/%&|^]=|\.\.\.|.)
    """,
    re.VERBOSE | re.DOTALL,
)


class Token(NamedTuple):
    kind: str  # str | chr | text | num | id | op
    text: str
    start: int
    end: int


LITERAL_KINDS = {"str", "chr", "text", "num"}
LITERAL_WORDS = {"true", "false", "null"}


def tokenize(text: str) -> list[Token]:
    toks = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind in ("ws", "comment"):
            continue
        toks.append(Token(kind, m.group(), m.start(), m.end()))
    return toks


def is_literal(tok: Token) -> bool:
    return tok.kind in LITERAL_KINDS or (tok.kind == "id" and tok.text in LITERAL_WORDS)


def apply_edits(text: str, edits: Iterable[tuple[int, int, str]]) -> str:
    """Apply non-overlapping (start, end, replacement) edits."""
    out = text
    for start, end, repl in sorted(edits, key=lambda e: (e[0], e[1]), reverse=True):
        out = out[:start] + repl + out[end:]
    return out


def line_indent(text: str, pos: int) -> str:
    """Leading whitespace of the line containing ``pos``."""
    ls = text.rfind("\n", 0, pos) + 1
    j = ls
    while j < len(text) and text[j] in " \t":
        j += 1
    return text[ls:j]


def reindent(block: str, old: str, new: str) -> str:
    """Replace the ``old`` indentation prefix of every line after the first with ``new``."""
    lines = block.split("\n")
    out = [lines[0]]
    for ln in lines[1:]:
        if ln.startswith(old):
            out.append(new + ln[len(old):])
        elif not ln.strip():
            out.append("")
        else:
            out.append(new + ln.lstrip())
    return "\n".join(out)


def collapse_ws(text: str) -> str:
    return " ".join(text.split())


def normalize(text: str) -> str:
    """Whitespace normalization used for round-trip equality.

    Strips trailing spaces on every line and collapses runs of two or more
    blank lines into a single blank line.
    """
    lines = [ln.rstrip() for ln in text.split("\n")]
    out: list[str] = []
    blank = 0
    for ln in lines:
        if ln == "":
            blank += 1
            if blank >= 2:
                continue
        else:
            blank = 0
        out.append(ln)
    return "\n".join(out)


def iter_calls(masked: str, names: set[str] | None = None) -> Iterator[re.Match]:
    """Qualified method invocations ``.name(`` in masked text."""
    for m in re.finditer(r"\.\s*(" + IDENT + r")\s*\(", masked):
        if names is None or m.group(1) in names:
            yield m


def camel_to_snake_upper(name: str) -> str:
    s = re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", name)
    s = re.sub(r"[^A-Za-z0-9]+", "_", s)
    return s.strip("_").upper()


def java_string(s: str) -> str:
    """Render ``s`` as a Java string literal."""
    esc = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{esc}"'
