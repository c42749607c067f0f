"""Structural model of JUnit test sources: parsing, split/merge, focal context.

The parser is a brace-balanced block scanner plus a line-level declaration
recognizer. Generics, lambdas and anonymous classes stay opaque expression
text. Every model object keeps the verbatim source it came from, so rendering
a parsed file reproduces it byte for byte and transforms are plain text edits
followed by a re-parse.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, NamedTuple, Union

from .errors import MergeConflict, NotATestFile, ParseError
from .javasrc import (
    CLOSERS,
    apply_edits,
    IDENT,
    OPENERS,
    check_balanced,
    collapse_ws,
    find_matching,
    iter_calls,
    line_of,
    mask,
    skip_ws,
    split_top_level,
    tokenize,
)

log = logging.getLogger(__name__)

TEST_ANNOTATIONS = {"Test", "ParameterizedTest"}
SETUP_ANNOTATIONS = {"Before", "BeforeEach", "BeforeClass", "BeforeAll"}
TEARDOWN_ANNOTATIONS = {"After", "AfterEach", "AfterClass", "AfterAll"}

# Number of arguments each assertion takes without a message.
ASSERTION_ARITY = {
    "assertEquals": 2,
    "assertNotEquals": 2,
    "assertSame": 2,
    "assertNotSame": 2,
    "assertArrayEquals": 2,
    "assertIterableEquals": 2,
    "assertLinesMatch": 2,
    "assertInstanceOf": 2,
    "assertTrue": 1,
    "assertFalse": 1,
    "assertNull": 1,
    "assertNotNull": 1,
    "assertThat": 2,
    "assertThrows": 2,
    "assertThrowsExactly": 2,
    "assertDoesNotThrow": 1,
    "assertTimeout": 2,
    "assertAll": 0,
    "fail": 0,
}
ASSERTION_QUALIFIERS = {"", "Assert", "Assertions", "MatcherAssert"}
_ASSERTJ_MESSAGE = re.compile(r"\.\s*(?:as|describedAs|withFailMessage|overridingErrorMessage)\s*\(")

STATEMENT_KINDS = (
    "assertion",
    "try_block",
    "throw_stmt",
    "conditional",
    "loop",
    "local_decl",
    "call",
    "return",
    "other",
)
_NON_TYPE_WORDS = {
    "return", "throw", "new", "yield", "break", "continue", "assert", "else",
    "case", "default", "this", "super", "var_", "do",
}
_DECL_RE = re.compile(
    r"(?:final\s+)?(?:@[\w.]+\s+)*(" + IDENT + r")[\w$.]*(?:\s*<[^;=(]*>)?(?:\s*\[\s*\])*\s+"
    + IDENT + r"\s*(?:=|;|,|\[|:)"
)
_WORD_RE = re.compile(IDENT)


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AssertionCall:
    method: str
    args: tuple[str, ...]
    has_message: bool
    numeric_literals: tuple[tuple[str, int], ...] = ()
    message_index: int | None = None
    # Offsets below are relative to the enclosing method's text.
    paren_span: tuple[int, int] = (0, 0)
    arg_spans: tuple[tuple[int, int], ...] = ()
    literal_spans: tuple[tuple[int, int], ...] = ()
    chained: bool = False

    @property
    def checked_args(self) -> tuple[str, ...]:
        """Arguments other than the message."""
        return tuple(a for k, a in enumerate(self.args) if k != self.message_index)


@dataclass(frozen=True)
class Statement:
    kind: str
    text: str
    span: tuple[int, int]
    blocks: tuple[tuple[str, tuple["Statement", ...]], ...] = ()
    assertion: AssertionCall | None = None

    @property
    def children(self) -> tuple["Statement", ...]:
        return tuple(s for _, stmts in self.blocks for s in stmts)

    @property
    def has_catch(self) -> bool:
        return any(label.startswith("catch") for label, _ in self.blocks)


@dataclass(frozen=True)
class MethodDecl:
    name: str
    annotations: tuple[tuple[str, str], ...]
    signature_text: str
    body: tuple[Statement, ...]
    span: tuple[int, int]
    text: str = field(repr=False)
    header_start: int = 0
    body_open: int = -1
    body_close: int = -1
    annotation_spans: tuple[tuple[int, int], ...] = ()
    params_span: tuple[int, int] = (0, 0)

    def has_annotation(self, *names: str) -> bool:
        return any(a for a, _ in self.annotations if a in names)

    def annotation_arg(self, name: str) -> str | None:
        for a, arg in self.annotations:
            if a == name:
                return arg
        return None

    @property
    def is_test(self) -> bool:
        return self.has_annotation(*TEST_ANNOTATIONS)

    @property
    def body_text(self) -> str:
        return self.text[self.body_open + 1:self.body_close] if self.body_open >= 0 else ""

    @property
    def params_text(self) -> str:
        a, b = self.params_span
        return self.text[a + 1:b]

    def statements(self) -> list[Statement]:
        return list(iter_statements(self.body))


@dataclass(frozen=True)
class Member:
    """One class-body member with its leading trivia (blank lines, comments)."""
    kind: str  # test | setup | teardown | method | field | type | init | other
    text: str
    span: tuple[int, int]
    method: MethodDecl | None = None


@dataclass(frozen=True)
class TestFile:
    __test__ = False

    path: str
    package_name: str
    imports: tuple[str, ...]
    class_name: str
    class_annotations: tuple[tuple[str, str], ...]
    class_declaration: str
    header: str = field(repr=False)
    members: tuple[Member, ...] = field(repr=False)
    footer: str = field(repr=False)
    import_insert_at: int = field(repr=False)
    raw_text: str = field(repr=False)

    @property
    def test_methods(self) -> list[MethodDecl]:
        return [m.method for m in self.members if m.kind == "test"]

    @property
    def setup_methods(self) -> list[MethodDecl]:
        return [m.method for m in self.members if m.kind == "setup"]

    @property
    def teardown_methods(self) -> list[MethodDecl]:
        return [m.method for m in self.members if m.kind == "teardown"]

    @property
    def fields_and_helpers(self) -> list[Member]:
        return [m for m in self.members if m.kind not in ("test", "setup", "teardown")]


class Origin(NamedTuple):
    path: str
    method: str
    index: int


@dataclass(frozen=True)
class SharedContext:
    imports: tuple[str, ...]
    fields_and_helpers: tuple[Member, ...]
    setup_methods: tuple[MethodDecl, ...]
    teardown_methods: tuple[MethodDecl, ...]


@dataclass(frozen=True)
class TestUnit:
    __test__ = False

    origin: Origin
    methods: tuple[MethodDecl, ...]
    file: TestFile = field(repr=False, compare=False)
    imports: tuple[str, ...] = ()
    extra_members: tuple[str, ...] = ()
    removed: bool = False

    @property
    def method(self) -> MethodDecl | None:
        return self.methods[0] if self.methods else None

    @property
    def shared_context(self) -> SharedContext:
        f = self.file
        return SharedContext(
            imports=self.imports,
            fields_and_helpers=tuple(f.fields_and_helpers),
            setup_methods=tuple(f.setup_methods),
            teardown_methods=tuple(f.teardown_methods),
        )

    def single(self, i: int) -> "TestUnit":
        return replace(self, methods=(self.methods[i],))

    def with_methods(self, methods, imports=None, extra_members=None) -> "TestUnit":
        methods = tuple(methods)
        return replace(
            self,
            methods=methods,
            imports=self.imports if imports is None else tuple(imports),
            extra_members=self.extra_members if extra_members is None else tuple(extra_members),
            removed=not methods,
        )


@dataclass(frozen=True)
class FocalMethod:
    name: str
    signature: str
    comment: str


@dataclass(frozen=True)
class FocalClass:
    path: str
    package_name: str
    declaration: str
    methods: tuple[FocalMethod, ...]

    @property
    def method_names(self) -> set[str]:
        return {m.name for m in self.methods}

    def lookup(self, name: str) -> FocalMethod | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None


@dataclass(frozen=True)
class TestContext:
    __test__ = False

    package_name: str = ""
    focal_class: str = ""
    focal_method_signature: str = ""
    focal_method_comment: str = ""
    other_invoked_methods: tuple[str, ...] = ()
    source: FocalClass | None = field(default=None, repr=False, compare=False)

    def focal_method_names(self) -> set[str]:
        """Names that count as production (focal-class) methods."""
        if self.source is not None:
            return self.source.method_names
        names = set()
        for sig in (self.focal_method_signature, *self.other_invoked_methods):
            n = signature_name(sig)
            if n:
                names.add(n)
        return names

    @property
    def focal_method_name(self) -> str:
        return signature_name(self.focal_method_signature)

    @property
    def other_invoked_names(self) -> list[str]:
        return [signature_name(s) for s in self.other_invoked_methods]


def signature_name(signature: str) -> str:
    m = re.search(r"(" + IDENT + r")\s*\(", signature)
    return m.group(1) if m else ""


def iter_statements(stmts) -> Iterator[Statement]:
    """Pre-order walk; the position in this walk is a statement's index."""
    for s in stmts:
        yield s
        yield from iter_statements(s.children)


# --------------------------------------------------------------------------
# Statement-level parsing
# --------------------------------------------------------------------------

def _looks_like_message(arg: str) -> bool:
    a = arg.strip()
    if a.startswith('"'):
        return True
    if a.startswith("()") and "->" in a:
        return True  # JUnit 5 message supplier
    if re.fullmatch(r"String\s*\.\s*format\s*\(.*\)", a, re.S):
        return True
    if re.fullmatch(IDENT, a) and re.search(r"msg|message|reason|desc", a, re.I):
        return True
    return False


def _message_index(name: str, args: list[str], junit: int) -> int | None:
    n = len(args)
    if name == "fail":
        return 0 if n >= 1 else None
    if name == "assertThat":
        return 0 if n >= 3 else None
    base = ASSERTION_ARITY[name]
    if n <= base:
        return None
    pos = n - 1 if junit == 5 else 0
    if n >= base + 2:
        return pos
    return pos if _looks_like_message(args[pos]) else None


def _numeric_literals(arg: str) -> list[tuple[str, int, int]]:
    """(literal text, start, end) for numeric literals in an argument, sign included."""
    out = []
    toks = tokenize(arg)
    for k, t in enumerate(toks):
        if t.kind != "num":
            continue
        start = t.start
        if k >= 1 and toks[k - 1].text == "-":
            before = toks[k - 2] if k >= 2 else None
            if before is None or (before.kind == "op" and before.text not in (")", "]")):
                start = toks[k - 1].start
        out.append((arg[start:t.end].replace(" ", ""), start, t.end))
    return out


class _BodyParser:
    def __init__(self, raw: str, masked: str, junit: int):
        self.raw = raw
        self.m = masked
        self.junit = junit

    def err(self, pos: int, reason: str) -> ParseError:
        return ParseError(line_of(self.raw, pos), reason)

    def word_at(self, i: int) -> str | None:
        mt = _WORD_RE.match(self.m, i)
        return mt.group() if mt else None

    def expect(self, i: int, ch: str, end: int) -> int:
        i = skip_ws(self.m, i, end)
        if i >= end or self.m[i] != ch:
            raise self.err(i, f"expected {ch!r}")
        return i

    def block(self, start: int, end: int) -> tuple[Statement, ...]:
        stmts = []
        i = start
        while True:
            i = skip_ws(self.m, i, end)
            if i >= end:
                break
            if self.m[i] == ";":
                i += 1
                continue
            st, i = self.statement(i, end)
            stmts.append(st)
        return tuple(stmts)

    def sub(self, i: int, end: int) -> tuple[tuple[Statement, ...], int]:
        i = skip_ws(self.m, i, end)
        if i < end and self.m[i] == "{":
            j = find_matching(self.m, i)
            return self.block(i + 1, j), j + 1
        if i < end and self.m[i] == ";":
            return (), i + 1
        st, k = self.statement(i, end)
        return (st,), k

    def mk(self, kind, a, b, blocks=(), assertion=None) -> Statement:
        return Statement(kind, self.raw[a:b], (a, b), tuple(blocks), assertion)

    def statement(self, i: int, end: int) -> tuple[Statement, int]:
        m = self.m
        if m[i] == "{":
            j = find_matching(m, i)
            return self.mk("other", i, j + 1, [("block", self.block(i + 1, j))]), j + 1
        if m[i] in CLOSERS:
            raise self.err(i, f"unexpected {m[i]!r}")
        word = self.word_at(i)
        if word == "if":
            p = self.expect(i + 2, "(", end)
            q = find_matching(m, p)
            then, k = self.sub(q + 1, end)
            blocks = [("then", then)]
            k2 = skip_ws(m, k, end)
            if self.word_at(k2) == "else":
                els, k = self.sub(k2 + 4, end)
                blocks.append(("else", els))
            return self.mk("conditional", i, k, blocks), k
        if word in ("for", "while"):
            p = self.expect(i + len(word), "(", end)
            q = find_matching(m, p)
            body, k = self.sub(q + 1, end)
            return self.mk("loop", i, k, [("body", body)]), k
        if word == "do":
            body, k = self.sub(i + 2, end)
            k = skip_ws(m, k, end)
            if self.word_at(k) != "while":
                raise self.err(k, "expected 'while' after do-block")
            p = self.expect(k + 5, "(", end)
            q = find_matching(m, p)
            s = self.expect(q + 1, ";", end)
            return self.mk("loop", i, s + 1, [("body", body)]), s + 1
        if word == "try":
            k = skip_ws(m, i + 3, end)
            if m[k] == "(":
                k = skip_ws(m, find_matching(m, k) + 1, end)
            if m[k] != "{":
                raise self.err(k, "expected '{' after try")
            j = find_matching(m, k)
            blocks = [("try", self.block(k + 1, j))]
            k = j + 1
            while True:
                k2 = skip_ws(m, k, end)
                w = self.word_at(k2)
                if w == "catch":
                    p = self.expect(k2 + 5, "(", end)
                    q = find_matching(m, p)
                    b = self.expect(q + 1, "{", end)
                    j = find_matching(m, b)
                    blocks.append(("catch " + collapse_ws(self.raw[p + 1:q]), self.block(b + 1, j)))
                    k = j + 1
                elif w == "finally":
                    b = self.expect(k2 + 7, "{", end)
                    j = find_matching(m, b)
                    blocks.append(("finally", self.block(b + 1, j)))
                    k = j + 1
                else:
                    break
            return self.mk("try_block", i, k, blocks), k
        if word in ("switch", "synchronized"):
            p = self.expect(i + len(word), "(", end)
            q = find_matching(m, p)
            b = self.expect(q + 1, "{", end)
            j = find_matching(m, b)
            if word == "switch":
                return self.mk("conditional", i, j + 1), j + 1
            return self.mk("other", i, j + 1, [("block", self.block(b + 1, j))]), j + 1
        if word in ("class", "interface", "enum", "record"):
            b = m.find("{", i)
            if b < 0 or b >= end:
                raise self.err(i, "local type without body")
            j = find_matching(m, b)
            return self.mk("other", i, j + 1), j + 1
        # expression / declaration statement: runs to the next depth-0 ';'
        depth = 0
        j = i
        while j < end:
            c = m[j]
            if c in OPENERS:
                depth += 1
            elif c in CLOSERS:
                depth -= 1
                if depth < 0:
                    raise self.err(j, f"unexpected {c!r}")
            elif c == ";" and depth == 0:
                break
            j += 1
        if j >= end:
            raise self.err(i, "statement not terminated by ';'")
        return self.classify(i, j + 1, word), j + 1

    def classify(self, a: int, b: int, word: str | None) -> Statement:
        masked = self.m[a:b]
        assertion = self.assertion(a, b)
        if assertion is not None:
            return self.mk("assertion", a, b, assertion=assertion)
        if word == "return":
            return self.mk("return", a, b)
        if word == "throw":
            return self.mk("throw_stmt", a, b)
        dm = _DECL_RE.match(masked)
        if dm and dm.group(1) not in _NON_TYPE_WORDS:
            if masked[dm.end() - 1] == "=":
                # `T v = assertThrows(...)` is still an assertion
                assertion = self.assertion(skip_ws(self.m, a + dm.end(), b), b)
                if assertion is not None:
                    return self.mk("assertion", a, b, assertion=assertion)
            return self.mk("local_decl", a, b)
        if re.search(IDENT + r"\s*\(", masked):
            return self.mk("call", a, b)
        return self.mk("other", a, b)

    def assertion(self, a: int, b: int) -> AssertionCall | None:
        m = self.m
        mt = re.compile(r"((?:" + IDENT + r"\s*\.\s*)*)(" + IDENT + r")\s*\(").match(m, a, b)
        if not mt:
            return None
        name = mt.group(2)
        qual = re.sub(r"\s", "", mt.group(1)).rstrip(".").split(".")[-1]
        if name not in ASSERTION_ARITY or qual not in ASSERTION_QUALIFIERS:
            return None
        p = mt.end() - 1
        q = find_matching(m, p)
        rest = m[q + 1:b].strip()
        chained = False
        if rest != ";":
            if name == "assertThat" and rest.startswith("."):
                chained = True
            else:
                return None
        spans = split_top_level(m, p + 1, q)
        args = [self.raw[s:e] for s, e in spans]
        if chained:
            msg_idx = None
            has_msg = bool(_ASSERTJ_MESSAGE.search(m[q + 1:b]))
        elif name == "assertAll":
            msg_idx = 0 if args and args[0].lstrip().startswith('"') else None
            has_msg = True
        else:
            msg_idx = _message_index(name, args, self.junit)
            has_msg = msg_idx is not None
        lits, lit_spans = [], []
        for k, (s, e) in enumerate(spans):
            if k == msg_idx or "->" in m[s:e]:
                continue  # messages and executable lambdas are not checked values
            for text, ls, le in _numeric_literals(self.raw[s:e]):
                lits.append((text, k))
                lit_spans.append((s + ls, s + le))
        return AssertionCall(
            method=name,
            args=tuple(args),
            has_message=has_msg,
            numeric_literals=tuple(lits),
            message_index=msg_idx,
            paren_span=(p, q),
            arg_spans=tuple(spans),
            literal_spans=tuple(lit_spans),
            chained=chained,
        )


# --------------------------------------------------------------------------
# Member / method / file parsing
# --------------------------------------------------------------------------

def _read_annotations(raw: str, masked: str, i: int):
    anns, spans = [], []
    while i < len(masked) and masked[i] == "@" and not masked.startswith("@interface", i):
        mt = re.compile(r"@\s*([\w$.]+)").match(masked, i)
        if not mt:
            break
        j = mt.end()
        k = skip_ws(masked, j)
        arg = ""
        if k < len(masked) and masked[k] == "(":
            close = find_matching(masked, k)
            arg = raw[k + 1:close].strip()
            j = close + 1
        anns.append((mt.group(1).split(".")[-1], arg))
        spans.append((i, j))
        i = skip_ws(masked, j)
    return tuple(anns), tuple(spans), i


def _header_end(masked: str, i: int, end: int) -> int:
    """Index of the '{' opening a member body, or of the terminating ';'."""
    depth = 0
    saw_eq = False
    j = i
    while j < end:
        c = masked[j]
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        elif c == "{":
            if depth == 0 and not saw_eq:
                return j
            depth += 1
        elif c == "}":
            depth -= 1
        elif c == "=" and depth == 0:
            saw_eq = True
        elif c == ";" and depth == 0:
            return j
        j += 1
    raise ParseError(line_of(masked, i), "member declaration not terminated")


def parse_method(text: str, span: tuple[int, int] | None = None, junit: int = 5) -> MethodDecl:
    """Parse one method member (leading trivia allowed) into a MethodDecl."""
    masked = mask(text)
    check_balanced(masked)
    start = skip_ws(masked, 0)
    anns, ann_spans, i = _read_annotations(text, masked, start)
    k = _header_end(masked, i, len(masked))
    header = masked[i:k]
    pm = re.search(r"(" + IDENT + r")\s*\(", header)
    if not pm:
        raise ParseError(line_of(text, i), "not a method declaration")
    p = i + pm.end() - 1
    q = find_matching(masked, p)
    if masked[k] != "{":
        body, close = (), -1
        k = -1
    else:
        close = find_matching(masked, k)
        if masked[close + 1:].strip():
            raise ParseError(line_of(text, close), "unexpected text after method body")
        body = _BodyParser(text, masked, junit).block(k + 1, close)
    sig_end = k if k >= 0 else len(text)
    return MethodDecl(
        name=pm.group(1),
        annotations=anns,
        signature_text=collapse_ws(text[i:sig_end]).rstrip(";").strip(),
        body=body,
        span=span if span is not None else (0, len(text)),
        text=text,
        header_start=start,
        body_open=k,
        body_close=close,
        annotation_spans=ann_spans,
        params_span=(p, q),
    )


def _classify_member(chunk: str, span: tuple[int, int], junit: int) -> Member:
    masked = mask(chunk)
    start = skip_ws(masked, 0)
    anns, _, i = _read_annotations(chunk, masked, start)
    k = _header_end(masked, i, len(masked))
    header = masked[i:k]
    names = {a for a, _ in anns}
    if re.search(r"\b(class|interface|enum|record)\b", header):
        return Member("type", chunk, span)
    if not header.strip() or header.strip() == "static":
        return Member("init", chunk, span)
    paren = header.find("(")
    if paren >= 0 and "=" not in header[:paren] and masked[k] == "{":
        method = parse_method(chunk, span, junit)
        if names & TEST_ANNOTATIONS:
            kind = "test"
        elif names & SETUP_ANNOTATIONS:
            kind = "setup"
        elif names & TEARDOWN_ANNOTATIONS:
            kind = "teardown"
        else:
            kind = "method"
        return Member(kind, chunk, span, method)
    if paren >= 0 and "=" not in header[:paren]:
        return Member("other", chunk, span)
    return Member("field", chunk, span)


_CLASS_RE = re.compile(r"\b(class|interface|enum|record)\s+(" + IDENT + r")")
_MODIFIERS_RE = re.compile(
    r"(?:(?:public|protected|private|abstract|final|static|sealed|non-sealed|strictfp)\s+)*$"
)


def parse_java(source_text: str, path: str | Path = "<memory>", junit: int = 5) -> TestFile:
    """Parse any single-class Java source; does not require test methods."""
    path = str(path)
    masked = mask(source_text)
    check_balanced(masked)
    decl = None
    for mt in _CLASS_RE.finditer(masked):
        before = masked[:mt.start()]
        if before.count("{") - before.count("}") == 0 and before.count("(") == before.count(")"):
            decl = mt
            break
    if decl is None:
        raise ParseError(1, "no class declaration")
    body_open = masked.find("{", decl.end())
    if body_open < 0:
        raise ParseError(line_of(source_text, decl.start()), "class without body")
    body_close = find_matching(masked, body_open)

    pkg = re.search(r"\bpackage\s+([\w.]+)\s*;", masked[:decl.start()])
    imports, insert_at = [], pkg.end() if pkg else 0
    for im in re.finditer(r"\bimport\s+(static\s+)?([\w.$]+(?:\s*\.\s*\*)?)\s*;", masked[:decl.start()]):
        imports.append(("static " if im.group(1) else "") + re.sub(r"\s", "", im.group(2)))
        insert_at = im.end()
    mods = _MODIFIERS_RE.search(masked[:decl.start()])
    decl_start = mods.start() if mods else decl.start()
    anns_region = masked[insert_at:decl_start]
    class_anns = []
    for am in re.finditer(r"@\s*([\w$.]+)", anns_region):
        arg = ""
        k = skip_ws(anns_region, am.end())
        if k < len(anns_region) and anns_region[k] == "(":
            close = find_matching(anns_region, k)
            arg = source_text[insert_at + k + 1:insert_at + close].strip()
        class_anns.append((am.group(1).split(".")[-1], arg))

    members = []
    pos = body_open + 1
    while True:
        i = skip_ws(masked, pos, body_close)
        if i >= body_close:
            break
        if masked[i] == ";":
            end = i + 1
        else:
            k = _header_end(masked, i, body_close)
            end = find_matching(masked, k) + 1 if masked[k] == "{" else k + 1
        members.append(_classify_member(source_text[pos:end], (pos, end), junit))
        pos = end

    return TestFile(
        path=path,
        package_name=pkg.group(1) if pkg else "",
        imports=tuple(imports),
        class_name=decl.group(2),
        class_annotations=tuple(class_anns),
        class_declaration=collapse_ws(source_text[decl_start:body_open]),
        header=source_text[:body_open + 1],
        members=tuple(members),
        footer=source_text[pos:],
        import_insert_at=insert_at,
        raw_text=source_text,
    )


def parse_test_file(source_text: str, path: str | Path = "<memory>", junit: int = 5) -> TestFile:
    tf = parse_java(source_text, path, junit)
    if not tf.test_methods:
        raise NotATestFile(f"{path}: no @Test or @ParameterizedTest method")
    return tf


# --------------------------------------------------------------------------
# Project-level extraction and focal pairing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SkippedFile:
    path: str
    reason: str


def scan_tests(project_root, pattern: str = "src/test/**/*.java", junit: int = 5):
    """Parse every test source under ``project_root``.

    Returns ``(files, skipped)``; files without @Test methods or with parse
    errors land in ``skipped`` with a reason instead of raising.
    """
    root = Path(project_root)
    if not root.is_dir():
        raise NotADirectoryError(f"not a directory: {root}")
    files, skipped = [], []
    for path in sorted(root.glob(pattern)):
        if not path.is_file():
            continue
        try:
            text = path.read_text(encoding="utf-8")
            files.append(parse_test_file(text, path, junit))
        except NotATestFile:
            skipped.append(SkippedFile(str(path), "no @Test method"))
        except ParseError as exc:
            skipped.append(SkippedFile(str(path), f"parse error: {exc}"))
        except (OSError, UnicodeDecodeError) as exc:
            skipped.append(SkippedFile(str(path), f"unreadable: {exc}"))
    return files, skipped


def extract_tests(project_root, pattern: str = "src/test/**/*.java", junit: int = 5) -> list[TestFile]:
    return scan_tests(project_root, pattern, junit)[0]


def focal_class_name(test_class_name: str) -> str | None:
    """Strip a leading and/or trailing ``Test`` affix; None if there is none."""
    name = test_class_name
    if name.endswith("Test") and len(name) > 4:
        name = name[:-4]
    if name.startswith("Test") and len(name) > 4:
        name = name[4:]
    return name if name != test_class_name else None


def pair_focal_class(test_file: TestFile, project_root, main_pattern: str = "src/main/**/*.java") -> Path | None:
    name = focal_class_name(test_file.class_name)
    if name is None:
        return None
    root = Path(project_root)
    candidates = sorted(p for p in root.glob(main_pattern) if p.stem == name)
    pkg_dir = test_file.package_name.replace(".", "/")
    candidates.sort(key=lambda p: (pkg_dir not in p.as_posix(), str(p)))
    for p in candidates:
        try:
            if re.search(r"\b(class|interface|enum|record)\s+" + re.escape(name) + r"\b", mask(p.read_text(encoding="utf-8"))):
                return p
        except (OSError, UnicodeDecodeError):
            continue
    return None


def _doc_comment(chunk: str, header_start: int) -> str:
    lead = chunk[:header_start]
    start = lead.rfind("/**")
    if start < 0:
        return ""
    end = lead.find("*/", start)
    body = lead[start + 3:end if end >= 0 else len(lead)]
    lines = []
    for ln in body.split("\n"):
        ln = ln.strip().lstrip("*").strip()
        if ln.startswith("@"):
            break
        if ln:
            lines.append(ln)
    return " ".join(lines)


def load_focal_class(path) -> FocalClass | None:
    try:
        text = Path(path).read_text(encoding="utf-8")
        tf = parse_java(text, path)
    except (OSError, UnicodeDecodeError, ParseError) as exc:
        log.warning("cannot parse focal class %s: %s", path, exc)
        return None
    methods = []
    for m in tf.members:
        md = m.method
        if md is None or md.name == tf.class_name:
            continue
        # annotations are not part of the signature
        sig_start = md.annotation_spans[-1][1] if md.annotation_spans else md.header_start
        methods.append(FocalMethod(
            name=md.name,
            signature=collapse_ws(md.text[sig_start:md.body_open]),
            comment=_doc_comment(md.text, md.header_start),
        ))
    return FocalClass(str(path), tf.package_name, tf.class_declaration, tuple(methods))


def focal_invocations(text: str, names: set[str]) -> list[str]:
    """Focal-class method names invoked (as ``.name(``) in source order."""
    return [m.group(1) for m in iter_calls(mask(text), names)]


def collect_context(unit: TestUnit, focal_file: Union[str, Path, FocalClass, None] = None) -> TestContext:
    if isinstance(focal_file, FocalClass) or focal_file is None:
        fc = focal_file
    else:
        fc = load_focal_class(focal_file)
    if fc is None:
        return TestContext(package_name=unit.file.package_name)
    calls = []
    for md in unit.methods:
        calls += focal_invocations(md.body_text, fc.method_names)
    counts = Counter(calls)
    order = list(dict.fromkeys(calls))
    if not order:
        return TestContext(package_name=fc.package_name, focal_class=fc.declaration, source=fc)
    focal = max(order, key=lambda n: (counts[n], -order.index(n)))
    fm = fc.lookup(focal)
    others = tuple(fc.lookup(n).signature for n in order if n != focal)
    return TestContext(
        package_name=fc.package_name,
        focal_class=fc.declaration,
        focal_method_signature=fm.signature,
        focal_method_comment=fm.comment,
        other_invoked_methods=others,
        source=fc,
    )


# --------------------------------------------------------------------------
# Split, merge, render
# --------------------------------------------------------------------------

def split_into_units(test_file: TestFile) -> list[TestUnit]:
    return [
        TestUnit(
            origin=Origin(test_file.path, md.name, k),
            methods=(md,),
            file=test_file,
            imports=test_file.imports,
        )
        for k, md in enumerate(test_file.test_methods)
    ]


def _render_header(tf: TestFile, imports) -> str:
    extra = [imp for imp in dict.fromkeys(imports) if imp not in tf.imports]
    if not extra:
        return tf.header
    if tf.import_insert_at == 0:
        return "".join(f"import {imp};\n" for imp in extra) + "\n" + tf.header
    masked = mask(tf.header[:tf.import_insert_at])
    last = {False: None, True: None}
    for im in re.finditer(r"\bimport\s+(static\s+)?[\w.$*\s]+;", masked):
        last[bool(im.group(1))] = im.end()
    # plain imports join the plain block, static ones the static block
    edits = []
    for static in (False, True):
        group = [imp for imp in extra if imp.startswith("static ") == static]
        if not group:
            continue
        at = last[static] or last[not static] or tf.import_insert_at
        lead = "\n" if last[static] or last[not static] else "\n\n"
        edits.append((at, at, lead + "\n".join(f"import {imp};" for imp in group)))
    return apply_edits(tf.header, edits)


def _assemble(tf: TestFile, slots: dict[int, TestUnit], imports) -> str:
    out = [_render_header(tf, imports)]
    lead = None  # leading whitespace of a dropped member, handed to the next one

    def emit(text: str):
        nonlocal lead
        if lead is not None:
            text = lead + text[len(text) - len(text.lstrip()):]
            lead = None
        out.append(text)

    slot = 0
    for m in tf.members:
        if m.kind != "test":
            emit(m.text)
            continue
        if slot in slots:
            u = slots[slot]
            if u.removed:
                if lead is None:
                    lead = m.text[:len(m.text) - len(m.text.lstrip())]
            else:
                for t in list(u.extra_members) + [md.text for md in u.methods]:
                    emit(t)
        else:
            emit(m.text)
        slot += 1
    out.append(tf.footer)
    return "".join(out)


def render(obj) -> str:
    """Source text of a TestFile, TestUnit or MethodDecl."""
    if isinstance(obj, TestFile):
        return obj.raw_text
    if isinstance(obj, MethodDecl):
        return obj.text
    if isinstance(obj, TestUnit):
        tf = obj.file
        slots = {obj.origin.index: obj}
        # sibling tests are absent from a unit
        for k in range(len(tf.test_methods)):
            slots.setdefault(k, replace(obj, methods=(), removed=True))
        return _assemble(tf, slots, obj.imports)
    raise TypeError(f"cannot render {type(obj).__name__}")


def merge_units(units, original: TestFile, junit: int = 5) -> TestFile:
    slots: dict[int, TestUnit] = {}
    for u in sorted(units, key=lambda u: u.origin.index):
        if u.origin.path != original.path:
            raise ValueError(f"unit {u.origin} does not belong to {original.path}")
        slots[u.origin.index] = u
    seen: set[str] = set()
    for k, md in enumerate(original.test_methods):
        for m in (slots[k].methods if k in slots else (md,)):
            if m.name in seen:
                raise MergeConflict(m.name)
            seen.add(m.name)
    imports = list(original.imports)
    for u in slots.values():
        imports.extend(u.imports)
    # extra members introduced by several units only once
    emitted: set[str] = set()
    dedup = {}
    for k, u in slots.items():
        extras = tuple(e for e in u.extra_members if e.strip() not in emitted)
        emitted.update(e.strip() for e in extras)
        dedup[k] = replace(u, extra_members=extras)
    text = _assemble(original, dedup, imports)
    return parse_java(text, original.path, junit)
