"""Deterministic, template-based refactorings for the mechanizable smells.

Every transform is a set of text edits on one method followed by a re-parse,
so untouched code keeps its exact formatting. A transform that cannot be
applied safely raises NotMechanizable; callers may then hand the finding to
the model backend.
"""

from __future__ import annotations

import re

from .errors import NotMechanizable, ParseError
from .javasrc import (
    IDENT,
    apply_edits,
    camel_to_snake_upper,
    collapse_ws,
    find_matching,
    is_literal,
    java_string,
    line_indent,
    mask,
    reindent,
    skip_ws,
    tokenize,
)
from .knowledge import RuleSet, default_ruleset
from .model import MethodDecl, Statement, TestContext, TestUnit, focal_invocations, iter_statements, parse_method
from .smells import DetectionConfig, SmellFinding, SmellType, duplicate_groups, is_redundant, magic_literals

MECHANIZABLE = frozenset({
    SmellType.AR, SmellType.MNT, SmellType.ECT, SmellType.RA, SmellType.DA,
    SmellType.ETa, SmellType.ET, SmellType.UT, SmellType.IT,
})
MODEL_ONLY = frozenset(set(SmellType) - MECHANIZABLE)
REMOVAL_SMELLS = frozenset({SmellType.ET, SmellType.UT, SmellType.IT})

JUPITER_ASSERTIONS = "org.junit.jupiter.api.Assertions"
JUNIT4_ASSERT = "org.junit.Assert"
PARAMETERIZED_IMPORTS = (
    "org.junit.jupiter.params.ParameterizedTest",
    "org.junit.jupiter.params.provider.CsvSource",
)

_DECL_NAME = re.compile(
    r"(?:final\s+)?(?:@[\w.]+\s+)*[\w$.]+(?:\s*<[^;=(]*>)?(?:\s*\[\s*\])*\s+(" + IDENT + r")\s*(?:=|;|,|\[|:)"
)
_ASSIGN = re.compile(r"(?<![\w$.])(" + IDENT + r")\s*(?:[-+*/%&|^]|<<|>>>?)?=(?!=)")
_INCDEC = re.compile(r"(?:\+\+|--)\s*(" + IDENT + r")|(?<![\w$.])(" + IDENT + r")\s*(?:\+\+|--)")
_JUMP = re.compile(r"\b(?:return|break|continue|yield)\b")


# --------------------------------------------------------------------------
# Shared helpers
# --------------------------------------------------------------------------

def _locate(unit: TestUnit, finding: SmellFinding) -> int:
    for k, md in enumerate(unit.methods):
        if md.name == finding.unit_origin.method:
            return k
    raise NotMechanizable(finding, f"method {finding.unit_origin.method!r} not in unit")


def _require_action(ruleset: RuleSet, finding: SmellFinding, *actions: str):
    rule = ruleset.rules[finding.smell]
    for a in actions:
        step = rule.step(a)
        if step is not None:
            return step
    raise NotMechanizable(finding, f"rule has no {' or '.join(actions)} step")


def _reparse(md: MethodDecl, text: str, junit: int) -> MethodDecl:
    return parse_method(text, md.span, junit)


def _indent_step(md: MethodDecl) -> str:
    head = line_indent(md.text, md.header_start)
    if md.body:
        inner = line_indent(md.text, md.body[0].span[0])
        if inner.startswith(head) and len(inner) > len(head):
            return inner[len(head):]
    return "    "


def _import_covered(imp: str, existing) -> bool:
    if imp in existing:
        return True
    owner = imp.rsplit(".", 1)[0]
    return f"{owner}.*" in existing


def _with_imports(unit: TestUnit, new: list[str]) -> tuple[str, ...]:
    existing = set(unit.imports) | set(unit.file.imports)
    out = list(unit.imports)
    for imp in new:
        if not _import_covered(imp, existing) and imp not in out:
            out.append(imp)
    return tuple(out)


def _replace(unit: TestUnit, k: int, new_methods, imports=()) -> TestUnit:
    methods = list(unit.methods[:k]) + list(new_methods) + list(unit.methods[k + 1:])
    return unit.with_methods(methods, imports=_with_imports(unit, list(imports)))


def _line_is_blank_after(text: str, pos: int) -> bool:
    end = text.find("\n", pos)
    return not text[pos:end if end >= 0 else len(text)].strip()


def _removal_edit(md: MethodDecl, stmts, idx: int) -> tuple[int, int, str]:
    """Edit deleting ``stmts[idx]`` together with the trivia preceding it."""
    start = stmts[idx - 1].span[1] if idx > 0 else md.body_open + 1
    return start, stmts[idx].span[1], ""


def _declared_names(stmts) -> set[str]:
    names = set()
    for s in iter_statements(stmts):
        if s.kind in ("local_decl", "assertion"):
            m = _DECL_NAME.match(mask(s.text))
            if m:
                names.add(m.group(1))
    return names


def _used_names(text: str) -> set[str]:
    return {t.text for t in tokenize(text) if t.kind == "id"}


def _escapes_lambda(stmts) -> str | None:
    """Reason the statements cannot move into a lambda body, or None."""
    declared = _declared_names(stmts)
    for s in stmts:
        m = mask(s.text)
        if _JUMP.search(m):
            return "control transfer inside block"
        for am in _ASSIGN.finditer(m):
            if am.group(1) not in declared:
                return f"assigns outer variable {am.group(1)!r}"
        for im in _INCDEC.finditer(m):
            name = im.group(1) or im.group(2)
            if name not in declared:
                return f"mutates outer variable {name!r}"
    return None


# --------------------------------------------------------------------------
# AR: add messages
# --------------------------------------------------------------------------

_VERBS = {
    "assertEquals": "return the expected value for",
    "assertNotEquals": "differ from the unexpected value for",
    "assertSame": "return the expected instance for",
    "assertNotSame": "return a distinct instance for",
    "assertArrayEquals": "return the expected array for",
    "assertIterableEquals": "return the expected elements for",
    "assertLinesMatch": "return the expected lines for",
    "assertInstanceOf": "return the expected type for",
    "assertTrue": "hold true for",
    "assertFalse": "hold false for",
    "assertNull": "return null for",
    "assertNotNull": "return a non-null value for",
    "assertThat": "satisfy the expected condition for",
    "assertThrows": "throw the expected exception from",
    "assertThrowsExactly": "throw exactly the expected exception from",
    "assertDoesNotThrow": "not throw from",
    "assertTimeout": "complete in time for",
    "fail": "not reach this point",
}
_TWO_SIDED = {"assertEquals", "assertNotEquals", "assertSame", "assertNotSame", "assertArrayEquals",
              "assertIterableEquals", "assertLinesMatch", "assertInstanceOf", "assertThrows",
              "assertThrowsExactly", "assertTimeout"}


def _actual_expression(a) -> str:
    args = a.checked_args
    if not args or a.method == "fail":
        return ""
    if a.method == "assertThat" or a.chained:
        expr = args[0]
    elif a.method in _TWO_SIDED and len(args) >= 2:
        expr = args[1]
    else:
        expr = args[0]
    expr = collapse_ws(expr)
    return expr if len(expr) <= 60 else expr[:57] + "..."


def assertion_message(test_name: str, a, template: str = "{test} should {verb} {actual}") -> str:
    verb = _VERBS.get(a.method, "satisfy the expected condition for")
    msg = template.format(test=test_name, verb=verb, actual=_actual_expression(a))
    return " ".join(msg.split())


def _transform_ar(unit, k, md, finding, ruleset, cfg, **_):
    step = _require_action(ruleset, finding, "AddMessageToAssert")
    template = step.params.get("template", "{test} should {verb} {actual}")
    edits = []
    for s in md.statements():
        a = s.assertion
        if s.kind != "assertion" or a.has_message or a.method == "assertAll":
            continue
        msg = assertion_message(md.name, a, template)
        if a.chained:
            edits.append((a.paren_span[1] + 1, a.paren_span[1] + 1, f".as({java_string(msg.replace('%', '%%'))})"))
        elif a.method == "assertThat" or cfg.junit_version == 4:
            if a.arg_spans:
                at = a.arg_spans[0][0]
                edits.append((at, at, java_string(msg) + ", "))
            else:
                edits.append((a.paren_span[0] + 1, a.paren_span[0] + 1, java_string(msg)))
        else:
            if a.arg_spans:
                at = a.arg_spans[-1][1]
                edits.append((at, at, ", " + java_string(msg)))
            else:
                edits.append((a.paren_span[0] + 1, a.paren_span[0] + 1, java_string(msg)))
    if not edits:
        return unit
    new = _reparse(md, apply_edits(md.text, edits), cfg.junit_version)
    return _replace(unit, k, [new])


# --------------------------------------------------------------------------
# MNT: extract constants
# --------------------------------------------------------------------------

def literal_type(lit: str) -> str:
    t = lit.lstrip("-").replace("_", "").lower()
    if t.startswith(("0x", "0b")):
        return "long" if t.endswith("l") else "int"
    if t.endswith("f"):
        return "float"
    if t.endswith("d") or "." in t or "e" in t:
        return "double"
    if t.endswith("l"):
        return "long"
    return "int"


_NOT_TOKENS = {"new", "true", "false", "null", "this", "super", "class"}


def _context_token(a, arg_index: int) -> str:
    order = [i for i in range(len(a.args)) if i != a.message_index and i != arg_index] + [arg_index]
    for i in order:
        m = mask(a.args[i])
        calls = [c for c in re.findall(r"(" + IDENT + r")\s*\(", m) if not c.startswith("assert")]
        if calls:
            return camel_to_snake_upper(calls[-1])
    for i in order:
        ids = [t.text for t in tokenize(a.args[i]) if t.kind == "id" and t.text not in _NOT_TOKENS]
        if ids:
            return camel_to_snake_upper(ids[-1])
    return "VALUE"


def _transform_mnt(unit, k, md, finding, ruleset, cfg, **_):
    step = _require_action(ruleset, finding, "ExtractConstant")
    prefix = step.params.get("prefix", "EXPECTED")
    taken = _used_names(md.text)
    edits, decls = [], []
    by_key: dict[tuple[str, str], str] = {}
    n = 0
    for s in md.statements():
        if s.kind != "assertion":
            continue
        a = s.assertion
        for li in magic_literals(s, cfg):
            lit, argk = a.numeric_literals[li]
            token = _context_token(a, argk)
            key = (token, lit)
            name = by_key.get(key)
            if name is None:
                n += 1
                name = f"{prefix}_{token}_{n}"
                while name in taken:
                    n += 1
                    name = f"{prefix}_{token}_{n}"
                taken.add(name)
                by_key[key] = name
                decls.append(f"final {literal_type(lit)} {name} = {lit};")
            ls, le = a.literal_spans[li]
            edits.append((ls, le, name))
    if not edits:
        return unit
    first = md.body[0].span[0]
    ls = md.text.rfind("\n", 0, first) + 1
    if ls > md.body_open and not md.text[ls:first].strip():
        ind = md.text[ls:first]
        edits.append((ls, ls, "".join(f"{ind}{d}\n" for d in decls)))
    else:
        edits.append((first, first, " ".join(decls) + " "))
    new = _reparse(md, apply_edits(md.text, edits), cfg.junit_version)
    return _replace(unit, k, [new])


# --------------------------------------------------------------------------
# ECT: try/catch to assertDoesNotThrow / assertThrows
# --------------------------------------------------------------------------

_CATCH = re.compile(r"catch\s+(?:final\s+)?([\w$.<>\[\]]+)\s+(" + IDENT + r")$")


def _contains_fail(stmts) -> bool:
    return any(s.kind == "assertion" and s.assertion.method == "fail" for s in iter_statements(stmts))


def _try_parts(md: MethodDecl, s: Statement):
    """Method-relative spans of the try block braces and each catch block's braces."""
    text = md.text
    m = mask(text)
    i = skip_ws(m, s.span[0] + 3)
    if m[i] != "{":
        return None
    ob = i
    cb = find_matching(m, ob)
    catches = []
    j = cb + 1
    while True:
        j = skip_ws(m, j)
        if m.startswith("catch", j):
            p = m.index("(", j)
            q = find_matching(m, p)
            b = skip_ws(m, q + 1)
            e = find_matching(m, b)
            catches.append((b, e))
            j = e + 1
        else:
            break
    return ob, cb, catches


def _rewrite_try(md: MethodDecl, s: Statement, finding, ruleset, cfg) -> tuple[tuple[int, int, str], list[str]]:
    labels = [label for label, _ in s.blocks]
    if "finally" in labels:
        raise NotMechanizable(finding, "try has a finally block")
    parts = _try_parts(md, s)
    if parts is None:
        raise NotMechanizable(finding, "try-with-resources")
    ob, cb, catch_spans = parts
    body = s.blocks[0][1]
    catches = [(label, stmts) for label, stmts in s.blocks[1:]]
    text = md.text
    ind = line_indent(text, s.span[0])
    junit = cfg.junit_version

    ends_with_fail = bool(body) and body[-1].kind == "assertion" and body[-1].assertion.method == "fail"
    if ends_with_fail:
        _require_action(ruleset, finding, "WrapAssertThrows")
        if len(catches) != 1:
            raise NotMechanizable(finding, "expected-exception try with several catch clauses")
        cm = _CATCH.match(catches[0][0])
        if not cm or "|" in catches[0][0]:
            raise NotMechanizable(finding, "multi-catch or unusual catch parameter")
        etype, evar = cm.groups()
        work = list(body[:-1])
        if not work:
            raise NotMechanizable(finding, "nothing inside try is expected to throw")
        why = _escapes_lambda(work)
        if why:
            raise NotMechanizable(finding, why)
        if len(work) == 1 and work[0].kind in ("call", "other") and "//" not in text[ob:cb] and "/*" not in text[ob:cb]:
            lam = "() -> " + work[0].text.rstrip().rstrip(";").strip()
        else:
            # drop the trailing fail(...) and the trivia before it
            inner = text[ob + 1:work[-1].span[1]] + text[body[-1].span[1]:cb]
            lam = "() -> {" + inner + "}"
        call = f"assertThrows({etype}.class, {lam})"
        handler = catches[0][1]
        cb_open, cb_close = catch_spans[0]
        uses_var = bool(handler) and re.search(r"(?<![\w$.])" + re.escape(evar) + r"(?![\w$])",
                                               mask(text[cb_open:cb_close]))
        out = f"{etype} {evar} = {call};" if uses_var else f"{call};"
        if handler:
            h_text = text[handler[0].span[0]:handler[-1].span[1]]
            h_ind = line_indent(text, handler[0].span[0])
            out += "\n" + ind + reindent(h_text, h_ind, ind)
        owner = JUPITER_ASSERTIONS if junit == 5 else JUNIT4_ASSERT
        return (s.span[0], s.span[1], out), [f"static {owner}.assertThrows"]

    if catches and all(_contains_fail(stmts) for _, stmts in catches):
        _require_action(ruleset, finding, "WrapAssertDoesNotThrow")
        if junit != 5:
            raise NotMechanizable(finding, "assertDoesNotThrow requires JUnit 5")
        if not body:
            raise NotMechanizable(finding, "empty try block")
        why = _escapes_lambda(body)
        if why:
            raise NotMechanizable(finding, why)
        out = "assertDoesNotThrow(() -> {" + text[ob + 1:cb] + "});"
        return (s.span[0], s.span[1], out), [f"static {JUPITER_ASSERTIONS}.assertDoesNotThrow"]
    raise NotMechanizable(finding, "catch block neither fails nor follows an expected-exception pattern")


def _wrap_throws_clause(md: MethodDecl, junit: int) -> tuple[MethodDecl, list[str]] | None:
    sig_end = md.body_open
    m = mask(md.text)
    tm = re.search(r"\bthrows\b[^{]*$", m[md.params_span[1] + 1:sig_end])
    if not tm or junit != 5 or not md.body or _escapes_lambda(md.body):
        return None
    a = md.params_span[1] + 1 + tm.start()
    b = sig_end
    first, last = md.body[0].span[0], md.body[-1].span[1]
    ind = line_indent(md.text, first)
    inner = reindent(md.text[first:last], ind, ind + _indent_step(md))
    edits = [
        (a, b, " "),
        (first, last, "assertDoesNotThrow(() -> {\n" + ind + _indent_step(md) + inner + "\n" + ind + "});"),
    ]
    return _reparse(md, apply_edits(md.text, edits), junit), [f"static {JUPITER_ASSERTIONS}.assertDoesNotThrow"]


def _transform_ect(unit, k, md, finding, ruleset, cfg, wrap_throws=False, **_):
    flat = md.statements()
    top = set(id(s) for s in md.body)
    targets = []
    for s in flat:
        if s.kind == "throw_stmt":
            raise NotMechanizable(finding, "explicit throw statement")
        if s.kind == "try_block" and s.has_catch:
            if id(s) not in top:
                raise NotMechanizable(finding, "try/catch nested inside another statement")
            targets.append(s)
    edits, imports = [], []
    for s in targets:
        edit, imps = _rewrite_try(md, s, finding, ruleset, cfg)
        edits.append(edit)
        imports += imps
    new = _reparse(md, apply_edits(md.text, edits), cfg.junit_version) if edits else md
    if wrap_throws:
        wrapped = _wrap_throws_clause(new, cfg.junit_version)
        if wrapped:
            new, imps = wrapped
            imports += imps
    if new is md:
        return unit
    return _replace(unit, k, [new], imports)


# --------------------------------------------------------------------------
# RA: comment out redundant assertions
# --------------------------------------------------------------------------

def _transform_ra(unit, k, md, finding, ruleset, cfg, context=None, **_):
    _require_action(ruleset, finding, "RemoveStatement")
    names = context.focal_method_names() if context is not None else set()
    m = mask(md.text)
    edits = []
    for s in md.statements():
        if s.kind != "assertion" or not is_redundant(s):
            continue
        if _DECL_NAME.match(mask(s.text)):
            raise NotMechanizable(finding, "redundant assertion initializes a variable")
        if focal_invocations(s.text, names):
            raise NotMechanizable(finding, "redundant assertion exercises production code")
        j = s.span[0] - 1
        while j >= 0 and m[j].isspace():
            j -= 1
        if m[j] not in "{;}":
            raise NotMechanizable(finding, "redundant assertion is the unbraced body of a statement")
        note = "Redundant assertion removed: " + collapse_ws(s.text)
        if _line_is_blank_after(md.text, s.span[1]):
            edits.append((s.span[0], s.span[1], "// " + note))
        else:
            edits.append((s.span[0], s.span[1], "/* " + note.replace("*/", "* /") + " */"))
    if not edits:
        return unit
    new = _reparse(md, apply_edits(md.text, edits), cfg.junit_version)
    return _replace(unit, k, [new])


# --------------------------------------------------------------------------
# DA: homogeneous duplicates to @ParameterizedTest + @CsvSource
# --------------------------------------------------------------------------

def _assignment_form(stmt: Statement):
    """(declared type or None, var name or None, tokens of the `x = ...` part)."""
    toks = tokenize(stmt.text)
    if stmt.kind == "local_decl":
        m = _DECL_NAME.match(mask(stmt.text))
        if m and stmt.text[m.end(1):].lstrip().startswith("="):
            name = m.group(1)
            k = next(i for i, t in enumerate(toks) if t.start == m.start(1))
            type_text = stmt.text[:m.start(1)].strip()
            return type_text, name, toks[k:]
    if len(toks) >= 3 and toks[0].kind == "id" and toks[1].text == "=":
        return None, toks[0].text, toks
    return None, None, toks


def _csv_type(values: list) -> str | None:
    kinds = set()
    for t in values:
        if t.kind == "str":
            kinds.add("String")
        elif t.kind == "chr":
            kinds.add("char")
        elif t.kind == "num":
            kinds.add(literal_type(t.text))
        elif t.text in ("true", "false"):
            kinds.add("boolean")
        else:
            return None
    if len(kinds) == 1:
        return kinds.pop()
    if kinds <= {"int", "long"}:
        return "long"
    if kinds <= {"int", "long", "double", "float"}:
        return "double"
    return None


def _csv_cell(tok) -> str:
    if tok.kind == "str":
        return "'" + tok.text[1:-1].replace("'", "''") + "'"
    if tok.kind == "chr":
        inner = tok.text[1:-1]
        return "'" + ("''" if inner == "'" or inner == "\\'" else inner.replace('"', '\\"')) + "'"
    if tok.kind == "num":
        t = tok.text.replace("_", "")
        low = t.lower()
        if low.startswith("0x"):
            return str(int(t.rstrip("lL"), 16))
        if low.startswith("0b"):
            return str(int(t.rstrip("lL"), 2))
        return t.rstrip("lLfFdD")
    return tok.text


def _transform_da(unit, k, md, finding, ruleset, cfg, context=None, **_):
    for action in ("ReplaceAnnotation", "AddAnnotation", "DeduplicateBody"):
        _require_action(ruleset, finding, action)
    if cfg.junit_version != 5:
        raise NotMechanizable(finding, "parameterized tests require JUnit 5")
    if md.has_annotation("ParameterizedTest") or not md.has_annotation("Test"):
        raise NotMechanizable(finding, "method is not a plain @Test")
    if md.annotation_arg("Test"):
        raise NotMechanizable(finding, "@Test has arguments")
    if md.params_text.strip():
        raise NotMechanizable(finding, "method already declares parameters")
    flat = md.statements()
    top = list(md.body)
    pos = {id(s): i for i, s in enumerate(top)}
    groups = duplicate_groups(flat)
    last = len(top) - 1
    chosen = None
    for g in groups:
        if all(id(flat[i]) in pos for i in g) and pos[id(flat[g[-1]])] == last:
            chosen = [pos[id(flat[i])] for i in g]
            break
    if chosen is None:
        raise NotMechanizable(finding, "duplicate assertions do not close the method body at top level")
    segs, start = [], 0
    for p in chosen:
        segs.append(top[start:p + 1])
        start = p + 1
    length = min(len(s) for s in segs)
    if any(len(s) != length for s in segs[1:]):
        raise NotMechanizable(finding, "repeated blocks differ in length")
    prefix = segs[0][:len(segs[0]) - length]
    segs = [segs[0][len(segs[0]) - length:]] + segs[1:]

    names = context.focal_method_names() if context is not None else set()
    if names and any(focal_invocations(s.text, names) for s in prefix):
        raise NotMechanizable(finding, "shared setup invokes the focal class and would run once per row")

    # column discovery: positions whose literal differs between blocks
    forms = [[_assignment_form(s) for s in seg] for seg in segs]
    columns: list[tuple[int, int]] = []
    for i in range(length):
        base_type, base_name, base = forms[0][i]
        for j in range(1, len(segs)):
            _, name, toks = forms[j][i]
            if len(toks) != len(base) or name != base_name:
                raise NotMechanizable(finding, "repeated blocks differ in shape")
        for t in range(len(base)):
            col = [forms[j][i][2][t] for j in range(len(segs))]
            if len({c.text for c in col}) == 1:
                continue
            if not all(is_literal(c) for c in col):
                raise NotMechanizable(finding, "repeated blocks differ in non-literal code")
            columns.append((i, t))
    if not columns:
        raise NotMechanizable(finding, "duplicates are identical; nothing to parameterize")

    taken = _used_names(md.text)
    params, cells = [], [[] for _ in segs]
    edits = []
    seg0 = segs[0]
    drop = set()
    counter = 0
    for i, t in columns:
        col = [forms[j][i][2][t] for j in range(len(segs))]
        jtype = _csv_type(col)
        if jtype is None:
            raise NotMechanizable(finding, "parameter values of mixed or unsupported type")
        decl_type, var, toks = forms[0][i]
        whole_rhs = var is not None and len(toks) == 4 and t == 2 and toks[3].text == ";"
        if whole_rhs and decl_type is not None and sum(1 for c in columns if c[0] == i) == 1:
            pname = var
            ptype = decl_type.replace("final", "").strip()
            drop.add(i)
        else:
            counter += 1
            pname = f"value{counter}"
            while pname in taken:
                counter += 1
                pname = f"value{counter}"
            ptype = jtype
            tok = toks[t]
            base = seg0[i].span[0]
            edits.append((base + tok.start, base + tok.end, pname))
        taken.add(pname)
        params.append(f"{ptype} {pname}")
        for j in range(len(segs)):
            cells[j].append(_csv_cell(forms[j][i][2][t]))
    for i in sorted(drop):
        idx = top.index(seg0[i])
        edits.append(_removal_edit(md, top, idx))
    # everything after the first block goes
    edits.append((seg0[-1].span[1], top[-1].span[1], ""))
    # annotations and parameters
    ann_idx = next(i for i, (a, _) in enumerate(md.annotations) if a == "Test")
    a0, a1 = md.annotation_spans[ann_idx]
    ind = line_indent(md.text, a0)
    rows = ['"' + ", ".join(r) + '"' for r in cells]  # cells are already Java-escaped
    csv = "@CsvSource({\n" + "".join(f"{ind}    {r},\n" for r in rows[:-1]) + f"{ind}    {rows[-1]}\n{ind}}})"
    edits.append((a0, a1, "@ParameterizedTest\n" + ind + csv))
    p0, p1 = md.params_span
    edits.append((p0 + 1, p1, ", ".join(params)))
    new = _reparse(md, apply_edits(md.text, edits), cfg.junit_version)
    return _replace(unit, k, [new], list(PARAMETERIZED_IMPORTS))


# --------------------------------------------------------------------------
# ETa: split by focal method
# --------------------------------------------------------------------------

def _rename(md: MethodDecl, new_name: str) -> list[tuple[int, int, str]]:
    p = md.params_span[0]
    m = mask(md.text)
    j = p - 1
    while j >= 0 and m[j].isspace():
        j -= 1
    end = j + 1
    while j >= 0 and (m[j].isalnum() or m[j] in "_$"):
        j -= 1
    return [(j + 1, end, new_name)]


def split_groups(md: MethodDecl, names: set[str]):
    """(prefix statements, [(focal name, statements)]) or a reason string."""
    top = list(md.body)
    calls = [sorted(set(focal_invocations(s.text, names))) for s in top]
    i = 0
    while i < len(top) and not calls[i]:
        i += 1
    prefix = top[:i]
    groups: list[tuple[str, list[Statement]]] = []
    for s, c in zip(top[i:], calls[i:]):
        if len(c) > 1:
            return f"statement invokes several focal methods: {collapse_ws(s.text)[:60]}"
        if c and (not groups or groups[-1][0] != c[0]):
            if any(g[0] == c[0] for g in groups):
                return f"calls to {c[0]} are interleaved with other focal calls"
            groups.append((c[0], [s]))
        else:
            groups[-1][1].append(s)
    if len(groups) < 2:
        return "fewer than two focal call groups"
    # locals flow between groups
    for gi, (_, stmts) in enumerate(groups):
        declared = _declared_names(stmts)
        for _, later in groups[gi + 1:]:
            used = set().union(*(_used_names(s.text) for s in later))
            if declared & used:
                return f"group shares local variable(s) {sorted(declared & used)}"
    # side-effecting focal calls make later groups state dependent
    for gi, (_, stmts) in enumerate(groups):
        receivers = set()
        for s in stmts:
            if s.kind == "call":
                for mt in re.finditer(r"(" + IDENT + r")\s*\.\s*(" + IDENT + r")\s*\(", mask(s.text)):
                    if mt.group(2) in names:
                        receivers.add(mt.group(1))
        for _, later in groups[gi + 1:]:
            used = set().union(*(_used_names(s.text) for s in later))
            if receivers & used:
                return f"later checks depend on state changed through {sorted(receivers & used)}"
    for name, stmts in groups:
        if not any(s.kind == "assertion" or s.assertion for s in iter_statements(stmts)):
            return f"group for {name} has no assertion"
    return prefix, groups


def _transform_eta(unit, k, md, finding, ruleset, cfg, context=None, **_):
    step = _require_action(ruleset, finding, "SplitByFocalCall")
    naming = step.params.get("naming", "{test}_{focalMethod}")
    names = context.focal_method_names() if context is not None else set()
    if not names:
        raise NotMechanizable(finding, "no focal class context")
    res = split_groups(md, names)
    if isinstance(res, str):
        raise NotMechanizable(finding, res)
    prefix, groups = res
    top = list(md.body)
    taken = {m.name for m in unit.file.test_methods} | {m.name for m in unit.methods}
    taken |= {mm.method.name for mm in unit.file.members if mm.method is not None}
    taken.discard(md.name)
    lead = md.text[:md.header_start]
    head_ind = line_indent(md.text, md.header_start)
    out = []
    for gi, (focal, stmts) in enumerate(groups):
        keep = {id(s) for s in prefix} | {id(s) for s in stmts}
        edits = []
        for idx, s in enumerate(top):
            if id(s) not in keep:
                edits.append(_removal_edit(md, top, idx))
        name = naming.format(test=md.name, focalMethod=focal)
        base, n = name, 2
        while name in taken:
            name, n = f"{base}{n}", n + 1
        taken.add(name)
        edits += _rename(md, name)
        text = apply_edits(md.text, edits)
        if gi > 0:
            text = "\n\n" + head_ind + text[md.header_start:]
        else:
            text = lead + text[md.header_start:]
        out.append(parse_method(text, md.span, cfg.junit_version))
    return _replace(unit, k, out)


# --------------------------------------------------------------------------
# Removal
# --------------------------------------------------------------------------

def _transform_remove(unit, k, md, finding, ruleset, cfg, **_):
    _require_action(ruleset, finding, "RemoveTest")
    methods = [m for i, m in enumerate(unit.methods) if i != k]
    return unit.with_methods(methods)


_TRANSFORMS = {
    SmellType.AR: _transform_ar,
    SmellType.MNT: _transform_mnt,
    SmellType.ECT: _transform_ect,
    SmellType.RA: _transform_ra,
    SmellType.DA: _transform_da,
    SmellType.ETa: _transform_eta,
    SmellType.ET: _transform_remove,
    SmellType.UT: _transform_remove,
    SmellType.IT: _transform_remove,
}


def apply_deterministic(unit: TestUnit, finding: SmellFinding, ruleset: RuleSet | None = None,
                        config: DetectionConfig | None = None, *, context: TestContext | None = None,
                        wrap_throws: bool = False) -> TestUnit:
    """Apply the template transform for ``finding`` to its method in ``unit``."""
    ruleset = ruleset or default_ruleset()
    config = config or DetectionConfig()
    fn = _TRANSFORMS.get(finding.smell)
    if fn is None:
        raise NotMechanizable(finding, "no safe template; model backend only")
    k = _locate(unit, finding)
    md = unit.methods[k]
    try:
        return fn(unit, k, md, finding, ruleset, config, context=context, wrap_throws=wrap_throws)
    except ParseError as exc:
        raise NotMechanizable(finding, f"rewritten method does not parse ({exc})") from None
