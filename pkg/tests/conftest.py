import json
import shutil
import textwrap
from collections import Counter
from pathlib import Path

import pytest

from utref.javasrc import mask, split_top_level
from utref.model import collect_context, focal_invocations, load_focal_class, parse_test_file, split_into_units

CORPUS = Path(__file__).parent / "fixtures" / "corpus"
MANIFEST = json.loads((CORPUS / "manifest.json").read_text())
FOCAL_DIR = CORPUS / "src" / "main" / "java" / "com" / "example"

HEADER = """\
package com.example.t;

import com.example.Calculator;
import org.junit.jupiter.api.Test;

import static org.junit.jupiter.api.Assertions.*;

"""


def java_class(body: str, name: str = "CalculatorTest", header: str = HEADER) -> str:
    """Wrap indented-free member source in a JUnit 5 test class."""
    members = textwrap.indent(textwrap.dedent(body).strip("\n"), "    ")
    return f"{header}class {name} {{\n{members}\n}}\n"


def units_of(src: str, junit: int = 5, path: str = "T.java"):
    tf = parse_test_file(src, path, junit)
    return tf, split_into_units(tf)


def unit_of(body: str, method: str | None = None, *, focal: str | None = "Calculator", junit: int = 5):
    """Single unit plus its context for a snippet of test members."""
    header = HEADER if junit == 5 else HEADER.replace(
        "org.junit.jupiter.api.Test", "org.junit.Test").replace(
        "org.junit.jupiter.api.Assertions", "org.junit.Assert")
    _, units = units_of(java_class(body, header=header), junit)
    unit = units[0] if method is None else next(u for u in units if u.method.name == method)
    fc = load_focal_class(FOCAL_DIR / f"{focal}.java") if focal else None
    return unit, collect_context(unit, fc)


@pytest.fixture
def corpus_copy(tmp_path):
    dest = tmp_path / "corpus"
    shutil.copytree(CORPUS, dest)
    return dest


def csv_rows(md) -> int:
    """Rows of a @CsvSource; 1 for a plain test."""
    arg = md.annotation_arg("CsvSource")
    if arg is None:
        return 1
    inner = arg.strip()
    if inner.startswith("{"):
        inner = inner[1:-1]
    m = mask(inner)
    return len(split_top_level(m, 0, len(m)))


def invocation_multiset(methods, names) -> Counter:
    """Focal invocations executed by ``methods``, counting each parameter row."""
    total = Counter()
    for md in methods:
        for name, n in Counter(focal_invocations(md.body_text, names)).items():
            total[name] += n * csv_rows(md)
    return total


# acceptance criterion -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[name] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
