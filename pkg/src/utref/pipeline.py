"""End-to-end driver: scan, split, detect, refactor, merge, write, report."""

from __future__ import annotations

import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .engine import DEFAULT_BUDGET, refactor_unit
from .errors import HookFailed, MergeConflict, NotATestFile, ParseError, UtrefError
from .knowledge import RuleSet, default_ruleset
from .model import (
    FocalClass,
    collect_context,
    load_focal_class,
    merge_units,
    pair_focal_class,
    parse_test_file,
    render,
    split_into_units,
)
from .report import RefactorReport, ReportEntry, fingerprint
from .smells import DetectionConfig, detect

log = logging.getLogger(__name__)

TEST_PATTERN = "src/test/**/*.java"
OUTPUT_DIR = ".utref-out"


@dataclass(frozen=True)
class Scope:
    """What to process: a whole project, one file, or one test method."""

    kind: str  # project | file | test
    root: Path
    files: tuple[str, ...] = ()  # paths relative to root; empty means scan
    class_name: str | None = None
    method: str | None = None


def find_root(path: Path) -> Path:
    """Project root for a source file: the directory holding its ``src`` folder."""
    path = path.resolve()
    parts = path.parts
    for k in range(len(parts) - 1, 0, -1):
        if parts[k] == "src":
            return Path(*parts[:k])
    return path.parent


def resolve_scope(target, scope: str | None = None) -> Scope:
    target = Path(target)
    if not target.exists():
        raise FileNotFoundError(f"no such file or directory: {target}")
    choice = scope or ("project" if target.is_dir() else "file")
    if choice.startswith("test:"):
        sel = choice[5:]
        if "#" not in sel:
            raise ValueError("test scope must look like test:<Class#method>")
        cls, method = sel.split("#", 1)
        if target.is_dir():
            return Scope("test", target.resolve(), (), cls, method)
        root = find_root(target)
        return Scope("test", root, (target.resolve().relative_to(root).as_posix(),), cls, method)
    if choice == "project":
        root = target.resolve() if target.is_dir() else find_root(target)
        return Scope("project", root)
    if choice == "file":
        if target.is_dir():
            raise ValueError("file scope needs a .java file")
        root = find_root(target)
        return Scope("file", root, (target.resolve().relative_to(root).as_posix(),))
    raise ValueError(f"unknown scope {choice!r}")


def _candidate_files(scope: Scope) -> list[str]:
    if scope.files:
        return list(scope.files)
    files = sorted(p.relative_to(scope.root).as_posix() for p in scope.root.glob(TEST_PATTERN) if p.is_file())
    if not files:
        files = sorted(p.relative_to(scope.root).as_posix() for p in scope.root.rglob("*.java")
                       if p.is_file() and OUTPUT_DIR not in p.relative_to(scope.root).parts)
    return files


@dataclass
class FileResult:
    file: str
    entries: list[ReportEntry] = field(default_factory=list)
    findings: list = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    output: str | None = None
    original: str | None = None
    transcript: list[dict] = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return self.output is not None and self.output != self.original


class _FocalCache:
    def __init__(self, root: Path):
        self.root = root
        self._cache: dict[str, FocalClass | None] = {}

    def get(self, tf) -> FocalClass | None:
        path = pair_focal_class(tf, self.root)
        if path is None:
            return None
        key = str(path)
        if key not in self._cache:
            self._cache[key] = load_focal_class(path)
        return self._cache[key]


def _load(scope: Scope, rel: str, config: DetectionConfig, res: FileResult):
    try:
        text = (scope.root / rel).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        res.errors.append({"file": rel, "method": None, "error": f"unreadable: {exc}"})
        return None
    res.original = text
    try:
        return parse_test_file(text, rel, config.junit_version)
    except NotATestFile:
        res.skipped.append({"file": rel, "reason": "no @Test method"})
    except ParseError as exc:
        res.errors.append({"file": rel, "method": None, "error": f"parse error: {exc}"})
    return None


def _select(scope: Scope, tf, units, res: FileResult):
    if scope.kind != "test":
        return units
    if tf.class_name != scope.class_name:
        return []
    chosen = [u for u in units if u.method.name == scope.method]
    if not chosen:
        res.errors.append({"file": tf.path, "method": scope.method,
                           "error": f"no test method {scope.method!r} in {tf.class_name}"})
    return chosen


def detect_file(scope: Scope, rel: str, config: DetectionConfig, focal: _FocalCache) -> FileResult:
    res = FileResult(rel)
    tf = _load(scope, rel, config, res)
    if tf is None:
        return res
    fc = focal.get(tf)
    for unit in _select(scope, tf, split_into_units(tf), res):
        ctx = collect_context(unit, fc)
        res.findings += detect(unit, ctx, config)
    return res


def _action(outcome, unit) -> str:
    if outcome.removed:
        return "removed"
    if len(outcome.new_methods) > 1:
        return f"split({len(outcome.new_methods)})"
    if render(outcome.unit) != render(unit):
        return "rewritten"
    return "unchanged"


def refactor_file(scope: Scope, rel: str, config: DetectionConfig, ruleset: RuleSet, focal: _FocalCache,
                  backend: str, model, budget: int, wrap_throws: bool = False) -> FileResult:
    res = FileResult(rel)
    tf = _load(scope, rel, config, res)
    if tf is None:
        return res
    fc = focal.get(tf)
    units = split_into_units(tf)
    selected = {id(u) for u in _select(scope, tf, units, res)}
    new_units = []
    for unit in units:
        if id(unit) not in selected:
            new_units.append(unit)
            continue
        ctx = collect_context(unit, fc)
        before = detect(unit, ctx, config)
        res.findings += before
        codes = tuple(f.smell.value for f in before)
        if not before:
            res.entries.append(ReportEntry(rel, unit.method.name, (), (), "none", 0, (), "unchanged"))
            new_units.append(unit)
            continue
        try:
            out = refactor_unit(unit, ctx, before, ruleset, backend, budget, model=model, config=config,
                                wrap_throws=wrap_throws)
        except UtrefError as exc:
            res.errors.append({"file": rel, "method": unit.method.name, "error": f"{type(exc).__name__}: {exc}"})
            res.entries.append(ReportEntry(rel, unit.method.name, codes, (), backend, 0, codes, "unchanged"))
            new_units.append(unit)
            continue
        for rec in out.transcript:
            res.transcript.append({"file": rel, "method": unit.method.name, **rec})
        res.entries.append(ReportEntry(
            rel, unit.method.name, codes, out.plan.steps if out.plan else (), out.backend, out.rounds_used,
            tuple(f.smell.value for f in out.residual), _action(out, unit),
        ))
        new_units.append(out.unit)
    try:
        merged = merge_units(new_units, tf, config.junit_version)
        res.output = render(merged)
    except (MergeConflict, ParseError) as exc:
        res.errors.append({"file": rel, "method": None, "error": f"merge failed: {exc}"})
        res.output = None
    return res


def _run_files(fn, files, jobs: int):
    if jobs <= 1 or len(files) <= 1:
        return [fn(f) for f in files]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, files))


def detect_only(target, scope: str | None = None, config: DetectionConfig | None = None, jobs: int = 1) -> dict:
    """Detection pass without mutation; JSON-ready document."""
    config = config or DetectionConfig()
    sc = resolve_scope(target, scope)
    focal = _FocalCache(sc.root)
    results = _run_files(lambda rel: detect_file(sc, rel, config, focal), _candidate_files(sc), jobs)
    findings, errors, skipped = [], [], []
    for r in results:
        findings += [f.to_dict() for f in r.findings]
        errors += r.errors
        skipped += r.skipped
    findings.sort(key=lambda d: (d["file"], d["index"], d["method"]))
    return {"schema_version": 1, "findings": findings, "errors": errors, "skipped": skipped}


def compile_hook(output_dir, command_template: str, files) -> dict:
    """Run the user's command once per rewritten file; returns the CPR record."""
    results = {}
    failures = []
    for rel in files:
        cmd = command_template.replace("{file}", shlex.quote(str(rel)))
        proc = subprocess.run(cmd, shell=True, cwd=str(output_dir), capture_output=True)
        results[str(rel)] = proc.returncode
        if proc.returncode != 0:
            failures.append(str(HookFailed(str(rel), proc.returncode)))
    total = len(results)
    passed = sum(1 for c in results.values() if c == 0)
    return {"command": command_template, "total": total, "passed": passed,
            "rate": passed / total if total else None, "results": results, "failures": failures}


@dataclass
class RunResult:
    report: RefactorReport
    outputs: dict[str, str]
    output_dir: Path
    transcript: list[dict]


def run(target, scope: str | None = None, *, config: DetectionConfig | None = None,
        ruleset: RuleSet | None = None, backend: str = "deterministic", model=None,
        budget: int = DEFAULT_BUDGET, jobs: int = 1, in_place: bool = False, output_dir=None,
        compile_cmd: str | None = None, write: bool = True, wrap_throws: bool = False,
        model_settings: dict | None = None) -> RunResult:
    """Refactor every selected test and write the results.

    Without ``in_place`` outputs go to ``<root>/.utref-out`` mirroring the
    source tree. Per-file problems are recorded in the report.
    """
    config = config or DetectionConfig()
    ruleset = ruleset or default_ruleset()
    sc = resolve_scope(target, scope)
    focal = _FocalCache(sc.root)
    files = _candidate_files(sc)
    results = _run_files(
        lambda rel: refactor_file(sc, rel, config, ruleset, focal, backend, model, budget, wrap_throws),
        files, jobs)

    report = RefactorReport()
    outputs: dict[str, str] = {}
    transcript: list[dict] = []
    for r in results:
        report.entries += r.entries
        report.errors += r.errors
        report.skipped += r.skipped
        transcript += r.transcript
        if r.output is not None and r.original is not None:
            outputs[r.file] = r.output
    if sc.kind == "test" and not report.entries and not report.errors:
        report.errors.append({"file": ",".join(files) or str(target), "method": sc.method,
                              "error": f"test {sc.class_name}#{sc.method} not found"})
    report.sort()
    report.fingerprint = fingerprint(
        tool="utref", version=__version__, detection=config.to_dict(), rules=ruleset.fingerprint(),
        backend=backend, budget=budget, model=model_settings or {}, wrap_throws=wrap_throws,
    )

    out_dir = sc.root if in_place else (Path(output_dir) if output_dir else sc.root / OUTPUT_DIR)
    if write:
        originals = {r.file: r.original for r in results}
        for rel, text in outputs.items():
            dest = out_dir / rel
            if in_place and text == originals.get(rel):
                continue
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text, encoding="utf-8")
        if compile_cmd:
            changed = sorted(rel for rel, text in outputs.items() if text != originals.get(rel))
            report.cpr = compile_hook(out_dir, compile_cmd, changed)
    return RunResult(report, outputs, out_dir, transcript)
