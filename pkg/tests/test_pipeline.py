import json
import subprocess
import sys

import pytest

from utref.backend import CleanOracleBackend, ScriptedBackend
from utref.cli import main
from utref.engine import build_prompt
from utref.model import collect_context, load_focal_class, parse_test_file, split_into_units
from utref.pipeline import OUTPUT_DIR, detect_only, resolve_scope, run
from utref.smells import detect

from conftest import CORPUS, FOCAL_DIR, MANIFEST

MIXED = "src/test/java/com/example/mixed/CalculatorTest.java"
CLEAN = "src/test/java/com/example/ar/clean/CalculatorTest.java"


def manifest_pairs():
    return {(f, m, s) for f, methods in MANIFEST.items() for m, smells in methods.items() for s in smells}


class TestScope:
    def test_directory_is_project(self):
        sc = resolve_scope(CORPUS)
        assert sc.kind == "project" and sc.root == CORPUS.resolve()

    def test_file_root_is_above_src(self):
        sc = resolve_scope(CORPUS / MIXED)
        assert sc.kind == "file" and sc.root == CORPUS.resolve() and sc.files == (MIXED,)

    def test_test_scope(self):
        sc = resolve_scope(CORPUS, "test:CalculatorTest#divisionCases")
        assert (sc.kind, sc.class_name, sc.method) == ("test", "CalculatorTest", "divisionCases")

    @pytest.mark.parametrize("scope", ["test:NoHash", "module"])
    def test_bad_scope(self, scope):
        with pytest.raises(ValueError):
            resolve_scope(CORPUS, scope)

    def test_missing_target(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            resolve_scope(tmp_path / "nope")


class TestDetect:
    def test_matches_manifest(self):
        doc = detect_only(CORPUS)
        got = {(f["file"], f["method"], f["smell"]) for f in doc["findings"]}
        assert got == manifest_pairs()
        assert doc["errors"] == []

    def test_parallel_is_identical(self):
        assert detect_only(CORPUS, jobs=4) == detect_only(CORPUS)

    def test_single_test_scope(self):
        doc = detect_only(CORPUS / MIXED, "test:CalculatorTest#legacyBehaviour")
        assert sorted(f["smell"] for f in doc["findings"]) == ["IT", "MNT"]

    def test_unparseable_file_is_a_per_file_error(self, corpus_copy):
        bad = corpus_copy / "src/test/java/com/example/BrokenTest.java"
        bad.write_text("class BrokenTest {\n    @Test\n    void t() {\n")
        doc = detect_only(corpus_copy)
        assert [e["file"] for e in doc["errors"]] == ["src/test/java/com/example/BrokenTest.java"]
        assert len(doc["findings"]) == len(manifest_pairs())

    def test_non_test_file_is_skipped(self, corpus_copy):
        (corpus_copy / "src/test/java/com/example/Helper.java").write_text("class Helper {\n}\n")
        doc = detect_only(corpus_copy)
        assert {"file": "src/test/java/com/example/Helper.java", "reason": "no @Test method"} in doc["skipped"]


class TestRun:
    def test_default_writes_mirror_tree(self, corpus_copy):
        original = (corpus_copy / MIXED).read_text()
        res = run(corpus_copy)
        assert (corpus_copy / MIXED).read_text() == original
        assert res.output_dir == corpus_copy / OUTPUT_DIR
        assert (res.output_dir / MIXED).read_text() != original
        assert not list(res.output_dir.rglob("*.json"))

    def test_in_place(self, corpus_copy):
        before = (corpus_copy / MIXED).read_text()
        clean_before = (corpus_copy / CLEAN).stat().st_mtime_ns
        run(corpus_copy, in_place=True)
        assert (corpus_copy / MIXED).read_text() != before
        assert (corpus_copy / CLEAN).stat().st_mtime_ns == clean_before
        assert not (corpus_copy / OUTPUT_DIR).exists()

    def test_clean_file_unchanged(self):
        res = run(CORPUS / CLEAN, write=False)
        assert res.outputs[CLEAN] == (CORPUS / CLEAN).read_text()
        assert {e.action for e in res.report.entries} == {"unchanged"}

    def test_report_actions(self):
        res = run(CORPUS, write=False)
        actions = {(e.file.split("/")[-2], e.method): e.action for e in res.report.entries}
        assert actions[("et", "pending")] == "removed"
        assert actions[("eta", "addAndSubtract")] == "split(2)"
        assert actions[("ar", "addWithZero")] == "rewritten"
        assert actions[("clean", "addOnly")] == "unchanged"

    def test_deterministic_reports(self):
        a = run(CORPUS, write=False).report
        b = run(CORPUS, write=False, jobs=4).report
        assert a.to_json() == b.to_json()

    def test_model_backend_is_deterministic_with_scripted_replies(self):
        tf = parse_test_file((CORPUS / MIXED).read_text(), MIXED)
        unit = next(u for u in split_into_units(tf) if u.method.name == "divisionCases")
        ctx = collect_context(unit, load_focal_class(FOCAL_DIR / "Calculator.java"))
        fix = CleanOracleBackend().complete(build_prompt(unit, ctx, detect(unit, ctx))).text

        def once():
            return run(CORPUS / MIXED, "test:CalculatorTest#divisionCases", backend="model",
                       model=ScriptedBackend([fix]), write=False)

        a, b = once(), once()
        assert a.report.to_json() == b.report.to_json()
        assert a.outputs == b.outputs and a.transcript == b.transcript
        assert [(e.backend, e.smells_after) for e in a.report.entries] == [("model", ())]

    def test_fingerprint_tracks_settings(self):
        a = run(CORPUS / CLEAN, write=False).report.fingerprint
        b = run(CORPUS / CLEAN, write=False, budget=5).report.fingerprint
        assert a != b

    def test_missing_method_is_an_error(self):
        res = run(CORPUS / MIXED, "test:CalculatorTest#nope", write=False)
        assert res.report.exit_code == 1
        assert "nope" in res.report.errors[0]["error"]

    def test_test_scope_touches_only_that_method(self):
        res = run(CORPUS / MIXED, "test:CalculatorTest#divisionCases", write=False)
        assert [e.method for e in res.report.entries] == ["divisionCases"]
        out = res.outputs[MIXED]
        assert "void legacyBehaviour()" in out and "@Disabled" in out

    def test_idempotent(self, corpus_copy):
        run(corpus_copy, in_place=True)
        snapshot = {p: p.read_text() for p in corpus_copy.rglob("*.java")}
        second = run(corpus_copy, in_place=True)
        assert {p: p.read_text() for p in corpus_copy.rglob("*.java")} == snapshot
        assert all(e.action == "unchanged" for e in second.report.entries)

    def test_compile_hook(self, corpus_copy):
        res = run(corpus_copy, compile_cmd="test -s {file}")
        cpr = res.report.cpr
        assert cpr["total"] == len([r for r, t in res.outputs.items()
                                    if t != (corpus_copy / r).read_text()])
        assert cpr["passed"] == cpr["total"]

    def test_compile_hook_failures_are_recorded(self, corpus_copy):
        res = run(corpus_copy / MIXED, compile_cmd="exit 3")
        assert res.report.cpr == {"command": "exit 3", "total": 1, "passed": 0, "rate": 0.0,
                                  "results": {MIXED: 3}, "failures": [res.report.cpr["failures"][0]]}
        assert "3" in res.report.cpr["failures"][0]
        assert res.report.exit_code == 0


class TestCli:
    def test_detect_json_stdout(self, capsys):
        assert main(["detect", str(CORPUS), "--json", "-"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert {(f["file"], f["method"], f["smell"]) for f in doc["findings"]} == manifest_pairs()

    def test_detect_summary_and_file(self, tmp_path, capsys):
        out = tmp_path / "f.json"
        assert main(["detect", str(CORPUS), "--json", str(out)]) == 0
        assert f"{len(manifest_pairs())} finding(s)" in capsys.readouterr().out
        assert json.loads(out.read_text())["schema_version"] == 1

    def test_detect_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"detection": {"junit_version": 5}}))
        assert main(["detect", str(CORPUS / CLEAN), "--config", str(cfg), "--json", "-"]) == 0
        assert json.loads(capsys.readouterr().out)["findings"] == []

    def test_refactor_writes_reports(self, corpus_copy, capsys):
        assert main(["refactor", str(corpus_copy)]) == 0
        out = capsys.readouterr().out
        assert "smells" in out and "->" in out
        assert (corpus_copy / OUTPUT_DIR / "utref-report.json").is_file()
        assert (corpus_copy / OUTPUT_DIR / "utref-report.md").is_file()

    def test_refactor_report_path(self, corpus_copy, tmp_path):
        assert main(["refactor", str(corpus_copy), "--report", str(tmp_path / "r.md")]) == 0
        assert (tmp_path / "r.md").read_text().startswith("# Test refactoring report")

    def test_missing_method_exit_code(self, corpus_copy, capsys):
        assert main(["refactor", str(corpus_copy / MIXED), "--scope", "test:CalculatorTest#nope"]) == 1
        assert "nope" in capsys.readouterr().err

    def test_per_file_error_exit_code(self, corpus_copy, capsys):
        (corpus_copy / "src/test/java/com/example/BrokenTest.java").write_text("class B {\n    @Test\n")
        assert main(["detect", str(corpus_copy), "--json", "-"]) == 1
        assert main(["refactor", str(corpus_copy)]) == 1
        assert "BrokenTest" in capsys.readouterr().err

    def test_fatal_errors_exit_two(self, tmp_path, capsys):
        assert main(["detect", str(tmp_path / "nope")]) == 2
        assert main(["refactor", str(CORPUS), "--scope", "bogus"]) == 2

    def test_model_backend_without_endpoint(self, corpus_copy, monkeypatch, capsys):
        for var in ("UTREF_ENDPOINT", "UTREF_MODEL", "UTREF_API_KEY"):
            monkeypatch.delenv(var, raising=False)
        assert main(["refactor", str(corpus_copy), "--backend", "model"]) == 2
        assert main(["refactor", str(corpus_copy), "--backend", "auto"]) == 0

    def test_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "utref.cli", "detect", str(CORPUS / CLEAN)],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "0 finding(s)" in proc.stdout

    def test_key_only_from_environment(self, monkeypatch):
        from utref.cli import _model_for
        monkeypatch.setenv("UTREF_ENDPOINT", "http://127.0.0.1:9/v1")
        monkeypatch.setenv("UTREF_MODEL", "m")
        monkeypatch.setenv("UTREF_API_KEY", "env-key")
        client, public = _model_for("model", {"api_key": "file-key", "max_retries": 1})
        assert client.config.api_key == "env-key" and client.config.max_retries == 1
        assert "env-key" not in json.dumps(public)
