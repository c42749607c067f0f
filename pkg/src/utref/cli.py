"""Command-line entry point: ``utref detect`` and ``utref refactor``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .backend import BackendConfig, ChatClient
from .engine import DEFAULT_BUDGET, write_transcript
from .errors import BackendUnavailable, UtrefError
from .knowledge import load_rules
from .pipeline import detect_only, run
from .smells import DetectionConfig, SmellFinding, count_by_smell

log = logging.getLogger("utref")


def _load_config(path):
    if not path:
        return DetectionConfig(), {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return DetectionConfig.from_dict(data.get("detection", data)), data.get("backend", {})


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="utref", description="Detect and refactor JUnit test smells.")
    p.add_argument("--version", action="version", version=f"utref {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="report smells without changing anything")
    d.add_argument("path", help="project directory or test file")
    d.add_argument("--scope", help="project | file | test:<Class#method>")
    d.add_argument("--config", help="JSON configuration file")
    d.add_argument("--json", dest="json_out", metavar="OUT", help="write findings JSON here ('-' for stdout)")
    d.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("refactor", help="refactor smelly tests and write a report")
    r.add_argument("path", help="project directory or test file")
    r.add_argument("--scope", help="project | file | test:<Class#method>")
    r.add_argument("--backend", choices=("deterministic", "model", "auto"), default="deterministic")
    r.add_argument("--rules", metavar="DIR", help="directory of rule files overriding the built-in ones")
    r.add_argument("--max-rounds", type=int, default=DEFAULT_BUDGET)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--in-place", action="store_true", help="rewrite the sources instead of writing to .utref-out")
    r.add_argument("--out", metavar="DIR", help="output directory (default <root>/.utref-out)")
    r.add_argument("--report", metavar="OUT", help="report path; .md for markdown, anything else for JSON")
    r.add_argument("--compile-cmd", metavar="TMPL", help="command run per rewritten file; {file} is substituted")
    r.add_argument("--wrap-throws", action="store_true",
                   help="also wrap bodies of methods declaring throws in assertDoesNotThrow")
    r.add_argument("--config", help="JSON configuration file")
    return p


def _model_for(backend: str, settings: dict):
    if backend == "deterministic":
        return None, None
    # the key comes from the environment only, never from a file that may be shared
    settings = {k: v for k, v in settings.items() if k != "api_key"}
    try:
        cfg = BackendConfig.from_env(**settings)
    except BackendUnavailable:
        if backend == "auto":
            return None, None
        raise
    return ChatClient(cfg), cfg.public_dict()


def cmd_detect(args) -> int:
    config, _ = _load_config(args.config)
    doc = detect_only(args.path, args.scope, config, jobs=args.jobs)
    text = json.dumps(doc, indent=2) + "\n"
    if args.json_out == "-":
        sys.stdout.write(text)
    elif args.json_out:
        Path(args.json_out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.json_out).write_text(text, encoding="utf-8")
    if args.json_out != "-":
        counts = count_by_smell(SmellFinding.from_dict(f) for f in doc["findings"])
        files = len({f["file"] for f in doc["findings"]})
        print(f"{len(doc['findings'])} finding(s) in {files} file(s)")
        for code, n in counts.items():
            if n:
                print(f"  {code:4} {n}")
        for e in doc["errors"]:
            print(f"error: {e['file']}: {e['error']}", file=sys.stderr)
    return 1 if doc["errors"] else 0


def cmd_refactor(args) -> int:
    config, backend_settings = _load_config(args.config)
    ruleset = load_rules(args.rules) if args.rules else None
    model, model_public = _model_for(args.backend, backend_settings)
    result = run(
        args.path, args.scope, config=config, ruleset=ruleset, backend=args.backend, model=model,
        budget=args.max_rounds, jobs=args.jobs, in_place=args.in_place, output_dir=args.out,
        compile_cmd=args.compile_cmd, wrap_throws=args.wrap_throws, model_settings=model_public,
    )
    report = result.report
    if args.report:
        report_path = report.write(args.report)
    else:
        report_path = report.write(result.output_dir / "utref-report.json")
        report.write(result.output_dir / "utref-report.md")
    if result.transcript:
        write_transcript(report_path.with_suffix(".transcript.jsonl"), result.transcript)
    t = report.totals
    print(f"{len(report.entries)} test(s), {t['tests_touched']} touched; "
          f"smells {t['smells_before']} -> {t['smells_after']} ({t['reduction_rate_display']})")
    print(f"report: {report_path}")
    for e in report.errors:
        print(f"error: {e['file']}" + (f" {e['method']}" if e.get("method") else "") + f": {e['error']}",
              file=sys.stderr)
    return report.exit_code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "detect":
            return cmd_detect(args)
        return cmd_refactor(args)
    except (UtrefError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"utref: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
