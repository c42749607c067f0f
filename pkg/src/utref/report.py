"""Refactoring report: per-test entries, totals, JSON and markdown forms."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .smells import FULL_NAMES, SmellType, format_rate, reduction_rate

SCHEMA_VERSION = 1
ENTRY_COLUMNS = ("File", "Method", "Smells before", "Plan", "Backend", "Rounds", "Smells after", "Action")


@dataclass(frozen=True)
class ReportEntry:
    file: str
    method: str
    smells_before: tuple[str, ...]
    plan: tuple[str, ...]
    backend: str
    rounds: int
    smells_after: tuple[str, ...]
    action: str  # rewritten | split(n) | removed | unchanged

    def to_dict(self) -> dict:
        d = asdict(self)
        d["smells_before"] = list(self.smells_before)
        d["plan"] = list(self.plan)
        d["smells_after"] = list(self.smells_after)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEntry":
        return cls(d["file"], d["method"], tuple(d["smells_before"]), tuple(d["plan"]), d["backend"],
                   int(d["rounds"]), tuple(d["smells_after"]), d["action"])


@dataclass
class RefactorReport:
    entries: list[ReportEntry] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    fingerprint: str = ""
    cpr: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def sort(self) -> "RefactorReport":
        self.entries.sort(key=lambda e: (e.file, e.method))
        self.skipped.sort(key=lambda s: s["file"])
        self.errors.sort(key=lambda e: (e.get("file", ""), e.get("method") or ""))
        return self

    @property
    def totals(self) -> dict:
        before = sum(len(e.smells_before) for e in self.entries)
        after = sum(len(e.smells_after) for e in self.entries)
        rate = reduction_rate(before, after) if before else None
        return {
            "tests_touched": sum(1 for e in self.entries if e.action != "unchanged"),
            "smells_before": before,
            "smells_after": after,
            "reduction_rate": rate,
            "reduction_rate_display": format_rate(rate) if rate is not None else "n/a",
        }

    def per_smell(self) -> dict[str, tuple[int, int]]:
        out = {s.value: [0, 0] for s in SmellType}
        for e in self.entries:
            for s in e.smells_before:
                out[s][0] += 1
            for s in e.smells_after:
                out[s][1] += 1
        return {k: (v[0], v[1]) for k, v in out.items()}

    @property
    def exit_code(self) -> int:
        return 1 if self.errors else 0

    def to_dict(self) -> dict:
        d = {
            "schema_version": self.schema_version,
            "fingerprint": self.fingerprint,
            "totals": self.totals,
            "per_smell": {k: {"before": b, "after": a} for k, (b, a) in self.per_smell().items()},
            "entries": [e.to_dict() for e in self.entries],
            "skipped": list(self.skipped),
            "errors": list(self.errors),
        }
        if self.cpr is not None:
            d["cpr"] = self.cpr
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RefactorReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(
            entries=[ReportEntry.from_dict(e) for e in d.get("entries", [])],
            skipped=list(d.get("skipped", [])),
            errors=list(d.get("errors", [])),
            fingerprint=d.get("fingerprint", ""),
            cpr=d.get("cpr"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_markdown(self) -> str:
        t = self.totals
        lines = ["# Test refactoring report", ""]
        lines += [
            f"- Schema version: {self.schema_version}",
            f"- Fingerprint: `{self.fingerprint}`",
            f"- Tests touched: {t['tests_touched']}",
            f"- Smells before: {t['smells_before']}",
            f"- Smells after: {t['smells_after']}",
            f"- Reduction rate: {t['reduction_rate_display']}",
        ]
        if self.cpr is not None:
            lines.append(f"- Compilation pass rate: {format_rate(self.cpr['rate']) if self.cpr['total'] else 'n/a'}"
                         f" ({self.cpr['passed']}/{self.cpr['total']})")
        lines += ["", "## Smells by type", "", "| Smell | Name | Before | After |", "|---|---|---|---|"]
        for code, (b, a) in self.per_smell().items():
            lines.append(f"| {code} | {FULL_NAMES[SmellType(code)]} | {b} | {a} |")
        lines.append(f"| Total | | {t['smells_before']} | {t['smells_after']} |")
        lines += ["", "## Tests", "", "| " + " | ".join(ENTRY_COLUMNS) + " |", "|" + "---|" * len(ENTRY_COLUMNS)]
        for e in self.entries:
            cells = [e.file, e.method, _join(e.smells_before), _join(e.plan), e.backend, str(e.rounds),
                     _join(e.smells_after), e.action]
            lines.append("| " + " | ".join(_esc(c) for c in cells) + " |")
        if self.skipped:
            lines += ["", "## Skipped files", ""]
            lines += [f"- `{s['file']}`: {s['reason']}" for s in self.skipped]
        if self.errors:
            lines += ["", "## Errors", ""]
            lines += [f"- `{e['file']}`" + (f" `{e['method']}`" if e.get("method") else "") + f": {e['error']}"
                      for e in self.errors]
        return "\n".join(lines) + "\n"

    def write(self, path, fmt: str | None = None) -> Path:
        p = Path(path)
        fmt = fmt or ("markdown" if p.suffix.lower() in (".md", ".markdown") else "json")
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(self.to_markdown() if fmt == "markdown" else self.to_json(), encoding="utf-8")
        return p


def _join(items) -> str:
    return ", ".join(items) if items else "-"


def _split(cell: str) -> tuple[str, ...]:
    return () if cell == "-" else tuple(x.strip() for x in cell.split(","))


def _esc(cell: str) -> str:
    return cell.replace("\\", "\\\\").replace("|", "\\|")


def _split_row(line: str) -> list[str]:
    cells, cur, i = [], [], 0
    body = line.strip()[1:-1] if line.strip().endswith("|") else line.strip()[1:]
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            cur.append(body[i + 1])
            i += 2
            continue
        if c == "|":
            cells.append("".join(cur).strip())
            cur = []
        else:
            cur.append(c)
        i += 1
    cells.append("".join(cur).strip())
    return cells


def entries_from_markdown(text: str) -> list[ReportEntry]:
    """Parse the entries table of a markdown report back into entries."""
    lines = text.split("\n")
    header = "| " + " | ".join(ENTRY_COLUMNS) + " |"
    try:
        k = lines.index(header)
    except ValueError:
        raise ValueError("no entries table found") from None
    out = []
    for ln in lines[k + 2:]:
        if not ln.startswith("|"):
            break
        f, m, before, plan, backend, rounds, after, action = _split_row(ln)
        out.append(ReportEntry(f, m, _split(before), _split(plan), backend, int(rounds), _split(after), action))
    return out


def fingerprint(**parts) -> str:
    """Stable hash of the tool version and every setting that shapes output."""
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode("utf-8")).hexdigest()
