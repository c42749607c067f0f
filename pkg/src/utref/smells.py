"""Method-level test smell detection.

Thirteen rules, each a pure function of one test method, its shared class
context and the focal-class context. Findings carry evidence as
``(statement index, excerpt)`` pairs where the index is the position in a
pre-order walk of the method body; index ``-1`` denotes the method
declaration itself (used by smells that have no offending statement, such as
an empty body).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .errors import DivisionByEmpty
from .javasrc import IDENT, collapse_ws, mask, tokenize
from .model import (
    MethodDecl,
    Origin,
    Statement,
    TestContext,
    TestUnit,
    focal_invocations,
    iter_statements,
)


class SmellType(str, Enum):
    MG = "MG"
    RO = "RO"
    MNT = "MNT"
    SE = "SE"
    ETa = "ETa"
    DA = "DA"
    CTL = "CTL"
    ECT = "ECT"
    AR = "AR"
    RA = "RA"
    IT = "IT"
    UT = "UT"
    ET = "ET"

    @property
    def full_name(self) -> str:
        return FULL_NAMES[self]

    def __str__(self) -> str:
        return self.value


FULL_NAMES = {
    SmellType.MG: "Mystery Guest",
    SmellType.RO: "Resource Optimism",
    SmellType.MNT: "Magic Number Test",
    SmellType.SE: "Sensitive Equality",
    SmellType.ETa: "Eager Test",
    SmellType.DA: "Duplicate Assert",
    SmellType.CTL: "Conditional Test Logic",
    SmellType.ECT: "Exception Catching Throwing",
    SmellType.AR: "Assertion Roulette",
    SmellType.RA: "Redundant Assertion",
    SmellType.IT: "Ignored Test",
    SmellType.UT: "Unknown Test",
    SmellType.ET: "Empty Test",
}

DEFAULT_RESOURCES = frozenset({
    "File", "FileReader", "FileWriter", "FileInputStream", "FileOutputStream",
    "RandomAccessFile", "Paths", "Socket", "Connection",
})


@dataclass(frozen=True)
class SmellFinding:
    smell: SmellType
    unit_origin: Origin
    evidence: tuple[tuple[int, str], ...]
    count: int = 1

    def to_dict(self) -> dict:
        return {
            "smell": self.smell.value,
            "file": self.unit_origin.path,
            "method": self.unit_origin.method,
            "index": self.unit_origin.index,
            "evidence": [list(e) for e in self.evidence],
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SmellFinding":
        return cls(
            smell=SmellType(d["smell"]),
            unit_origin=Origin(d["file"], d["method"], d["index"]),
            evidence=tuple((int(i), s) for i, s in d["evidence"]),
            count=d.get("count", 1),
        )


@dataclass(frozen=True)
class DetectionConfig:
    magic_number_allowlist: frozenset = frozenset({"0", "1", "-1"})
    resource_class_names: frozenset = DEFAULT_RESOURCES
    eager_threshold: int = 2
    junit_version: int = 5

    def __post_init__(self):
        if self.eager_threshold < 2:
            raise ValueError("eager_threshold must be >= 2")
        if self.junit_version not in (4, 5):
            raise ValueError("junit_version must be 4 or 5")
        for lit in self.magic_number_allowlist:
            if _numeric_value(str(lit)) is None:
                raise ValueError(f"allowlist entry {lit!r} is not numeric")
        object.__setattr__(self, "magic_number_allowlist", frozenset(str(x) for x in self.magic_number_allowlist))
        object.__setattr__(self, "resource_class_names", frozenset(self.resource_class_names))

    @property
    def allowed_values(self) -> set[float]:
        return {_numeric_value(x) for x in self.magic_number_allowlist}

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionConfig":
        kw = {}
        if "magic_number_allowlist" in d:
            kw["magic_number_allowlist"] = frozenset(str(x) for x in d["magic_number_allowlist"])
        if "resource_class_names" in d:
            kw["resource_class_names"] = frozenset(d["resource_class_names"])
        for k in ("eager_threshold", "junit_version"):
            if k in d:
                kw[k] = int(d[k])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "DetectionConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(data.get("detection", data))

    def to_dict(self) -> dict:
        return {
            "magic_number_allowlist": sorted(self.magic_number_allowlist),
            "resource_class_names": sorted(self.resource_class_names),
            "eager_threshold": self.eager_threshold,
            "junit_version": self.junit_version,
        }


def _numeric_value(lit: str) -> float | None:
    t = lit.replace("_", "").strip()
    t = re.sub(r"[lLfFdD]$", "", t) if not t.lower().startswith("0x") else t.rstrip("lL")
    try:
        if t.lower().startswith(("0x", "-0x")):
            return float(int(t, 16))
        if t.lower().startswith(("0b", "-0b")):
            return float(int(t, 2))
        return float(t)
    except ValueError:
        return None


def _normalize_args(args: Sequence[str]) -> tuple[str, ...]:
    """Whitespace outside literals removed, char quotes unified with string quotes."""
    out = []
    for a in args:
        parts = []
        for t in tokenize(a):
            if t.kind == "chr":
                parts.append('"' + t.text[1:-1] + '"')
            else:
                parts.append(t.text)
        out.append("".join(parts))
    return tuple(out)


def _excerpt(text: str, limit: int = 80) -> str:
    s = collapse_ws(text)
    return s if len(s) <= limit else s[: limit - 3] + "..."


# --------------------------------------------------------------------------
# Rules. Each takes (method, flat statements, unit, context, config) and
# returns (evidence list, count) or None.
# --------------------------------------------------------------------------

def _assertions(flat):
    return [(i, s) for i, s in enumerate(flat) if s.kind == "assertion"]


def _rule_ar(md, flat, unit, ctx, cfg):
    asserts = _assertions(flat)
    bare = [(i, s) for i, s in asserts if not s.assertion.has_message]
    if len(asserts) >= 2 and bare:
        return [(i, _excerpt(s.text)) for i, s in bare], len(bare)
    return None


def _rule_ect(md, flat, unit, ctx, cfg):
    ev = [(i, _excerpt(s.text)) for i, s in enumerate(flat)
          if (s.kind == "try_block" and s.has_catch) or s.kind == "throw_stmt"]
    return (ev, len(ev)) if ev else None


def _rule_ctl(md, flat, unit, ctx, cfg):
    ev = [(i, _excerpt(s.text)) for i, s in enumerate(flat) if s.kind in ("conditional", "loop")]
    return (ev, len(ev)) if ev else None


def magic_literals(stmt: Statement, cfg: DetectionConfig) -> list[int]:
    """Indices into ``stmt.assertion.numeric_literals`` that are not allowlisted."""
    allowed = cfg.allowed_values
    return [k for k, (lit, _) in enumerate(stmt.assertion.numeric_literals)
            if _numeric_value(lit) not in allowed]


def _rule_mnt(md, flat, unit, ctx, cfg):
    ev, n = [], 0
    for i, s in _assertions(flat):
        bad = magic_literals(s, cfg)
        if bad:
            ev.append((i, _excerpt(s.text)))
            n += len(bad)
    return (ev, n) if ev else None


def duplicate_groups(flat) -> list[list[int]]:
    groups: dict[tuple, list[int]] = {}
    for i, s in _assertions(flat):
        args = (s.text,) if s.assertion.chained else s.assertion.checked_args
        key = (s.assertion.method, _normalize_args(args))
        groups.setdefault(key, []).append(i)
    return [g for g in groups.values() if len(g) >= 2]


def _rule_da(md, flat, unit, ctx, cfg):
    groups = duplicate_groups(flat)
    if not groups:
        return None
    idx = sorted(i for g in groups for i in g)
    return [(i, _excerpt(flat[i].text)) for i in idx], sum(len(g) - 1 for g in groups)


_COMPARISONS = {"assertEquals", "assertSame", "assertArrayEquals", "assertIterableEquals", "assertLinesMatch"}


def is_redundant(stmt: Statement) -> bool:
    a = stmt.assertion
    args = _normalize_args(a.checked_args)
    if a.method == "assertTrue" and args == ("true",):
        return True
    if a.method == "assertFalse" and args == ("false",):
        return True
    if a.method == "assertNull" and args == ("null",):
        return True
    if a.method in _COMPARISONS and len(args) >= 2 and args[0] == args[1]:
        return True
    return False


def _rule_ra(md, flat, unit, ctx, cfg):
    ev = [(i, _excerpt(s.text)) for i, s in _assertions(flat) if is_redundant(s)]
    return (ev, len(ev)) if ev else None


def _rule_eta(md, flat, unit, ctx, cfg):
    names = ctx.focal_method_names() if ctx is not None else set()
    if not names:
        return None
    distinct = set(focal_invocations(md.body_text, names))
    if len(distinct) < cfg.eager_threshold:
        return None
    hits = [(i, s) for i, s in enumerate(flat) if focal_invocations(s.text, names)]
    leaves = [(i, s) for i, s in hits if not s.children] or hits
    return [(i, _excerpt(s.text)) for i, s in leaves], len(distinct)


_TOSTRING = re.compile(r"\.\s*toString\s*\(\s*\)")


def _rule_se(md, flat, unit, ctx, cfg):
    ev = []
    for i, s in _assertions(flat):
        if any(_TOSTRING.search(mask(a)) for a in s.assertion.checked_args):
            ev.append((i, _excerpt(s.text)))
    return (ev, len(ev)) if ev else None


def _resource_pattern(cfg: DetectionConfig) -> re.Pattern:
    names = "|".join(sorted(re.escape(n) for n in cfg.resource_class_names))
    return re.compile(
        r"\bnew\s+(?:" + names + r")\s*[(<]|(?<![\w$.])(?:" + names + r")\s*\.\s*" + IDENT + r"\s*\("
    )


def _resource_statements(flat, cfg):
    pat = _resource_pattern(cfg)
    return [(i, s) for i, s in enumerate(flat)
            if pat.search(mask(s.text)) and not any(pat.search(mask(c.text)) for c in s.children)]


def _rule_mg(md, flat, unit, ctx, cfg):
    hits = _resource_statements(flat, cfg)
    return ([(i, _excerpt(s.text)) for i, s in hits], len(hits)) if hits else None


_EXISTS = re.compile(r"\bexists\s*\(")


def _rule_ro(md, flat, unit, ctx, cfg):
    hits = _resource_statements(flat, cfg)
    if not hits or _EXISTS.search(mask(md.body_text)):
        return None
    return [(i, _excerpt(s.text)) for i, s in hits], len(hits)


_IGNORES = ("Ignore", "Disabled")


def _rule_it(md, flat, unit, ctx, cfg):
    for a, arg in md.annotations:
        if a in _IGNORES:
            return [(-1, f"@{a}" + (f"({arg})" if arg else ""))], 1
    for a, arg in unit.file.class_annotations:
        if a in _IGNORES:
            return [(-1, f"class @{a}")], 1
    return None


_ASSERT_LIKE = re.compile(r"(?<![\w$])(?:assert\w*|fail|verify\w*)\s*\(")


def _rule_ut(md, flat, unit, ctx, cfg):
    if not flat:
        return None  # empty test wins
    if _assertions(flat) or _ASSERT_LIKE.search(mask(md.body_text)):
        return None
    arg = md.annotation_arg("Test")
    if arg and re.search(r"\bexpected\s*=", arg):
        return None
    return [(-1, md.signature_text)], 1


def _rule_et(md, flat, unit, ctx, cfg):
    return ([(-1, md.signature_text)], 1) if not flat else None


RULES: dict[SmellType, Callable] = {
    SmellType.MG: _rule_mg,
    SmellType.RO: _rule_ro,
    SmellType.MNT: _rule_mnt,
    SmellType.SE: _rule_se,
    SmellType.ETa: _rule_eta,
    SmellType.DA: _rule_da,
    SmellType.CTL: _rule_ctl,
    SmellType.ECT: _rule_ect,
    SmellType.AR: _rule_ar,
    SmellType.RA: _rule_ra,
    SmellType.IT: _rule_it,
    SmellType.UT: _rule_ut,
    SmellType.ET: _rule_et,
}


def _origin_for(unit: TestUnit, md: MethodDecl) -> Origin:
    return Origin(unit.origin.path, md.name, unit.origin.index)


def detect_one(unit: TestUnit, context: TestContext | None, config: DetectionConfig | None,
               smell: SmellType) -> list[SmellFinding]:
    config = config or DetectionConfig()
    smell = SmellType(smell)
    out = []
    for md in unit.methods:
        flat = list(iter_statements(md.body))
        res = RULES[smell](md, flat, unit, context, config)
        if res:
            evidence, count = res
            out.append(SmellFinding(smell, _origin_for(unit, md), tuple(evidence), max(count, 1)))
    return out


def detect(unit: TestUnit, context: TestContext | None = None,
           config: DetectionConfig | None = None) -> list[SmellFinding]:
    """All findings, per method in SmellType declaration order."""
    out = []
    for k in range(len(unit.methods)):
        single = unit.single(k)
        for smell in SmellType:
            out.extend(detect_one(single, context, config, smell))
    return out


def reduction_rate(before, after) -> float:
    """1 - |after| / |before|; arguments are finding lists or plain counts."""
    b = before if isinstance(before, int) else len(before)
    a = after if isinstance(after, int) else len(after)
    if b == 0:
        raise DivisionByEmpty("reduction rate undefined for an empty 'before' set")
    return 1.0 - a / b


def format_rate(rate: float) -> str:
    return f"{math.floor(rate * 100 + 0.5)}%"


def count_by_smell(findings) -> dict[str, int]:
    counts = {s.value: 0 for s in SmellType}
    for f in findings:
        counts[f.smell.value] += 1
    return counts
