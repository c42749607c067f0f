"""Refactoring knowledge: smell definitions, per-smell rules and plan ordering.

Rules and definitions ship as JSON under ``utref/data``. A user directory with
the same layout (``<SMELL>.json`` files plus an optional ``definitions.json``)
overrides individual entries.
"""

from __future__ import annotations

import hashlib
import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import MissingRule, RuleValidationError
from .smells import SmellFinding, SmellType

REMOVAL = "Removal"
STRUCTURAL = "Structural"
FUNCTIONAL = "Functional"
CATEGORY_ORDER = (REMOVAL, STRUCTURAL, FUNCTIONAL)

# Listing order inside each category is the execution priority.
DEFAULT_CATEGORIES: dict[str, tuple[SmellType, ...]] = {
    REMOVAL: (SmellType.ET, SmellType.UT, SmellType.IT),
    STRUCTURAL: (SmellType.ETa, SmellType.DA, SmellType.CTL, SmellType.ECT, SmellType.MG, SmellType.RO),
    FUNCTIONAL: (SmellType.AR, SmellType.MNT, SmellType.RA, SmellType.SE),
}

ACTIONS = frozenset({
    "ReplaceAnnotation", "AddAnnotation", "AddMessageToAssert", "ExtractConstant",
    "WrapAssertDoesNotThrow", "WrapAssertThrows", "SplitByFocalCall", "RemoveStatement",
    "RemoveTest", "DeduplicateBody", "ReplaceToStringComparison", "AddExistenceCheck",
    "InlineResourceAsLiteral",
})


@dataclass(frozen=True)
class SmellDefinition:
    smell: SmellType
    description: str
    impact: str
    pseudocode_example: str


@dataclass(frozen=True)
class Step:
    action: str
    params: Mapping = field(default_factory=dict)
    prose: str = ""

    def render(self, bindings: Mapping[str, str] | None = None) -> str:
        """Prose with placeholders filled from ``bindings``; unbound ones stay as-is."""
        bindings = bindings or {}
        return re.sub(r"\{(\w+)\}", lambda m: str(bindings.get(m.group(1), m.group(0))), self.prose)


@dataclass(frozen=True)
class RefactorRule:
    smell: SmellType
    description: str
    steps: tuple[Step, ...]
    example_before: str
    example_after: str
    variables: Mapping[str, str]

    def actions(self) -> list[str]:
        return [s.action for s in self.steps]

    def step(self, action: str) -> Step | None:
        return next((s for s in self.steps if s.action == action), None)

    def to_dict(self) -> dict:
        return {
            "smell_type": self.smell.value,
            "description": self.description,
            "steps": [{"action": s.action, "params": dict(s.params), "prose": s.prose} for s in self.steps],
            "example": {"before": self.example_before, "after": self.example_after},
            "variables": dict(self.variables),
        }


@dataclass(frozen=True)
class RuleSet:
    rules: Mapping[SmellType, RefactorRule]
    definitions: Mapping[SmellType, SmellDefinition]
    category_of: Mapping[SmellType, str]
    priority: tuple[SmellType, ...] = ()

    def __post_init__(self):
        if not (set(self.rules) == set(self.definitions) == set(self.category_of)):
            raise RuleValidationError("*", "rules, definitions and categories cover different smells")
        if not self.priority:
            order = sorted(self.category_of, key=lambda s: (CATEGORY_ORDER.index(self.category_of[s]),
                                                            list(SmellType).index(s)))
            object.__setattr__(self, "priority", tuple(order))

    def rank(self, smell: SmellType) -> tuple[int, int]:
        return CATEGORY_ORDER.index(self.category_of[smell]), self.priority.index(smell)

    def fingerprint(self) -> str:
        doc = {
            "rules": {s.value: r.to_dict() for s, r in sorted(self.rules.items(), key=lambda kv: kv[0].value)},
            "categories": {s.value: c for s, c in sorted(self.category_of.items(), key=lambda kv: kv[0].value)},
            "priority": [s.value for s in self.priority],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _placeholders(text: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(text) if name}


def _require_text(smell: str, doc: Mapping, key: str) -> str:
    v = doc.get(key)
    if not isinstance(v, str) or not v.strip():
        raise RuleValidationError(smell, f"'{key}' must be a non-empty string")
    return v


def parse_rule(doc: Mapping, expected: SmellType | None = None) -> RefactorRule:
    """Validate one rule document and build the rule."""
    raw = doc.get("smell_type", expected.value if expected else "?")
    try:
        smell = SmellType(raw)
    except ValueError:
        raise RuleValidationError(str(raw), "unknown smell type") from None
    name = smell.value
    if expected is not None and smell != expected:
        raise RuleValidationError(name, f"file is for {expected.value} but declares {name}")
    description = _require_text(name, doc, "description")
    variables = doc.get("variables", {})
    if not isinstance(variables, dict) or not all(isinstance(k, str) and isinstance(v, str)
                                                  for k, v in variables.items()):
        raise RuleValidationError(name, "'variables' must map names to descriptions")
    steps_doc = doc.get("steps")
    if not isinstance(steps_doc, list) or not steps_doc:
        raise RuleValidationError(name, "rule has no steps")
    steps = []
    for k, sd in enumerate(steps_doc):
        if not isinstance(sd, dict):
            raise RuleValidationError(name, f"step {k} is not an object")
        action = sd.get("action")
        if action not in ACTIONS:
            raise RuleValidationError(name, f"step {k} has unknown action {action!r}")
        params = sd.get("params", {})
        if not isinstance(params, dict):
            raise RuleValidationError(name, f"step {k} params must be an object")
        prose = sd.get("prose")
        if not isinstance(prose, str) or not prose.strip():
            raise RuleValidationError(name, f"step {k} has no prose")
        try:
            unbound = _placeholders(prose) - set(variables)
        except ValueError as exc:
            raise RuleValidationError(name, f"step {k} prose is malformed: {exc}") from None
        if unbound:
            raise RuleValidationError(name, f"step {k} uses unbound placeholder(s) {sorted(unbound)}")
        steps.append(Step(action, MappingProxyType(dict(params)), prose))
    example = doc.get("example")
    if not isinstance(example, dict):
        raise RuleValidationError(name, "'example' must have 'before' and 'after'")
    before = _require_text(name, example, "before")
    after = _require_text(name, example, "after")
    return RefactorRule(smell, description, tuple(steps), before, after, MappingProxyType(dict(variables)))


def parse_definition(smell: SmellType, doc: Mapping) -> SmellDefinition:
    if not isinstance(doc, dict):
        raise RuleValidationError(smell.value, "definition must be an object")
    return SmellDefinition(
        smell,
        _require_text(smell.value, doc, "description"),
        _require_text(smell.value, doc, "impact"),
        _require_text(smell.value, doc, "pseudocode_example"),
    )


def _read_json(smell: str, text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RuleValidationError(smell, f"invalid JSON: {exc}") from None


def _default_data():
    return resources.files("utref") / "data"


def _load_from(base, smells: Iterable[SmellType]) -> tuple[dict, dict]:
    rules, defs = {}, {}
    for smell in smells:
        f = base / "rules" / f"{smell.value}.json" if (base / "rules").is_dir() else base / f"{smell.value}.json"
        if f.is_file():
            rules[smell] = parse_rule(_read_json(smell.value, f.read_text(encoding="utf-8")), smell)
    d = base / "definitions.json"
    if d.is_file():
        data = _read_json("definitions", d.read_text(encoding="utf-8"))
        for key, doc in data.items():
            try:
                smell = SmellType(key)
            except ValueError:
                raise RuleValidationError(key, "unknown smell type in definitions") from None
            defs[smell] = parse_definition(smell, doc)
    return rules, defs


def load_rules(rules_dir=None, *, use_defaults: bool = True,
               categories: Mapping[str, Iterable] | None = None) -> RuleSet:
    """Load and validate a RuleSet.

    ``rules_dir`` may hold ``<SMELL>.json`` files directly or under ``rules/``;
    its entries replace the embedded defaults. With ``use_defaults=False``
    every smell must be covered by ``rules_dir``.
    """
    rules: dict = {}
    defs: dict = {}
    if use_defaults:
        rules, defs = _load_from(_default_data(), SmellType)
    if rules_dir is not None:
        base = Path(rules_dir)
        if not base.is_dir():
            raise NotADirectoryError(str(base))
        r, d = _load_from(base, SmellType)
        rules.update(r)
        defs.update(d)
    for smell in SmellType:
        if smell not in rules:
            raise MissingRule(smell.value)
        if smell not in defs:
            raise MissingRule(smell.value)

    cats = categories if categories is not None else DEFAULT_CATEGORIES
    category_of: dict[SmellType, str] = {}
    priority: list[SmellType] = []
    for cat in CATEGORY_ORDER:
        for s in cats.get(cat, ()):
            s = SmellType(s)
            if s in category_of:
                raise RuleValidationError(s.value, "assigned to more than one category")
            category_of[s] = cat
            priority.append(s)
    for s in SmellType:
        if s not in category_of:
            raise RuleValidationError(s.value, "not assigned to any category")
    return RuleSet(MappingProxyType(rules), MappingProxyType(defs), MappingProxyType(category_of), tuple(priority))


_DEFAULT: RuleSet | None = None


def default_ruleset() -> RuleSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_rules()
    return _DEFAULT


@dataclass(frozen=True)
class Plan:
    """Ordered refactoring plan for one unit.

    ``steps`` is either ``("Remove",)`` or the distinct smell codes in
    execution order. ``findings`` lists the findings that drive the plan in
    that order; ``subsumed`` holds the ones made moot by a removal.
    """

    findings: tuple[SmellFinding, ...]
    remove: bool = False
    subsumed: tuple[SmellFinding, ...] = ()

    @property
    def steps(self) -> tuple[str, ...]:
        if self.remove:
            return ("Remove",)
        seen: list[str] = []
        for f in self.findings:
            if f.smell.value not in seen:
                seen.append(f.smell.value)
        return tuple(seen)

    @property
    def smells(self) -> tuple[SmellType, ...]:
        return tuple(SmellType(s) for s in self.steps) if not self.remove else ()

    def __iter__(self):
        return iter(self.findings)

    def __len__(self):
        return len(self.findings)


def order_findings(findings: Iterable[SmellFinding], ruleset: RuleSet | None = None) -> Plan:
    ruleset = ruleset or default_ruleset()
    if isinstance(findings, Plan):
        findings = tuple(findings.findings) + tuple(findings.subsumed)
    ordered = sorted(findings, key=lambda f: ruleset.rank(f.smell))
    removal = [f for f in ordered if ruleset.category_of[f.smell] == REMOVAL]
    if removal:
        rest = [f for f in ordered if ruleset.category_of[f.smell] != REMOVAL]
        return Plan(tuple(removal), True, tuple(rest))
    return Plan(tuple(ordered))


def lookup_definition(smell, ruleset: RuleSet | None = None) -> SmellDefinition:
    ruleset = ruleset or default_ruleset()
    return ruleset.definitions[SmellType(smell)]
