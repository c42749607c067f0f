"""Refactoring loop: plan, transform or prompt, re-detect, repeat.

Two backends share one loop shape. The deterministic backend applies the
template transforms from :mod:`utref.transforms`; the model backend sends a
chain-of-thought prompt, parses the returned code and checks one checkpoint
per smell, sending the failed checkpoints back as a follow-up.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from .errors import BackendError, BackendUnavailable, NotMechanizable, ParseError, ResponseUnparseable
from .javasrc import collapse_ws, find_matching, mask
from .knowledge import Plan, RuleSet, default_ruleset, order_findings
from .model import MethodDecl, TestContext, TestUnit, parse_java, render
from .smells import DetectionConfig, SmellFinding, SmellType, detect, detect_one
from .transforms import MECHANIZABLE, MODEL_ONLY, apply_deterministic

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 3

PENDING, PASSED, FAILED = "pending", "passed", "failed"

DEFAULT_PREAMBLE = (
    "You are an experienced Java developer who cares about the quality of test code. "
    "Work in four steps. First, read the test and state to yourself what behavior it is meant to check. "
    "Second, find each listed smell in the code. "
    "Third, apply the refactoring rule given for each smell, in the order listed. "
    "Fourth, write the refactored test without changing what it verifies."
)

DEFAULT_INSTRUCTION = (
    "Refactor the test above so that none of the listed smells remain. "
    "Keep the package, the class name and every import the code needs, and do not weaken or drop checks. "
    "Reply with the complete refactored test class in a single ```java code block, "
    "then answer every checkpoint below with yes or no."
)


@dataclass(frozen=True)
class Checkpoint:
    smell: SmellType
    question: str
    status: str = PENDING

    def with_status(self, status: str) -> "Checkpoint":
        return replace(self, status=status)


@dataclass(frozen=True)
class PromptBundle:
    """One model request, block by block, in chain-of-thought order."""

    role_preamble: str
    test_code: str
    context_block: str
    smell_block: str
    rule_block: str
    instruction: str
    checkpoints: tuple[Checkpoint, ...]
    follow_up: str = ""
    unit: TestUnit | None = field(default=None, compare=False, repr=False)
    context: TestContext | None = field(default=None, compare=False, repr=False)
    plan: Plan | None = field(default=None, compare=False, repr=False)

    def user_text(self) -> str:
        parts = [
            "## Test under refactoring\n```java\n" + self.test_code.rstrip("\n") + "\n```",
            "## Context\n" + self.context_block,
            "## Detected smells\n" + self.smell_block,
            "## Refactoring rules\n" + self.rule_block,
            "## Task\n" + self.instruction,
            "## Checkpoints\n" + "\n".join(f"{k}. {c.question}" for k, c in enumerate(self.checkpoints, 1)),
        ]
        if self.follow_up:
            parts.append("## Follow-up\n" + self.follow_up)
        return "\n\n".join(parts) + "\n"

    def text(self) -> str:
        return self.role_preamble + "\n\n" + self.user_text()

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.role_preamble},
            {"role": "user", "content": self.user_text()},
        ]

    def sha256(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


def _indent(text: str, prefix: str = "    ") -> str:
    return "\n".join(prefix + ln if ln.strip() else "" for ln in text.strip("\n").split("\n"))


def render_context(context: TestContext | None) -> str:
    if context is None or not (context.focal_class or context.package_name):
        return "No focal class was found for this test."
    lines = []
    if context.package_name:
        lines.append(f"Package: {context.package_name}")
    if context.focal_class:
        lines.append(f"Focal class: {context.focal_class}")
    if context.focal_method_signature:
        lines.append(f"Focal method: {context.focal_method_signature}")
        if context.focal_method_comment:
            lines.append(_indent(context.focal_method_comment))
    if context.other_invoked_methods:
        lines.append("Other invoked methods:")
        lines += [f"  - {sig}" for sig in context.other_invoked_methods]
    return "\n".join(lines)


def checkpoint_question(smell: SmellType, ruleset: RuleSet) -> str:
    d = ruleset.definitions[smell]
    return f"Does the refactored test still exhibit {smell.full_name} ({smell.value}), that is: {d.description}"


def build_prompt(unit: TestUnit, context: TestContext | None, plan: Plan | Iterable[SmellFinding],
                 ruleset: RuleSet | None = None, *, preamble: str | None = None,
                 instruction: str | None = None) -> PromptBundle:
    ruleset = ruleset or default_ruleset()
    if not isinstance(plan, Plan):
        plan = order_findings(plan, ruleset)
    if plan.remove or not plan.findings:
        raise ValueError("build_prompt needs a non-empty plan without removal")
    smell_parts, rule_parts = [], []
    for f in plan.findings:
        d = ruleset.definitions[f.smell]
        ev = "\n".join(
            f"      {'declaration' if i < 0 else f'statement {i}'}: {text}" for i, text in f.evidence
        )
        smell_parts.append(
            f"- {f.smell.value} ({f.smell.full_name}) in {f.unit_origin.method}, count {f.count}\n"
            f"    Definition: {d.description}\n"
            f"    Impact: {d.impact}\n"
            f"    Example:\n{_indent(d.pseudocode_example, '      ')}\n"
            f"    Evidence:\n{ev}"
        )
        r = ruleset.rules[f.smell]
        steps = "\n".join(f"    Step {k} (the action {s.action}): {s.prose}" for k, s in enumerate(r.steps, 1))
        variables = "\n".join(f"      {name}: {desc}" for name, desc in r.variables.items())
        rule_parts.append(
            f"- Rule for {f.smell.value}: {r.description}\n{steps}\n"
            + (f"    Variables:\n{variables}\n" if variables else "")
            + f"    Before:\n{_indent(r.example_before, '      ')}\n"
            f"    After:\n{_indent(r.example_after, '      ')}"
        )
    checkpoints = tuple(Checkpoint(s, checkpoint_question(s, ruleset)) for s in plan.smells)
    return PromptBundle(
        role_preamble=preamble or DEFAULT_PREAMBLE,
        test_code=render(unit),
        context_block=render_context(context),
        smell_block="\n".join(smell_parts),
        rule_block="\n".join(rule_parts),
        instruction=instruction or DEFAULT_INSTRUCTION,
        checkpoints=checkpoints,
        unit=unit,
        context=context,
        plan=plan,
    )


# --------------------------------------------------------------------------
# Response handling
# --------------------------------------------------------------------------

_FENCE = re.compile(r"```[ \t]*[\w+-]*[ \t]*\n(.*?)```", re.S)
_TEST_MARK = re.compile(r"@(?:Test|ParameterizedTest)\b")
# annotations, comments, and lines ending the way Java lines end
_CODE_LINE = re.compile(r"\s*(?:@|//|/\*|\*).*|.*[;{}),]\s*")


def extract_code(model_response: str | None) -> str | None:
    """Largest fenced block, else the largest brace region holding a test."""
    if not model_response:
        return None
    blocks = [m.group(1) for m in _FENCE.finditer(model_response)]
    blocks = [b for b in blocks if b.strip()]
    if blocks:
        return max(blocks, key=len)
    text = model_response
    m = mask(text)
    best = None
    i = 0
    while True:
        i = m.find("{", i)
        if i < 0:
            break
        try:
            j = find_matching(m, i)
        except ParseError:
            i += 1
            continue
        # extend back over code-like lines leading into the brace
        start = text.rfind("\n", 0, i) + 1
        while start > 0:
            prev = text.rfind("\n", 0, start - 1) + 1
            if not _CODE_LINE.match(text[prev:start - 1]):
                break
            start = prev
        region = text[start:j + 1]
        if _TEST_MARK.search(region) and (best is None or len(region) > len(best)):
            best = region
        i = j + 1
    return best


def _strip_preamble(code: str) -> tuple[list[str], str]:
    """Split leading package/import lines off a fragment."""
    imports = []
    out = []
    for ln in code.split("\n"):
        s = ln.strip()
        im = re.fullmatch(r"import\s+(static\s+)?([\w.$]+(?:\s*\.\s*\*)?)\s*;", s)
        if im:
            imports.append(("static " if im.group(1) else "") + re.sub(r"\s", "", im.group(2)))
            continue
        if re.fullmatch(r"package\s+[\w.]+\s*;", s):
            continue
        out.append(ln)
    return imports, "\n".join(out)


def unit_from_code(code: str, unit: TestUnit, junit: int = 5) -> TestUnit:
    """Build the refactored unit from code returned by a model.

    The code may be a whole class or bare methods. Test methods replace the
    unit's methods; other new members ride along as extra members.
    """
    try:
        tf = parse_java(code, unit.origin.path, junit)
        new_imports = list(tf.imports)
    except ParseError:
        new_imports, body = _strip_preamble(code)
        tf = parse_java("class __Fragment__ {\n" + body + "\n}\n", unit.origin.path, junit)
    original = unit.file
    siblings = {collapse_ws(m.text) for k, m in enumerate(original.test_methods) if k != unit.origin.index}
    tests = [m for m in tf.test_methods if collapse_ws(m.text) not in siblings]
    if not tests:
        raise ParseError(1, "response contains no test method")
    known_text = {collapse_ws(m.text) for m in original.members}
    known_names = {m.method.name for m in original.members if m.method is not None and m.kind != "test"}
    extras = []
    for mem in tf.members:
        if mem.kind == "test":
            continue
        if collapse_ws(mem.text) in known_text:
            continue
        if mem.method is not None and mem.method.name in known_names:
            continue
        extras.append(mem.text)
    imports = list(unit.imports) + [i for i in new_imports if i not in unit.imports]
    return unit.with_methods(tests, imports=imports, extra_members=tuple(unit.extra_members) + tuple(extras))


def verify_checkpoints(result_unit: TestUnit | None, checkpoints: Iterable[Checkpoint],
                       context: TestContext | None = None, config: DetectionConfig | None = None):
    """Re-detect each checkpoint's smell; returns (checkpoints, residual findings)."""
    checkpoints = tuple(checkpoints)
    if result_unit is None:
        return tuple(c.with_status(FAILED) for c in checkpoints), []
    out, residual = [], []
    for c in checkpoints:
        found = detect_one(result_unit, context, config, c.smell)
        out.append(c.with_status(FAILED if found else PASSED))
        residual += found
    return tuple(out), residual


# --------------------------------------------------------------------------
# Outcome and loop
# --------------------------------------------------------------------------

@dataclass
class RefactorOutcome:
    origin: Any
    backend: str
    rounds_used: int
    new_methods: list[MethodDecl]
    removed: bool
    residual: list[SmellFinding]
    transcript: list[dict] = field(default_factory=list)
    log: list[tuple[str, str, str]] = field(default_factory=list)
    unit: TestUnit | None = None
    plan: Plan | None = None
    checkpoints: tuple[Checkpoint, ...] = ()

    @property
    def order(self) -> list[str]:
        """Smell codes in the order the loop first handled them."""
        return list(dict.fromkeys(entry[0] for entry in self.log))


def _complete(model, bundle: PromptBundle) -> str:
    fn = getattr(model, "complete", None) or model
    resp = fn(bundle)
    return getattr(resp, "text", resp)


def _follow_up(checkpoints, previous_code: str | None, error: str | None) -> str:
    lines = []
    if error:
        lines.append(f"Your previous reply could not be used: {error}.")
    failed = [c for c in checkpoints if c.status == FAILED]
    if failed:
        lines.append("These checkpoints still fail; fix them and reply with the full class again:")
        lines += [f"- {c.smell.value}: {c.question}" for c in failed]
    if previous_code:
        lines.append("Your previous refactoring:\n```java\n" + previous_code.rstrip("\n") + "\n```")
    return "\n".join(lines)


def _model_loop(unit, context, findings, ruleset, model, budget, config):
    plan = order_findings(findings, ruleset)
    bundle = build_prompt(unit, context, plan, ruleset)
    checkpoints = bundle.checkpoints
    current = unit
    transcript = []
    code = None
    error = None
    rounds = 0
    for rnd in range(1, budget + 1):
        rounds = rnd
        request = bundle if rnd == 1 else replace(bundle, follow_up=_follow_up(checkpoints, code, error))
        try:
            text = _complete(model, request)
        except BackendError as exc:
            transcript.append({"round": rnd, "prompt_sha256": request.sha256(), "response": None,
                               "checkpoints": {}, "error": type(exc).__name__})
            raise BackendUnavailable(str(exc)) from exc
        code = extract_code(text)
        error = None
        new = None
        if code is None:
            error = str(ResponseUnparseable(rnd))
        else:
            try:
                new = unit_from_code(code, unit, config.junit_version)
            except ParseError as exc:
                error = f"round {rnd}: returned code does not parse ({exc})"
        checkpoints, _ = verify_checkpoints(new, checkpoints, context, config)
        if new is not None:
            current = new
        transcript.append({
            "round": rnd,
            "prompt_sha256": request.sha256(),
            "response": text,
            "checkpoints": {c.smell.value: c.status for c in checkpoints},
            "error": error,
        })
        if new is not None and all(c.status == PASSED for c in checkpoints):
            break
    return current, rounds, transcript, checkpoints


def refactor_unit(unit: TestUnit, context: TestContext | None, findings: Iterable[SmellFinding],
                  ruleset: RuleSet | None = None, backend: str = "deterministic",
                  budget: int = DEFAULT_BUDGET, *, model=None, config: DetectionConfig | None = None,
                  wrap_throws: bool = False) -> RefactorOutcome:
    """Refactor one unit until its findings are gone or the round budget is spent.

    ``backend`` is ``deterministic``, ``model`` or ``auto``. With
    ``deterministic``/``auto`` a finding the templates cannot handle goes to
    ``model`` when one is given. ``model`` is any object with a
    ``complete(bundle)`` method, or a plain callable.
    """
    ruleset = ruleset or default_ruleset()
    config = config or DetectionConfig()
    findings = list(findings)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if backend not in ("deterministic", "model", "auto"):
        raise ValueError(f"unknown backend {backend!r}")
    plan = order_findings(findings, ruleset)
    steps: list[tuple[str, str, str]] = []

    if plan.remove:
        current = unit
        for f in plan.findings:
            if any(m.name == f.unit_origin.method for m in current.methods):
                current = apply_deterministic(current, f, ruleset, config, context=context)
            steps.append((f.smell.value, "removed", ""))
        return RefactorOutcome(unit.origin, "deterministic", 1, list(current.methods), current.removed,
                               detect(current, context, config) if not current.removed else [],
                               [], steps, current, plan)

    if backend == "model":
        if model is None:
            raise BackendUnavailable("model backend selected but no model is configured")
        current, rounds, transcript, cps = _model_loop(unit, context, plan.findings, ruleset, model, budget, config)
        residual = detect(current, context, config)
        for f in plan.findings:
            steps.append((f.smell.value, "model", ""))
        return RefactorOutcome(unit.origin, "model", rounds, list(current.methods), current.removed,
                               residual, transcript, _dedupe(steps), current, plan, cps)

    current = unit
    failed: set[tuple[str, SmellType]] = set()
    todo = plan
    rounds = 0
    while True:
        rounds += 1
        smells = list(dict.fromkeys(f.smell for f in todo.findings)) if todo.remove else list(todo.smells)
        for smell in smells:
            if smell in MODEL_ONLY:
                steps.append((smell.value, "model-only", ""))
                continue
            live = detect_one(current, context, config, smell)
            if not live:
                steps.append((smell.value, "resolved", ""))
                continue
            for f in live:
                if (f.unit_origin.method, smell) in failed:
                    continue
                try:
                    current = apply_deterministic(current, f, ruleset, config, context=context,
                                                  wrap_throws=wrap_throws)
                    steps.append((smell.value, "applied", f.unit_origin.method))
                except NotMechanizable as exc:
                    failed.add((f.unit_origin.method, smell))
                    steps.append((smell.value, "not-mechanizable", exc.reason))
            if current.removed:
                break
        if current.removed:
            break
        after = detect(current, context, config)
        fresh = [f for f in after if f.smell in MECHANIZABLE and (f.unit_origin.method, f.smell) not in failed]
        if not fresh or rounds >= budget:
            break
        todo = order_findings(fresh, ruleset)

    residual = detect(current, context, config) if not current.removed else []
    used_backend = "deterministic"
    transcript: list[dict] = []
    cps: tuple[Checkpoint, ...] = ()
    leftovers = [f for f in residual if f.smell in MODEL_ONLY or (f.unit_origin.method, f.smell) in failed]
    if leftovers and model is not None and not current.removed:
        current, m_rounds, transcript, cps = _model_loop(current, context, leftovers, ruleset, model, budget, config)
        rounds += m_rounds
        used_backend = "model"
        residual = detect(current, context, config)
    return RefactorOutcome(unit.origin, used_backend, rounds, list(current.methods), current.removed,
                           residual, transcript, steps, current, plan, cps)


def _dedupe(steps):
    return list(dict.fromkeys(steps))


def write_transcript(path, records: Iterable[dict]) -> None:
    """Append transcript records as JSON lines."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
