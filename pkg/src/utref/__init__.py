"""Detect and refactor unit test smells in JUnit test suites."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AuthError,
    BackendError,
    BackendUnavailable,
    DivisionByEmpty,
    HookFailed,
    HttpError,
    MergeConflict,
    MissingRule,
    NotATestFile,
    NotMechanizable,
    ParseError,
    RateLimited,
    ResponseUnparseable,
    RuleValidationError,
    Timeout,
    UtrefError,
)
from .knowledge import RuleSet, load_rules, lookup_definition, order_findings  # noqa: E402
from .model import (  # noqa: E402
    TestContext,
    TestFile,
    TestUnit,
    collect_context,
    extract_tests,
    merge_units,
    pair_focal_class,
    parse_test_file,
    render,
    split_into_units,
)
from .smells import DetectionConfig, SmellFinding, SmellType, detect, detect_one, reduction_rate  # noqa: E402
from .engine import build_prompt, extract_code, refactor_unit, verify_checkpoints  # noqa: E402
from .transforms import apply_deterministic  # noqa: E402
from .backend import BackendConfig, complete, make_stub  # noqa: E402

__all__ = [
    "AuthError",
    "BackendConfig",
    "BackendError",
    "BackendUnavailable",
    "DetectionConfig",
    "DivisionByEmpty",
    "HookFailed",
    "HttpError",
    "MergeConflict",
    "MissingRule",
    "NotATestFile",
    "NotMechanizable",
    "ParseError",
    "RateLimited",
    "ResponseUnparseable",
    "RuleSet",
    "RuleValidationError",
    "SmellFinding",
    "SmellType",
    "TestContext",
    "TestFile",
    "TestUnit",
    "Timeout",
    "UtrefError",
    "apply_deterministic",
    "build_prompt",
    "collect_context",
    "complete",
    "detect",
    "detect_one",
    "extract_code",
    "extract_tests",
    "load_rules",
    "lookup_definition",
    "make_stub",
    "merge_units",
    "order_findings",
    "pair_focal_class",
    "parse_test_file",
    "reduction_rate",
    "refactor_unit",
    "render",
    "split_into_units",
    "verify_checkpoints",
    "__version__",
]
