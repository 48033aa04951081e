import sys
from pathlib import Path

import pytest

from seqreplay.config import ExperimentConfig, with_overrides
from seqreplay.protocol import run_experiment

sys.path.insert(0, str(Path(__file__).parent))

_cache = {}


def experiment(overrides=None):
    """Run (and memoise) the default experiment with dotted-key overrides."""
    overrides = overrides or {}
    key = tuple(sorted(overrides.items()))
    if key not in _cache:
        _cache[key] = run_experiment(with_overrides(ExperimentConfig(), overrides))
    return _cache[key]


@pytest.fixture(scope="session")
def default_result():
    return experiment()


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(code: str, ok: bool, detail: str) -> bool:
    """Store (and print) one acceptance verdict line."""
    ACCEPTANCE[code] = (bool(ok), detail)
    print(f"{code} {'PASS' if ok else 'FAIL'}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for code in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[code]
        terminalreporter.write_line(f"{code} {'PASS' if ok else 'FAIL'}: {detail}")
