import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from responsibility.certify import ExternalMap, reference_adapter_command  # noqa: E402

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def record():
    """Record one acceptance line: record(name, passed, detail)."""

    def _record(name: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS[name] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def adapter():
    """Factory for opened reference adapters; all are closed at teardown."""
    opened = []

    def _open(kind: str, d: int = 2, n: int = 2, **kw) -> ExternalMap:
        ext = ExternalMap.command(reference_adapter_command(kind, d, n, **kw)).open()
        opened.append(ext)
        return ext

    yield _open
    for ext in opened:
        ext.close()
