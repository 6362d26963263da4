import warnings

import pytest

from condwalk.errors import MonotoneDriftWarning
from condwalk.laws import make_step_law, named_law

_ACCEPTANCE_LINES: list = []


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("CONDWALK_CACHE", str(tmp_path / "cache"))


@pytest.fixture(scope="session")
def ssrw():
    return named_law("ssrw")


@pytest.fixture(scope="session")
def lazy():
    return named_law("lazy")


def drifting_law():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotoneDriftWarning)
        return make_step_law([-2, 1], [0.25, 0.75], name="down2-up1")


@pytest.fixture(scope="session")
def down2():
    return drifting_law()


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, passed: bool, detail: str = ""):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
