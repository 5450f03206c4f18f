import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def table1_run():
    """Upper-bound grid at tail mass 0.04, computed once per session with its runtime."""
    from shortfall.measurement_error import table1

    start = time.perf_counter()
    reports = table1(alpha=0.96)
    return reports, time.perf_counter() - start


_CRITERIA: dict[str, list[tuple[bool, str]]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail part for an acceptance criterion; parts are merged per criterion."""

    def record(key: str, passed: bool, detail: str):
        _CRITERIA.setdefault(key, []).append((bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k.split()[0])):
        parts = _CRITERIA[key]
        ok = all(p for p, _ in parts)
        failed = [d for p, d in parts if not p]
        shown = "; ".join(failed) if failed else "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {shown}")
