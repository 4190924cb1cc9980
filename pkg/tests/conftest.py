import time

import pytest

from modaldiv.experiments import builtin_plan, curve_csv, run_curve

ACCEPTANCE_LINES: dict[str, str] = {}


def report(key: str, ok: bool, detail: str) -> bool:
    """Record one acceptance line; printed in the terminal summary."""
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abc")), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def n4_plan():
    return builtin_plan("paper-n4")


@pytest.fixture(scope="session")
def n4_desk(n4_plan):
    """Desk-scale N = 4 sweep, serial: ``(curve, csv_text, seconds)``."""
    t0 = time.perf_counter()
    curve = run_curve(n4_plan, workers=1)
    return curve, curve_csv(n4_plan, curve), time.perf_counter() - t0
