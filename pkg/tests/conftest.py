from __future__ import annotations

import re
from pathlib import Path

import pytest

from specdiag.ingest import parse_kb, parse_requirements
from specdiag.model import ConstraintSet, DiagnosisTask

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def smartwatch_kb_path() -> Path:
    return FIXTURES / "smartwatch.kb"


@pytest.fixture(scope="session")
def smartwatch_reqs_path() -> Path:
    return FIXTURES / "smartwatch.reqs"


@pytest.fixture(scope="session")
def smartwatch(smartwatch_kb_path, smartwatch_reqs_path):
    """(table, background, requirements) for the smartwatch fixture."""
    table, background = parse_kb(smartwatch_kb_path.read_text(encoding="utf-8"))
    requirements = parse_requirements(
        smartwatch_reqs_path.read_text(encoding="utf-8"), table
    )
    return table, background, requirements


@pytest.fixture(scope="session")
def smartwatch_task(smartwatch) -> DiagnosisTask:
    _, background, requirements = smartwatch
    return DiagnosisTask(requirements=requirements, background=background)


@pytest.fixture(scope="session")
def reversed_smartwatch_task(smartwatch) -> DiagnosisTask:
    """Same fixture with the requirement priorities turned upside down."""
    _, background, requirements = smartwatch
    return DiagnosisTask(
        requirements=ConstraintSet(reversed(requirements.members)),
        background=background,
    )


# --------------------------------------------------------------------------
# acceptance summary: one visible line per criterion at the end of the run

_ACCEPTANCE: dict[int, tuple[str, str]] = {}
_NODE_RE = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    match = _NODE_RE.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    label = match.group(2).replace("_", " ")
    outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
        report.outcome, report.outcome.upper()
    )
    _ACCEPTANCE[number] = (label, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        label, outcome = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} ({label}): {outcome}")
