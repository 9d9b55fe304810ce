import pytest
from hypothesis import settings

from sigmak.geometry import ProblemParams

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

PARAM_SET = [(5, 2), (7, 2), (7, 3), (9, 2)]


@pytest.fixture(params=PARAM_SET, ids=lambda nk: f"n{nk[0]}k{nk[1]}")
def params(request):
    return ProblemParams(*request.param)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(number, title, checks, elapsed, limit, detail=""):
        timed = elapsed < limit
        ok = all(checks.values()) and timed
        failed = [k for k, v in checks.items() if not v] + ([] if timed else ["runtime"])
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.1f} s / {limit:g} s)"
        if detail:
            line += f"  {detail}"
        if failed:
            line += f"  failed: {', '.join(failed)}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
