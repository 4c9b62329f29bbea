import pytest

_RESULTS = {}


class Verdicts:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def check(self, criterion, ok, detail):
        prev = _RESULTS.get(criterion)
        ok = bool(ok) and (prev is None or prev[0])
        text = detail if prev is None else f"{prev[1]}; {detail}"
        _RESULTS[criterion] = (ok, text)
        assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="session")
def verdicts():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS):
        ok, detail = _RESULTS[criterion]
        terminalreporter.write_line(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
