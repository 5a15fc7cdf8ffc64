import pytest

from parkusage.ingest import TraceRecord

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one acceptance criterion outcome and assert it."""

    def check(number, title, passed, detail=""):
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        assert passed, f"criterion {number} ({title}) failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {title}: {detail}")


def rec(user="u1", ts=1493596800, lat=40.78, lon=-73.96, acc=10.0, app="appA"):
    return TraceRecord(user, ts, lat, lon, acc, app)


@pytest.fixture
def make_rec():
    return rec
