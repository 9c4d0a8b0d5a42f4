import pytest

_LINES = []


@pytest.fixture
def acceptance(capsys):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion.

    The line is printed immediately (visible with ``-s``) and repeated in the
    terminal summary so it always lands in the test log.
    """

    def record(tag: str, ok: bool, detail: str) -> bool:
        line = f"[acceptance {tag}] {'PASS' if ok else 'FAIL'}: {detail}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
