import pytest

ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, text)."""

    def add(num, ok, text):
        ACCEPTANCE.append((num, ok, text))
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} {text}")
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {text}")
