import pytest

_ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record a one-line acceptance verdict for the terminal summary."""
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE[request.node.name] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for name in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[name])
