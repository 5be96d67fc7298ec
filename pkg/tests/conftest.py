import pytest

from susy_fields.scenarios import constant_density_scenario, oscillator_scenario, sheet_scenario

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def oscillator():
    return oscillator_scenario(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def sheet():
    return sheet_scenario(1.0, 1.0, 1.0, "exact")


@pytest.fixture(scope="session")
def constant():
    return constant_density_scenario(1.0, 1.0, -1.0)


@pytest.fixture
def criterion(request):
    """Collect ``(label, ok, detail)`` clauses of one acceptance criterion.

    The verdict is printed immediately and repeated in the terminal summary.
    """
    clauses = []
    yield clauses
    ok = bool(clauses) and all(c[1] for c in clauses)
    failed = [f"{label} ({detail})" for label, passed, detail in clauses if not passed]
    line = f"{request.node.name}: {'PASS' if ok else 'FAIL'}"
    if failed:
        line += " -- failing: " + "; ".join(failed)
    print(line)
    request.config.stash.setdefault(_ACCEPTANCE, []).append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
