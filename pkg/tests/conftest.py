import pytest

from arrayqed.effective_model import params_from_spec
from arrayqed.geometry import LatticeSpec, build_lattice

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def spec():
    return LatticeSpec()


@pytest.fixture(scope="session")
def geom(spec):
    return build_lattice(spec)


@pytest.fixture(scope="session")
def params(spec):
    return params_from_spec(spec)


@pytest.fixture(scope="session")
def sym_params(params):
    return params.symmetrized()


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def record(cid, ok, detail):
        ACCEPTANCE_LINES.append(f"{cid}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[2:s.index(":")])):
            terminalreporter.write_line(line)
