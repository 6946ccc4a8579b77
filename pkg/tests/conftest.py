import numpy as np
import pytest

from oqs.feshbach import dimer_lattice
from oqs.lattice import DimerModel
from oqs.qep import qep_solve

SQRT11 = np.sqrt(11.0)

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def dimer():
    return dimer_lattice(DimerModel(0.0, 0.5))


@pytest.fixture(scope="session")
def dimer_spec(dimer):
    return qep_solve(dimer)


@pytest.fixture(scope="session")
def psi_even():
    return np.array([1.0, 1.0]) / np.sqrt(2.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n:02d} {'PASS' if ok else 'FAIL'}  {detail}")
