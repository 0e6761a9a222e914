import numpy as np
import pytest

from entroweight import Mesh, StepFunction
from entroweight.geometry import RationalBox
from fractions import Fraction as F


@pytest.fixture
def mesh6():
    return Mesh(1, 1, 6)


def unit_indicator(mesh):
    return StepFunction.indicator(mesh, RationalBox(((F(0), F(1)),) * mesh.n))


def two_cell(mesh, v=3.0):
    """1 on x < 0, v on x >= 0."""
    vals = np.where(mesh.centers() < 0, 1.0, v)
    return StepFunction.weight(mesh, vals)


# acceptance results, printed once at the end of the session
CRITERIA = {}


def record(number, ok, detail=""):
    CRITERIA[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
