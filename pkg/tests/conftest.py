from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from hypothesis import settings

from foldcrest.bifurcation import fhn_family
from foldcrest.normalform import fhn_coeffs

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")

ORACLES = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())

# published reference values: eps -> (a_num, a_asym, printed difference column)
TABLE1 = {
    1e-2: (0.99092058501692, 0.99094938062714, 2.879561021731e-5),
    1e-4: (0.99986818929447, 0.99986822927480, 3.99803325e-8),
    1e-6: (0.99999828100195, 0.99999828163419, 6.322363e-10),
    1e-8: (0.99999997885167, 0.99999997885883, 7.1557e-12),
    1e-10: (0.99999999974920, 0.99999999974928, 7.28e-14),
    1e-12: (0.99999999999710, 0.99999999999710, 7.e-16),
}


@pytest.fixture(scope="session")
def fhn_c():
    return fhn_coeffs()


@pytest.fixture(scope="session")
def family_1e2():
    """Shared continuation state for FitzHugh-Nagumo at eps = 1e-2."""
    return fhn_family(1e-2)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def isclose(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


# acceptance criteria record (name, passed, detail) here; printed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
