import math
from pathlib import Path

import pytest

from nfoldsusy import expr as ex
from nfoldsusy import parser as ps
from nfoldsusy import typea

MODELS_DIR = Path(__file__).resolve().parent.parent / "src" / "nfoldsusy" / "models"
SCHEMA_PATH = Path(__file__).resolve().parent.parent / "docs" / "report_schema.json"

REAL_LINE = ex.Domain(-math.inf, math.inf, "dirichlet", 0.0)
PERIODIC_CELL = ex.Domain(0.0, 4 * math.pi, "periodic", math.pi / 3)
HALF_LINE = ex.Domain(0.0, math.inf, "dirichlet", 1.0, singular=(0.0,))

SEXTIC_W = "0.2*q^3 + q - 2/q"
SEXTIC_E = "1/q"


def harmonic_model(n, omega=1.0):
    return typea.build(ex.Const(omega) * ex.Q, ex.ZERO, n, REAL_LINE)


def periodic_model(n):
    w = ex.sin(ex.Q) + ex.Const((n - 1) / 2 * 1j)
    return typea.build(w, ex.I, n, PERIODIC_CELL)


def sextic_model(n, c2=1.0):
    w = ps.parse(f"0.2*q^3 + {c2}*q - 2/q")
    return typea.build(w, ps.parse(SEXTIC_E), n, HALF_LINE)


@pytest.fixture(scope="session")
def harmonic2():
    return harmonic_model(2)


@pytest.fixture(scope="session")
def harmonic3():
    return harmonic_model(3)


@pytest.fixture(scope="session")
def periodic2():
    return periodic_model(2)


@pytest.fixture(scope="session")
def sextic2():
    return sextic_model(2)


@pytest.fixture(scope="session")
def models_dir():
    return MODELS_DIR


@pytest.fixture(scope="session")
def report_schema():
    import json
    return json.loads(SCHEMA_PATH.read_text())
