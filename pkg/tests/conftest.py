import numpy as np
import pytest

from piezoheat.assembly import assemble_generator
from piezoheat.domain import Grid, MaterialParams
from piezoheat.fracdiff import FractionalParams, build_xi_quadrature

# one line per acceptance criterion, printed in the terminal summary
CRITERIA_LINES: list[str] = []


def record_criterion(tag: str, passed: bool, detail: str) -> None:
    CRITERIA_LINES.append(f"{tag}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)


def make_system(n_heat=8, n_beam=8, K=8, alpha=0.5, eta=1.0, Xi=1e3, mp=None):
    mp = mp or MaterialParams()
    fp = FractionalParams(alpha, eta)
    rule = build_xi_quadrature(fp, K, Xi=Xi, tol=np.inf)
    grid = Grid.build(mp, n_heat, n_beam, rule)
    return mp, fp, grid, assemble_generator(mp, fp, grid)


@pytest.fixture
def small_system():
    return make_system()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
