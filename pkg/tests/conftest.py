import numpy as np
import pytest

from equity_auctions import Beta22, GroupStructure, Uniform

ONE_ONE = GroupStructure(1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=["uniform", "beta22"])
def marginal(request):
    return Uniform() if request.param == "uniform" else Beta22()


def beta22_psi(v):
    """Closed form of the Beta(2,2) virtual value, independent of the
    library: v - (1 - 3v^2 + 2v^3) / (6 v (1 - v)) = v - (1 + 2v)(1 - v)/(6v)."""
    v = np.asarray(v, dtype=float)
    return v - (1.0 + 2.0 * v) * (1.0 - v) / (6.0 * v)


def simpson(f, a, b, n=20_000):
    """Plain composite Simpson rule on a smooth integrand."""
    x = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return (b - a) / (3 * n) * float(w @ f(x))


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE: list = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Remember one PASS/FAIL line; they are printed after the test run."""
    ACCEPTANCE.append((criterion, ok, detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
