import numpy as np
import pytest

from ncricci.algebra import AlgebraContext, TorusElement


def random_element(ctx, rng, radius=2, scale=1.0):
    d = {(m, n): scale * complex(rng.normal(), rng.normal())
         for m in range(-radius, radius + 1) for n in range(-radius, radius + 1)}
    return TorusElement.from_dict(ctx, d)


def random_self_adjoint(ctx, rng, radius=1, scale=1.0):
    a = random_element(ctx, rng, radius, scale)
    return (a + a.adjoint()) * 0.5


def cosine_dilaton(ctx, c_u, c_v=0.0):
    """c_u (U + U*) + c_v (V + V*)."""
    d = {(1, 0): c_u, (-1, 0): c_u}
    if c_v:
        d.update({(0, 1): c_v, (0, -1): c_v})
    return TorusElement.from_dict(ctx, d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def nc_ctx():
    return AlgebraContext(0.37, 1j)


@pytest.fixture
def skew_ctx():
    return AlgebraContext(0.21, 0.3 + 1.1j)


@pytest.fixture
def reference_dilaton(nc_ctx):
    return cosine_dilaton(nc_ctx, 0.3, 0.3)


# one line per acceptance criterion, printed after the run even when output is captured
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
