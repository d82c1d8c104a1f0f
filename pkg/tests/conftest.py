import numpy as np
import pytest

from nodal_nehari import builtin_asymcubic, builtin_power, make_grid

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def asym():
    return builtin_asymcubic()


@pytest.fixture(scope="session")
def power4():
    return builtin_power(4.0)


@pytest.fixture(scope="session")
def grid():
    return make_grid(30.0, 4096)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(20.0, 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pipeline(asym, grid):
    """Seed and minimiser for lambda = 0.1 on the default grid, with timings."""
    import time
    from types import SimpleNamespace

    from nodal_nehari import appendix_seed, solve

    t = time.perf_counter()
    art = appendix_seed(asym, 0.1, grid)
    t_seed = time.perf_counter() - t
    report, _ = solve(asym, 0.1, grid, tol=1e-7, max_iter=2000, artifacts=art)
    t_solve = time.perf_counter() - t
    return SimpleNamespace(art=art, report=report, seed_seconds=t_seed, solve_seconds=t_solve,
                           lam=0.1)
