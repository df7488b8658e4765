import numpy as np
import pytest

from mcissa import TimeSeriesPanel, demean

ACCEPTANCE_LINES = []


def random_panel(seed, M, T, walk=False):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((M, T))
    if walk:
        x = x.cumsum(axis=1)
    return demean(TimeSeriesPanel(x, [f"s{i + 1}" for i in range(M)]))


def battery():
    """20 seed-fixed (panel, L) cases over M in {1,2,5}, T in {100,500}, L in {12,24,48}."""
    cases = []
    seed = 1000
    for M in (1, 2, 5):
        for T in (100, 500):
            for L in (12, 24, 48):
                if 2 * L > T:
                    continue
                cases.append((M, T, L, seed))
                seed += 1
    # 18 combinations are admissible; two extra random-walk panels complete the 20.
    cases.append((2, 500, 24, 2000))
    cases.append((5, 100, 12, 2001))
    return [(random_panel(s, M, T, walk=(s >= 2000 or s % 2 == 0)), L) for M, T, L, s in cases]


@pytest.fixture
def panel3():
    return random_panel(7, 3, 200)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
