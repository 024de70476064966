import numpy as np
import pytest

from flagpara.spectral import Grid, SampledFunction, Spectrum, inverse_transform


def bandlimited(grid, band, seed, real=False):
    """Random function with modes in [-band, band]."""
    rng = np.random.default_rng(seed)
    h = grid.n // 2
    c = np.zeros(grid.n, dtype=complex)
    c[h - band : h + band + 1] = rng.normal(size=2 * band + 1) + 1j * rng.normal(size=2 * band + 1)
    f = inverse_transform(Spectrum(grid, c))
    return SampledFunction(grid, f.samples.real) if real else f


@pytest.fixture
def grid32():
    return Grid(32)


@pytest.fixture
def grid64():
    return Grid(64)


# acceptance verdict lines, echoed after the run even when output is captured
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
