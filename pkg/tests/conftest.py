import math

import numpy as np
import pytest

from franson import spectra as sp

ACCEPTANCE = []


def record(number, title, passed, detail):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((number, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: (r[0], r[1])):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {number:>2} {title}: {detail}")


@pytest.fixture(scope="session")
def jsas():
    return {name: sp.preset_jsa(name) for name in sp.PRESET_NAMES}


def small_jsa(n=64, fwhm=2.0, length=10.0, a=4e-10, b=-3.5e-10):
    """A cheap JSA on a small grid, used where presets would be slow."""
    pump = sp.PumpSpec(792.0, fwhm)
    crystal = sp.CrystalSpec(length, a, b, "small")
    grid = sp.default_grid(pump, crystal, n_min=n, tau_max=1e-12)
    return sp.build_jsa(pump, crystal, grid)


def delta_jsa(omega0, n=5, width=1e6):
    """Normalized amplitude concentrated on the center cell at (omega0, omega0)."""
    grid = sp.FrequencyGrid(omega0, omega0, width * (n - 1), width * (n - 1), n, n)
    v = np.zeros((n, n))
    v[n // 2, n // 2] = 1.0 / math.sqrt(grid.d_s * grid.d_i)
    return sp.JointSpectrum(grid, v, kind="amplitude", normalized=True)


@pytest.fixture
def small():
    return small_jsa()
