"""Shared solver runs.  Each is computed once per session and reused by the
module tests and the acceptance suite."""

import time

import numpy as np
import pytest

from siwkit import presets as P
from siwkit.fdfd import SolverConfig, extract_beta, simulate
from siwkit.geometry import generate_aperture_coupler, generate_rsiw, generate_tee_divider
from siwkit.optimizer import (
    TuningProblem,
    baseline_objective,
    default_xp_bounds,
    optimize_post,
)

SWEEP_FREQS = np.linspace(*P.BAND, 11)
CENTER = 0.5 * (P.BAND[0] + P.BAND[1])


def divider_preset():
    D = P.DIVIDER
    return generate_tee_divider(P.RSIW, D["arm_length"], D["post_radius"], D["post_offset"])


def coupler_preset():
    C = P.COUPLER
    return generate_aperture_coupler(P.RSIW, C["total_length"], C["w_ap"], C["l_ap"],
                                     C["w_s"], C["l_s"])


def tuning_problem():
    L = P.DIVIDER["arm_length"]
    r = P.DIVIDER["post_radius"]
    return TuningProblem(P.RSIW, L, default_xp_bounds(P.RSIW, L, r), radii=(r,))


@pytest.fixture(scope="session")
def straight_sweep():
    return simulate(generate_rsiw(P.RSIW, P.RSIW_LENGTH), SWEEP_FREQS)


@pytest.fixture(scope="session")
def divider_sweep():
    return simulate(divider_preset(), SWEEP_FREQS)


@pytest.fixture(scope="session")
def coupler_sweep():
    return simulate(coupler_preset(), SWEEP_FREQS)


@pytest.fixture(scope="session")
def beta_run():
    t0 = time.perf_counter()
    table = extract_beta(P.RSIW, P.BAND, 19)
    return table, time.perf_counter() - t0


@pytest.fixture(scope="session")
def beta_table(beta_run):
    return beta_run[0]


@pytest.fixture(scope="session")
def center_s21():
    """|S21| of the straight guide at band center for the default grid and
    for grids refined in each of the two resolution knobs."""
    layout = generate_rsiw(P.RSIW, P.RSIW_LENGTH)
    out = {}
    for name, cfg in (("base", SolverConfig()),
                      ("cpw", SolverConfig(cells_per_wavelength=40)),
                      ("cpd", SolverConfig(cells_per_diameter=12))):
        res = simulate(layout, [CENTER], cfg, excite=[1])
        out[name] = (abs(res.data.s[0, 1, 0]), res.grid)
    return out


@pytest.fixture(scope="session")
def tuned_divider():
    """Full post tuning of the divider preset, run twice to check that the
    history reproduces bit for bit, plus the post-free baseline."""
    problem = tuning_problem()
    return baseline_objective(problem), optimize_post(problem), optimize_post(problem)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda t: int(t.split()[0][3:])):
            terminalreporter.write_line(line)
