"""Shared fixtures: the expensive reference runs, computed once per session.

The rescaled-frame fixtures mirror the default configuration (p = 3, n = 1,
z-grid [-20, 20] at h = 0.05, tau0 = 10): the balanced-b0 shot, the long
stabilized canonical run, and a free run started from the shot value.  The
physical-frame fixtures are the reference bump blowup, its delta sweep, and
the shifted-bump runs the recentering checks compare against.  Scenario
reports are session fixtures as well, so the scenario unit tests and the
acceptance suite evaluate one shared set of runs.
"""

import time

import numpy as np
import pytest

from fujitalab.experiments import (
    ScenarioConfig,
    bump_datum,
    orthogonal_noise,
    run_sweep,
    scenario_blowup_time_continuity,
    scenario_dichotomy,
    scenario_profile_convergence,
    scenario_recenter_drift,
    scenario_stability_sweep,
)
from fujitalab.physical_solver import run_to_blowup
from fujitalab.rescaled_solver import (
    make_profile_field,
    prepare_profile_b0,
    run_rescaled,
)
from fujitalab.weighted_space import Field, FrameParams, Grid

TAU0 = 10.0

# build seconds per expensive fixture, so the acceptance tests can charge
# shared preparations against the stated runtime budgets
FIXTURE_ELAPSED = {}


def _timed(name, builder):
    t0 = time.perf_counter()
    out = builder()
    FIXTURE_ELAPSED[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def cfg():
    return ScenarioConfig.defaults()


@pytest.fixture(scope="session")
def fp1():
    return FrameParams(p=3.0, n=1)


@pytest.fixture(scope="session")
def fp2():
    return FrameParams(p=3.0, n=2)


@pytest.fixture(scope="session")
def grid1():
    return Grid.make(1, 20.0, 0.05)


@pytest.fixture(scope="session")
def noise1(grid1, fp1):
    return orthogonal_noise(grid1, fp1, seed=20260816, modes=3)


@pytest.fixture(scope="session")
def shot_b0(fp1, grid1, noise1):
    """Balanced b0 from bisection shooting at the default 16-unit horizon."""
    return _timed(
        "shot_b0",
        lambda: prepare_profile_b0(fp1, grid1, TAU0, noise=noise1, noise_amp=1e-3),
    )


@pytest.fixture(scope="session")
def canonical_traj(fp1, grid1, noise1):
    """25-unit stabilized canonical run shared by the dynamics checks."""
    w0 = make_profile_field(fp1, grid1, TAU0, noise=noise1, noise_amp=1e-3)
    return _timed(
        "canonical_traj",
        lambda: run_rescaled(
            w0,
            TAU0,
            TAU0 + 25.0,
            fp1,
            drift_mode="orthogonality",
            dtau=1e-3,
            dtau_out=0.05,
            stabilize_b0=True,
        ),
    )


@pytest.fixture(scope="session")
def pde_free_traj(fp1, grid1, noise1, shot_b0):
    """Free (unstabilized) 15-unit run from the shot datum."""
    w0 = make_profile_field(fp1, grid1, TAU0, b0=shot_b0, noise=noise1, noise_amp=1e-3)
    return _timed(
        "pde_free_traj",
        lambda: run_rescaled(
            w0, TAU0, TAU0 + 15.0, fp1,
            drift_mode="orthogonality", dtau=1e-3, dtau_out=0.05,
        ),
    )


# ---------------------------------------------------------------------------
# physical-frame reference runs


def _physical_grid(cfg):
    return Grid.make(
        cfg.getint("frame", "n"),
        cfg.getfloat("physical", "extent"),
        cfg.getfloat("physical", "spacing"),
    )


def _physical_run(cfg, u0):
    return run_to_blowup(
        u0,
        cfg.frame(),
        M_stop=cfg.getfloat("physical", "m_stop"),
        t_max=cfg.getfloat("physical", "t_max"),
        safety=cfg.getfloat("physical", "safety"),
        rate_factor=cfg.getfloat("physical", "rate_factor"),
    )


@pytest.fixture(scope="session")
def base_report(cfg):
    """Reference A = 3 centered bump blowup on the default physical grid."""
    return _timed("base_report", lambda: run_sweep(cfg, [])[0])


@pytest.fixture(scope="session")
def sweep_runs(cfg, base_report):
    """Perturbed runs for the default three-decade delta sweep."""
    return _timed(
        "sweep_runs",
        lambda: run_sweep(cfg, [1e-1, 1e-2, 1e-3], base_report=base_report)[1],
    )


@pytest.fixture(scope="session")
def const_report(cfg):
    """u0 = 1 everywhere: the exact ODE-blowup oracle run (T = 0.5)."""
    grid = _physical_grid(cfg)
    u0 = Field(grid, np.ones(grid.npts), "physical")
    return _timed("const_report", lambda: _physical_run(cfg, u0))


@pytest.fixture(scope="session")
def shifted03_report(cfg):
    """Bump shifted by the [recenter_drift] shift (0.3)."""
    grid = _physical_grid(cfg)
    u0 = bump_datum(
        grid, cfg.getfloat("physical", "amplitude"), cfg.getfloat("recenter_drift", "shift")
    )
    return _timed("shifted03_report", lambda: _physical_run(cfg, u0))


@pytest.fixture(scope="session")
def shifted07_report(cfg):
    """Bump shifted by 0.7 = 70 grid cells, for the equivariance checks."""
    grid = _physical_grid(cfg)
    u0 = bump_datum(grid, cfg.getfloat("physical", "amplitude"), 0.7)
    return _timed("shifted07_report", lambda: _physical_run(cfg, u0))


# ---------------------------------------------------------------------------
# scenario reports (one shared evaluation per session)


@pytest.fixture(scope="session")
def profile_report(cfg):
    return _timed("profile_report", lambda: scenario_profile_convergence(cfg))


@pytest.fixture(scope="session")
def dichotomy_report(cfg, shot_b0):
    return _timed("dichotomy_report", lambda: scenario_dichotomy(cfg, balanced_b0=shot_b0))


@pytest.fixture(scope="session")
def stability_report(cfg, base_report, sweep_runs):
    return _timed(
        "stability_report",
        lambda: scenario_stability_sweep(cfg, base_report=base_report, runs=sweep_runs),
    )


@pytest.fixture(scope="session")
def continuity_report(cfg, base_report, sweep_runs):
    return _timed(
        "continuity_report",
        lambda: scenario_blowup_time_continuity(
            cfg, base_report=base_report, runs=sweep_runs
        ),
    )


@pytest.fixture(scope="session")
def recenter_report(cfg, base_report, shifted03_report):
    return _timed(
        "recenter_report",
        lambda: scenario_recenter_drift(
            cfg, base_report=base_report, shifted_report=shifted03_report
        ),
    )
