"""Numerical laboratory for ODE-type blowup of u_t = Lap u + |u|^(p-1) u.

The package follows the similarity-variable picture of blowup: fields are
rescaled around a candidate blowup point, decomposed against the Hermite
eigenfunctions of the drifted Laplacian in the Gaussian-weighted space, and
driven either by the full rescaled PDE or by the reduced laws of the tracked
mode coefficients.  Scenario runners package the qualitative claims
(profile convergence, unstable-mode dichotomy, stability of blowup time and
point) as machine-checkable experiments.

Layout:

* weighted_space: frames, grids, quadratures, the Hermite basis, A_z.
* spectral: mode decomposition and the backward-profile residual.
* nonlinearity: the quadratic interaction integrals of the tracked modes.
* recenter: the shift that kills the first-mode coefficients.
* rescaled_solver: IMEX integrator for the rescaled flow, shooting for the
  balanced unstable coefficient.
* physical_solver: explicit integrator to blowup, snapshot IO, rescaling.
* reduced_dynamics: the mode ODE system and its closed-form solutions.
* experiments: scenario reports; cli: the command-line driver.
"""

from .weighted_space import (
    Field,
    FrameParams,
    Grid,
    apply_Az,
    basis_indices,
    build_quadrature,
    EigenIndex,
    eval_eigenfunction,
    gradient,
    inner_product_rho,
    norm_h1_rho,
    norm_rho,
    rho_weight,
)
from .spectral import Decomposition, ModeVector, profile_residual, project, reconstruct
from .nonlinearity import (
    N_of,
    N_tilde,
    project_N,
    quadratic_mode_projection,
    signed_power,
)
from .recenter import (
    CenterSolve,
    DegenerateProfileError,
    shift_field,
    solve_center,
    transport_modes,
)
from .rescaled_solver import (
    RescaledState,
    Trajectory,
    canonical_profile_modes,
    make_profile_field,
    prepare_profile_b0,
    quasi_static_b0,
    run_rescaled,
    step_rescaled,
)
from .physical_solver import (
    BlowupReport,
    PhysicalRun,
    load_snapshot,
    report_to_json,
    rescale_to_similarity,
    run_to_blowup,
    save_snapshot,
    step_physical,
)
from .reduced_dynamics import (
    ModeODEState,
    ModeTrajectory,
    integrate_modes,
    profile_g,
    rhs_modes,
    riccati_escape_time,
    riccati_solution,
)
from .experiments import (
    ScenarioConfig,
    ScenarioReport,
    basis_report,
    scenario_blowup_time_continuity,
    scenario_dichotomy,
    scenario_profile_convergence,
    scenario_recenter_drift,
    scenario_stability_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Field",
    "FrameParams",
    "Grid",
    "apply_Az",
    "basis_indices",
    "build_quadrature",
    "EigenIndex",
    "eval_eigenfunction",
    "gradient",
    "inner_product_rho",
    "norm_h1_rho",
    "norm_rho",
    "rho_weight",
    "Decomposition",
    "ModeVector",
    "profile_residual",
    "project",
    "reconstruct",
    "N_of",
    "N_tilde",
    "project_N",
    "quadratic_mode_projection",
    "signed_power",
    "CenterSolve",
    "DegenerateProfileError",
    "shift_field",
    "solve_center",
    "transport_modes",
    "RescaledState",
    "Trajectory",
    "canonical_profile_modes",
    "make_profile_field",
    "prepare_profile_b0",
    "quasi_static_b0",
    "run_rescaled",
    "step_rescaled",
    "BlowupReport",
    "PhysicalRun",
    "load_snapshot",
    "report_to_json",
    "rescale_to_similarity",
    "run_to_blowup",
    "save_snapshot",
    "step_physical",
    "ModeODEState",
    "ModeTrajectory",
    "integrate_modes",
    "profile_g",
    "rhs_modes",
    "riccati_escape_time",
    "riccati_solution",
    "ScenarioConfig",
    "ScenarioReport",
    "basis_report",
    "scenario_blowup_time_continuity",
    "scenario_dichotomy",
    "scenario_profile_convergence",
    "scenario_recenter_drift",
    "scenario_stability_sweep",
]
