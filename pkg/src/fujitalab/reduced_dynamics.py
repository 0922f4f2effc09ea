"""The finite-dimensional mode system slaved to the rescaled dynamics.

Leading-order laws for the tracked coefficients:

  b0'      = b0 + <N, H0>_quadratic
  b1_J'    = (1/2) b1_J
  b2_JJ'   = c_p b2_JJ^2 + (p k0^n / kappa) b0 b2_JJ
  b2_IJ'   = -(2/tau) b2_IJ

The quadratic closure of <N, H0> is (p/(2 kappa)) <W^2, H0>_rho with W
restricted to the tracked span; because every basis function is normalized
and H0 is constant, <H_k H_l, H0>_rho = k0^n delta_kl, so the closure is a
diagonal quadratic form.  Its constants are still computed by Gauss-Hermite
quadrature once per frame and cached, as a recorded artifact rather than an
asserted identity.

Two exact solutions anchor the tests: the diagonal Riccati subsystem (b0
frozen at zero) has 1/b2(tau) = 1/b2(tau0) - c_p (tau - tau0), escaping in
finite time on the positive branch, and the off-diagonal law integrates to
b2_IJ(tau) = b2_IJ(tau0) (tau0/tau)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .rescaled_solver import Trajectory, TrajectorySample
from .spectral import ModeVector, basis_indices, n_tracked_modes
from .weighted_space import (
    EigenIndex,
    FrameParams,
    build_quadrature,
    eval_eigenfunction,
    inner_product_rho,
)

__all__ = [
    "ModeODEState",
    "ModeTrajectory",
    "h0_closure_table",
    "rhs_modes",
    "integrate_modes",
    "profile_g",
    "riccati_solution",
    "offdiag_solution",
    "riccati_escape_time",
]


@dataclass
class ModeODEState:
    tau: float
    modes: ModeVector

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class ModeTrajectory:
    n: int
    taus: list[float] = dc_field(default_factory=list)
    states: list[ModeVector] = dc_field(default_factory=list)
    exit_reason: str = "completed"
    exit_tau: float = math.nan

    def series(self, picker) -> np.ndarray:
        return np.array([picker(m) for m in self.states])

    def to_trajectory(self) -> Trajectory:
        """Repackage in the PDE trajectory schema (wperp columns zero)."""
        traj = Trajectory(n=self.n)
        for tau, m in zip(self.taus, self.states):
            traj.samples.append(
                TrajectorySample(
                    tau=tau,
                    modes=m,
                    wperp_l2=0.0,
                    wperp_h1=0.0,
                    sup_w=math.nan,
                    c=np.zeros(self.n),
                )
            )
        traj.exit_reason = self.exit_reason
        traj.exit_tau = self.exit_tau
        return traj

    def to_csv(self, path) -> None:
        self.to_trajectory().to_csv(path)


@lru_cache(maxsize=16)
def _h0_closure_cached(p: float, n: int) -> tuple[float, ...]:
    fp = FrameParams(p=p, n=n)
    q = build_quadrature(n, m=32)
    h0 = EigenIndex.H0()
    table = []
    for ix in basis_indices(n):
        sq = lambda pts, ix=ix: eval_eigenfunction(ix, pts, fp) ** 2
        table.append(fp.p / (2.0 * fp.kappa) * inner_product_rho(sq, h0, q, fp))
    return tuple(table)


def h0_closure_table(fp: FrameParams) -> np.ndarray:
    """gamma_k = (p/(2 kappa)) <H_k^2, H0>_rho per tracked mode, by quadrature."""
    return np.array(_h0_closure_cached(fp.p, fp.n))


def rhs_modes(s: ModeODEState, fp: FrameParams) -> ModeVector:
    """Derivative of the tracked coefficients under the leading-order laws."""
    return ModeVector.from_array(
        fp.n, _rhs_array(s.tau, s.modes.to_array(), fp, frozenset())
    )


def _rhs_array(tau: float, y: np.ndarray, fp: FrameParams, frozen: frozenset) -> np.ndarray:
    n = fp.n
    gamma = h0_closure_table(fp)
    dy = np.zeros_like(y)
    b0 = y[0]
    b1 = y[1 : 1 + n]
    b2d = y[1 + n : 1 + 2 * n]
    b2o = y[1 + 2 * n :]
    if "b0" not in frozen:
        dy[0] = b0 + float(gamma @ (y * y))
    if "b1" not in frozen:
        dy[1 : 1 + n] = 0.5 * b1
    if "b2_diag" not in frozen:
        dy[1 + n : 1 + 2 * n] = fp.c_p * b2d**2 + (fp.p * fp.k0**fp.n / fp.kappa) * b0 * b2d
    if "b2_off" not in frozen:
        dy[1 + 2 * n :] = -(2.0 / tau) * b2o
    return dy


def integrate_modes(
    s0: ModeODEState,
    tau_end: float,
    fp: FrameParams,
    dtau: float = 1e-3,
    dtau_out: float = 0.01,
    frozen: frozenset | set = frozenset(),
    escape_cap: float = 1e6,
) -> ModeTrajectory:
    """RK4 on the mode laws from s0.tau to tau_end.

    frozen names coefficient blocks ("b0", "b1", "b2_diag", "b2_off") whose
    derivatives are pinned to zero, for studying an exact subsystem (e.g.
    the pure Riccati law with the unstable b0 held off).  Stops with
    "unstable-mode escape" when any coefficient leaves [-escape_cap,
    escape_cap] or turns non-finite; exit_tau records when.
    """
    if tau_end <= s0.tau:
        raise ValueError("tau_end must exceed the initial tau")
    frozen = frozenset(frozen)
    n = fp.n
    y = s0.modes.to_array()
    if y.shape != (n_tracked_modes(n),):
        raise ValueError("mode vector does not match the frame dimension")
    tau = s0.tau
    traj = ModeTrajectory(n=n)
    traj.taus.append(tau)
    traj.states.append(ModeVector.from_array(n, y))
    n_steps = int(round((tau_end - s0.tau) / dtau))
    stride = max(1, int(round(dtau_out / dtau)))
    exit_reason = "completed"
    for k in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = _rhs_array(tau, y, fp, frozen)
            k2 = _rhs_array(tau + dtau / 2, y + dtau / 2 * k1, fp, frozen)
            k3 = _rhs_array(tau + dtau / 2, y + dtau / 2 * k2, fp, frozen)
            k4 = _rhs_array(tau + dtau, y + dtau * k3, fp, frozen)
            y_new = y + dtau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        tau = s0.tau + k * dtau
        if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > escape_cap:
            exit_reason = "unstable-mode escape"
            if np.all(np.isfinite(y_new)):
                y = y_new
                traj.taus.append(tau)
                traj.states.append(ModeVector.from_array(n, y))
            break
        y = y_new
        if k % stride == 0 or k == n_steps:
            traj.taus.append(tau)
            traj.states.append(ModeVector.from_array(n, y))
    traj.exit_reason = exit_reason
    traj.exit_tau = tau
    return traj


def profile_g(m: ModeVector, z: np.ndarray, fp: FrameParams):
    """The closed-form profile kappa (1 - ((p-1)/kappa) b2.H2(z))^{-1/(p-1)}.

    Only the second-mode coefficients of m enter.  Raises when the base is
    nonpositive at any requested point (outside the profile's domain).
    """
    z = np.asarray(z, dtype=float)
    acc = 0.0
    idx = basis_indices(fp.n)
    arr = m.to_array()
    for k, ix in enumerate(idx):
        if ix.degree == 2 and arr[k] != 0.0:
            acc = acc + arr[k] * eval_eigenfunction(ix, z, fp)
    base = 1.0 - ((fp.p - 1.0) / fp.kappa) * acc
    if np.any(base <= 0.0):
        raise ValueError("outside profile domain: nonpositive base")
    out = fp.kappa * base ** (-1.0 / (fp.p - 1.0))
    return out if np.ndim(out) else float(out)


def riccati_solution(b_init: float, tau0: float, tau, c_p: float):
    """Exact solution of b' = c_p b^2: 1/b(tau) = 1/b(tau0) - c_p (tau - tau0)."""
    tau = np.asarray(tau, dtype=float)
    denom = 1.0 / b_init - c_p * (tau - tau0)
    out = 1.0 / denom
    return out if out.ndim else float(out)


def offdiag_solution(beta: float, tau0: float, tau):
    """Exact solution of b' = -(2/tau) b: beta (tau0/tau)^2."""
    tau = np.asarray(tau, dtype=float)
    out = beta * (tau0 / tau) ** 2
    return out if out.ndim else float(out)


def riccati_escape_time(b_init: float, tau0: float, c_p: float) -> float:
    """Finite escape time of the positive Riccati branch: tau0 + 1/(c_p b)."""
    if b_init <= 0:
        raise ValueError("escape needs a positive initial coefficient")
    return tau0 + 1.0 / (c_p * b_init)
