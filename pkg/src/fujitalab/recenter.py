"""Recentering: the shift xi that kills every first-mode coefficient.

A nondegenerate profile has a moving quadratic maximum; the recentering map
returns the shift Psi(w) = xi with <w(. + xi), H_{1,J}>_rho = 0 for all J,
found by Newton iteration.  The Jacobian is exact and closed-form:
d/dxi_J <w(. + xi), H_{1,I}>_rho = <w(. + xi), H_{2,IJ}>_rho for I = J and
(1/sqrt2) <w(. + xi), H_{2,IJ}>_rho otherwise, because the adjoint of d_J in
L^2_rho maps H_{1,I} to exactly those second modes.

Shifted inner products are evaluated by moving the shift onto the weight:
<w(. + xi), H>_rho = int w(y) H(y - xi) rho(y - xi) dy, a trapezoid sum over
the field's own grid with no interpolation of w, accurate to machine
precision for smooth decaying fields.  (Interpolating w at shifted nodes
would cap the achievable accuracy at O(h^2), far above the 1e-12 residual
target.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import ModeVector, basis_indices, n_tracked_modes, project
from .weighted_space import (
    EigenIndex,
    Field,
    FrameParams,
    Grid,
    QuadratureRule,
    eval_eigenfunction,
    norm_rho,
    rho_weight,
)

__all__ = [
    "CenterSolve",
    "DegenerateProfileError",
    "shifted_inner_products",
    "center_residual",
    "center_jacobian",
    "solve_center",
    "shift_basis_expansion",
    "transport_modes",
    "project_shifted",
    "shift_field",
]


class DegenerateProfileError(ValueError):
    """The Jacobian of the centering residual is numerically singular."""


@dataclass
class CenterSolve:
    """Result of a recentering solve.

    xi is the shift Psi(w); residual = max_J |<w(. + xi), H_{1,J}>_rho|;
    c1_ratio reports |xi| / ||w - kappa - m sum_J H_{2,JJ}||_rho with m the
    mean diagonal coefficient (the Lipschitz diagnostic of the recentering
    map near a profile), when that distance is positive.
    """

    xi: np.ndarray
    residual: float
    iterations: int
    converged: bool
    c1_ratio: float | None = None


def _trap_weights(grid: Grid) -> np.ndarray:
    """Plain tensor trapezoid weights (no rho factor), shape = grid.npts."""
    w = np.array(1.0)
    for j in range(grid.dim):
        wj = np.full(grid.npts[j], grid.h[j])
        wj[0] *= 0.5
        wj[-1] *= 0.5
        w = np.multiply.outer(w, wj)
    return w


def shifted_inner_products(
    w: Field, xi: np.ndarray, fp: FrameParams, targets: list[EigenIndex]
) -> np.ndarray:
    """<w(. + xi), H>_rho for each target H, via the substitution y = z + xi.

    The integral becomes int w(y) H(y - xi) rho(y - xi) dy over the field's
    own grid, so w is never interpolated.
    """
    xi = np.asarray(xi, dtype=float).reshape(fp.n)
    grid = w.grid
    for j in range(grid.dim):
        if abs(xi[j]) > grid.extents[j] / 4.0:
            raise ValueError(
                f"shift component {xi[j]:g} exceeds a quarter of the extent "
                f"{grid.extents[j]:g}"
            )
    pts = grid.points() - xi
    mass = (_trap_weights(grid).ravel() * rho_weight(pts)) * w.values.ravel()
    return np.array(
        [float(np.dot(eval_eigenfunction(t, pts, fp), mass)) for t in targets]
    )


def center_residual(
    w: Field, xi: np.ndarray, fp: FrameParams, q: QuadratureRule | None = None
) -> np.ndarray:
    """F(w, xi) = (<w(. + xi), H_{1,J}>_rho)_J, the vector Newton drives to 0."""
    targets = [EigenIndex.H1(j) for j in range(1, fp.n + 1)]
    return shifted_inner_products(w, xi, fp, targets)


def center_jacobian(
    w: Field, xi: np.ndarray, fp: FrameParams, q: QuadratureRule | None = None
) -> np.ndarray:
    """Exact Jacobian dF/dxi: second-mode projections of the shifted field."""
    pairs = [(i, j) for i in range(1, fp.n + 1) for j in range(i, fp.n + 1)]
    targets = [EigenIndex.H2(i, j) for i, j in pairs]
    vals = dict(zip(pairs, shifted_inner_products(w, xi, fp, targets)))
    J = np.empty((fp.n, fp.n))
    for i in range(1, fp.n + 1):
        for j in range(1, fp.n + 1):
            a, b = min(i, j), max(i, j)
            J[i - 1, j - 1] = vals[(a, b)] if a == b else vals[(a, b)] / math.sqrt(2.0)
    return J


def _check_nonsingular(J: np.ndarray, floor: float = 0.0) -> None:
    # floor guards the all-flat case: J built from roundoff alone has a tiny
    # norm, so det vs ||J||^n is blind to it; measure against the field scale
    scale = np.linalg.norm(J, 2)
    if scale <= floor or abs(np.linalg.det(J)) < 1e-12 * scale ** J.shape[0]:
        raise DegenerateProfileError("degenerate profile: singular centering Jacobian")


def solve_center(
    w: Field,
    xi0: np.ndarray | None = None,
    fp: FrameParams | None = None,
    q: QuadratureRule | None = None,
    tol: float = 1e-12,
    max_iter: int = 50,
) -> CenterSolve:
    """Newton iteration on F(w, .) with step damping.

    xi0 defaults to the grid argmax of w (the bump center seeds the basin).
    Convergence means max_J |F_J| < tol * scale(w), scale(w) = max(1,
    ||w - kappa||_rho).  A singular Jacobian raises DegenerateProfileError;
    running out of iterations returns the best iterate with converged=False.
    """
    if fp is None:
        raise ValueError("solve_center needs FrameParams")
    if xi0 is None:
        flat = int(np.argmax(w.values))
        loc = np.unravel_index(flat, w.values.shape)
        xi0 = np.array([w.grid.axis(j)[loc[j]] for j in range(w.grid.dim)])
    xi = np.asarray(xi0, dtype=float).reshape(fp.n).copy()
    for j in range(w.grid.dim):
        if abs(xi[j]) > w.grid.extents[j] / 8.0:
            xi[j] = 0.0  # far-out seed is likely a boundary artifact
    scale = max(1.0, norm_rho(Field(w.grid, w.values - fp.kappa, w.frame)))
    F = center_residual(w, xi, fp)
    best_xi, best_F = xi.copy(), F.copy()
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(F)) < tol * scale:
            # uniqueness certificate: the center is only well defined where
            # the Jacobian is invertible (F vanishes identically on flat data)
            _check_nonsingular(center_jacobian(w, xi, fp), floor=1e-12 * scale)
            return CenterSolve(
                xi=xi,
                residual=float(np.max(np.abs(F))),
                iterations=iterations - 1,
                converged=True,
                c1_ratio=_c1_ratio(w, xi, fp),
            )
        J = center_jacobian(w, xi, fp)
        _check_nonsingular(J, floor=1e-12 * scale)
        step = np.linalg.solve(J, -F)
        # damping: halve up to 6 times until ||F|| decreases; accept the
        # smallest step regardless (Newton may sit at the roundoff floor)
        lam = 1.0
        for k in range(7):
            trial = xi + lam * step
            F_trial = center_residual(w, trial, fp)
            if np.linalg.norm(F_trial) < np.linalg.norm(F) or k == 6:
                break
            lam *= 0.5
        xi, F = trial, F_trial
        if np.linalg.norm(F) < np.linalg.norm(best_F):
            best_xi, best_F = xi.copy(), F.copy()
    converged = bool(np.max(np.abs(F)) < tol * scale)
    if converged:
        _check_nonsingular(center_jacobian(w, xi, fp), floor=1e-12 * scale)
    else:
        xi, F = best_xi, best_F
    return CenterSolve(
        xi=xi,
        residual=float(np.max(np.abs(F))),
        iterations=iterations,
        converged=converged,
        c1_ratio=_c1_ratio(w, xi, fp),
    )


def _c1_ratio(w: Field, xi: np.ndarray, fp: FrameParams) -> float | None:
    """|xi| / distance-to-nearest-diagonal-profile, the Lipschitz diagnostic."""
    dec = project(w, fp)
    m = float(np.mean(dec.modes.b2_diag))
    rest = dec.modes.copy()
    rest.b2_diag = rest.b2_diag - m
    dist = math.sqrt(rest.norm_sq() + norm_rho(dec.remainder) ** 2)
    if dist <= 0.0:
        return None
    return float(np.linalg.norm(xi) / dist)


def shift_basis_expansion(xi: np.ndarray, fp: FrameParams) -> np.ndarray:
    """Exact expansion matrix S of the shifted basis: H_k(z + xi) = sum_l S[k,l] H_l(z).

    Rows and columns follow the wire order (H0, H1s, H2 diagonal, H2 off).
    The identities:
      H0(z+xi)      = H0
      H1J(z+xi)     = H1J + (xi_J/sqrt2) H0
      H2JJ(z+xi)    = H2JJ + xi_J H1J + (xi_J^2/(2 sqrt2)) H0
      H2IJ(z+xi)    = H2IJ + (xi_J/sqrt2) H1I + (xi_I/sqrt2) H1J + (xi_I xi_J/2) H0
    """
    xi = np.asarray(xi, dtype=float).reshape(fp.n)
    n = fp.n
    idx = basis_indices(n)
    pos = {(ix.degree, ix.i, ix.j): k for k, ix in enumerate(idx)}
    S = np.eye(n_tracked_modes(n))
    rt2 = math.sqrt(2.0)
    for j in range(1, n + 1):
        row = pos[(1, 0, j)]
        S[row, pos[(0, 0, 0)]] = xi[j - 1] / rt2
    for j in range(1, n + 1):
        row = pos[(2, j, j)]
        S[row, pos[(1, 0, j)]] = xi[j - 1]
        S[row, pos[(0, 0, 0)]] = xi[j - 1] ** 2 / (2.0 * rt2)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            row = pos[(2, i, j)]
            S[row, pos[(1, 0, i)]] = xi[j - 1] / rt2
            S[row, pos[(1, 0, j)]] = xi[i - 1] / rt2
            S[row, pos[(0, 0, 0)]] = xi[i - 1] * xi[j - 1] / 2.0
    return S


def transport_modes(m: ModeVector, xi: np.ndarray, fp: FrameParams) -> ModeVector:
    """Coefficients of z -> w(z + xi) given those of w, for w in the tracked span.

    w(z+xi) = kappa + sum_k b_k H_k(z+xi) = kappa + sum_l (S^T b)_l H_l(z).
    """
    S = shift_basis_expansion(xi, fp)
    return ModeVector.from_array(fp.n, S.T @ m.to_array())


def project_shifted(w: Field, xi: np.ndarray, fp: FrameParams) -> ModeVector:
    """Tracked coefficients of w(. + xi), via shifted-weight quadrature.

    Equals project(w shifted by xi) without ever resampling w.
    """
    coeffs = shifted_inner_products(w, np.asarray(xi, float), fp, basis_indices(fp.n))
    # subtract the kappa background: <kappa, H>_rho = (kappa/k0^n) delta_H0
    coeffs[0] -= fp.kappa / fp.k0**fp.n
    return ModeVector.from_array(fp.n, coeffs)


def shift_field(w: Field, xi: np.ndarray, fp: FrameParams | None = None) -> Field:
    """Resample z -> w(z + xi) on the same grid (multilinear, O(h^2))."""
    xi = np.asarray(xi, dtype=float).reshape(w.grid.dim)
    vals = w.evaluate(w.grid.points() + xi).reshape(w.grid.npts)
    return Field(grid=w.grid, values=vals, frame=w.frame)
