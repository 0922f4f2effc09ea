"""The nonlinear remainder N(W) and its mode projections.

Writing w = kappa + W, the reaction term splits as
|w|^{p-1} w = kappa^p + p kappa^{p-1} W + N(W) with
N(W) = |kappa+W|^{p-1}(kappa+W) - kappa^p - p kappa^{p-1} W,
so N collects everything beyond the linearization: N(0) = 0, N'(0) = 0,
N(W) = (p/(2 kappa)) W^2 + O(W^3).

N_tilde is the convex continuation used for one-sided comparison arguments:
it agrees with N for s >= -kappa and continues quadratically below, keeping
convexity on all of R.

The quadratic mode projections <(b2.H2)^2, H_2> have closed-form leading
terms built from two Gaussian cubic moments,
<H_2JJ, H_2JJ^2> = 2 sqrt2 k0^n  and  <H_2JJ, H_2IJ^2> = sqrt2 k0^n,
which tie to the Riccati constant through 2 sqrt2 k0^n (p/(2 kappa)) = c_p.
"""

from __future__ import annotations

import math

import numpy as np

from .spectral import Decomposition, ModeVector, basis_on_grid, off_diagonal_pairs
from .weighted_space import Field, FrameParams, QuadratureRule, _grid_mass

__all__ = [
    "N_of",
    "N_tilde",
    "signed_power",
    "project_N",
    "project_N_values",
    "quadratic_mode_projection",
    "quadratic_coefficient",
]


def signed_power(v, p: float):
    """|v|^{p-1} v, safe for negative bases and non-integer p."""
    v = np.asarray(v, dtype=float)
    out = np.abs(v) ** (p - 1.0) * v
    return out if out.ndim else float(out)


def quadratic_coefficient(fp: FrameParams) -> float:
    """p/(2 kappa), the coefficient of W^2 in the expansion of N."""
    return fp.p / (2.0 * fp.kappa)


def N_of(W, fp: FrameParams):
    """N(W) pointwise; accepts scalars, arrays, or Fields (returns like type)."""
    if isinstance(W, Field):
        return Field(
            grid=W.grid,
            values=N_of(W.values, fp),
            frame=W.frame,
            blown_up=W.blown_up,
        )
    W = np.asarray(W, dtype=float)
    out = (
        signed_power(fp.kappa + W, fp.p)
        - fp.kappa**fp.p
        - fp.p * fp.kappa ** (fp.p - 1.0) * W
    )
    return out if np.ndim(out) else float(out)


def N_tilde(s, fp: FrameParams):
    """Convex continuation of N: equal to N(s) for s >= -kappa, quadratic below.

    The lower branch (p-1)kappa^p - 2p kappa^{p-1}(kappa+s) + (kappa+s)^2
    matches N at s = -kappa (both give (p-1)kappa^p) and has a slope jump
    that preserves convexity on all of R.
    """
    s_arr = np.asarray(s, dtype=float)
    base = fp.kappa + s_arr
    below = (
        (fp.p - 1.0) * fp.kappa**fp.p
        - 2.0 * fp.p * fp.kappa ** (fp.p - 1.0) * base
        + base * base
    )
    out = np.where(s_arr >= -fp.kappa, N_of(s_arr, fp), below)
    return out if out.ndim else float(out)


def project_N_values(W_vals: np.ndarray, grid, fp: FrameParams) -> ModeVector:
    """<N(W), H>_rho for every tracked H, from W samples on a grid."""
    nvals = N_of(W_vals, fp)
    basis = basis_on_grid(grid, fp.n)
    weighted = (_grid_mass(grid) * nvals).ravel()
    coeffs = basis.reshape(basis.shape[0], -1) @ weighted
    return ModeVector.from_array(fp.n, coeffs)


def project_N(
    w_decomp: Decomposition, fp: FrameParams, q: QuadratureRule | None = None
) -> ModeVector:
    """Projections <N(W), H>_rho of the nonlinearity onto the tracked basis.

    W = w - kappa is rebuilt on the remainder's grid from the decomposition
    (tracked modes plus remainder) and N is evaluated pointwise there; the
    integrals use the aligned-grid trapezoid rule.
    """
    if not np.all(np.isfinite(w_decomp.remainder.values)):
        raise ValueError("decomposition remainder has non-finite samples")
    grid = w_decomp.remainder.grid
    basis = basis_on_grid(grid, fp.n)
    W_vals = (
        np.tensordot(w_decomp.modes.to_array(), basis, axes=(0, 0))
        + w_decomp.remainder.values
    )
    return project_N_values(W_vals, grid, fp)


def quadratic_mode_projection(m: ModeVector, fp: FrameParams) -> ModeVector:
    """Leading closed-form terms of <(b2.H2)^2, H_2.>_rho per second mode.

    Diagonal target JJ: 2 sqrt2 k0^n b_{2,JJ}^2 (exact when b2_off = 0);
    off-diagonal target IJ: 2 sqrt2 k0^n (b_{2,II} + b_{2,JJ}) b_{2,IJ}
    (exact when no other off-diagonal coefficient is active).  Requires
    b0 = b1 = 0: the quadratic is taken over the second modes alone.
    """
    if m.n != fp.n:
        raise ValueError("mode vector dimension does not match the frame")
    if m.b0 != 0.0 or np.any(m.b1 != 0.0):
        raise ValueError("quadratic projection is defined for b0 = b1 = 0")
    amp = 2.0 * math.sqrt(2.0) * fp.k0**fp.n
    out = ModeVector.zeros(fp.n)
    out.b2_diag = amp * m.b2_diag**2
    pairs = off_diagonal_pairs(fp.n)
    off = np.zeros(len(pairs))
    for k, (i, j) in enumerate(pairs):
        off[k] = amp * (m.b2_diag[i - 1] + m.b2_diag[j - 1]) * m.b2_off[k]
    out.b2_off = off
    return out
