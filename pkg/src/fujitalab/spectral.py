"""Mode decomposition of similarity-frame fields around kappa.

A field w is split as w = kappa + b0 H0 + b1.H1 + b2.H2 + wperp with wperp
orthogonal (in L^2_rho) to every tracked eigenfunction.  Coefficients are
integrals of w - kappa against the closed-form eigenfunctions; for sampled
fields they are evaluated with the aligned-grid trapezoid rule, which keeps
the remainder orthogonal to ~1e-13 because basis samples and field samples
live on the same nodes and no interpolation error enters the Gram matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .weighted_space import (
    EigenIndex,
    Field,
    FrameParams,
    Grid,
    QuadratureRule,
    basis_indices,
    eval_eigenfunction,
    grid_inner_product,
    _grid_mass,
    norm_h1_rho,
    norm_rho,
)

__all__ = [
    "ModeVector",
    "Decomposition",
    "n_tracked_modes",
    "off_diagonal_pairs",
    "basis_on_grid",
    "project",
    "reconstruct",
    "profile_residual",
    "profile_comparison_field",
]


def n_tracked_modes(n: int) -> int:
    """1 + n + n(n+1)/2 tracked coefficients."""
    return 1 + n + n * (n + 1) // 2


def off_diagonal_pairs(n: int) -> list[tuple[int, int]]:
    """Lexicographic (I, J) pairs with I < J, 1-based; the wire order."""
    return list(combinations(range(1, n + 1), 2))


@dataclass
class ModeVector:
    """Coefficients b0, b1 (length n), b2_diag (length n), b2_off (n(n-1)/2).

    Off-diagonal entries follow off_diagonal_pairs(n).  Serializes to the
    flat array [b0, b1..., b2_diag..., b2_off...].
    """

    n: int
    b0: float = 0.0
    b1: np.ndarray | None = None
    b2_diag: np.ndarray | None = None
    b2_off: np.ndarray | None = None

    def __post_init__(self) -> None:
        n_off = self.n * (self.n - 1) // 2
        self.b0 = float(self.b0)
        self.b1 = np.zeros(self.n) if self.b1 is None else np.asarray(self.b1, float).copy()
        self.b2_diag = (
            np.zeros(self.n) if self.b2_diag is None else np.asarray(self.b2_diag, float).copy()
        )
        self.b2_off = (
            np.zeros(n_off) if self.b2_off is None else np.asarray(self.b2_off, float).copy()
        )
        if self.b1.shape != (self.n,) or self.b2_diag.shape != (self.n,):
            raise ValueError("b1 and b2_diag must have length n")
        if self.b2_off.shape != (n_off,):
            raise ValueError(f"b2_off must have length n(n-1)/2 = {n_off}")
        if not (
            np.isfinite(self.b0)
            and np.all(np.isfinite(self.b1))
            and np.all(np.isfinite(self.b2_diag))
            and np.all(np.isfinite(self.b2_off))
        ):
            raise ValueError("mode coefficients must be finite")

    @classmethod
    def zeros(cls, n: int) -> "ModeVector":
        return cls(n=n)

    def to_array(self) -> np.ndarray:
        return np.concatenate(([self.b0], self.b1, self.b2_diag, self.b2_off))

    @classmethod
    def from_array(cls, n: int, arr: np.ndarray) -> "ModeVector":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (n_tracked_modes(n),):
            raise ValueError(f"expected {n_tracked_modes(n)} entries for n={n}")
        n_off = n * (n - 1) // 2
        return cls(
            n=n,
            b0=arr[0],
            b1=arr[1 : 1 + n],
            b2_diag=arr[1 + n : 1 + 2 * n],
            b2_off=arr[1 + 2 * n : 1 + 2 * n + n_off],
        )

    def coefficient(self, idx: EigenIndex) -> float:
        if idx.degree == 0:
            return self.b0
        if idx.degree == 1:
            return float(self.b1[idx.j - 1])
        if idx.i == idx.j:
            return float(self.b2_diag[idx.j - 1])
        return float(self.b2_off[off_diagonal_pairs(self.n).index((idx.i, idx.j))])

    def norm_sq(self) -> float:
        """b0^2 + |b1|^2 + |b2|^2 (Parseval contribution of the tracked modes)."""
        return float(
            self.b0**2
            + np.sum(self.b1**2)
            + np.sum(self.b2_diag**2)
            + np.sum(self.b2_off**2)
        )

    def copy(self) -> "ModeVector":
        return ModeVector.from_array(self.n, self.to_array())

    def to_json(self) -> str:
        return json.dumps(self.to_array().tolist())

    @classmethod
    def from_json(cls, n: int, text: str) -> "ModeVector":
        return cls.from_array(n, np.array(json.loads(text), dtype=float))


@dataclass
class Decomposition:
    """Tracked modes plus the orthogonal remainder of a field at time tau."""

    modes: ModeVector
    remainder: Field
    tau: float = 0.0


@lru_cache(maxsize=16)
def _basis_samples(grid: Grid, n: int) -> np.ndarray:
    """All tracked eigenfunctions sampled on the grid, shape (n_basis, ...)."""
    fp = FrameParams(p=2.0, n=n)  # eigenfunctions depend on n only
    pts = grid.points()
    vals = [eval_eigenfunction(ix, pts, fp).reshape(grid.npts) for ix in basis_indices(n)]
    return np.stack(vals)


def basis_on_grid(grid: Grid, n: int) -> np.ndarray:
    """Cached closed-form basis samples on a grid (read-only view)."""
    out = _basis_samples(grid, n)
    out.flags.writeable = False
    return out


def project(
    w: Field, fp: FrameParams, q: QuadratureRule | None = None, tau: float = 0.0
) -> Decomposition:
    """Decompose w into tracked coefficients and the orthogonal remainder.

    Coefficients are <w - kappa, H>_rho evaluated with the trapezoid-times-rho
    rule on the field's own grid (exact at machine precision for these
    integrands); the remainder is stored as a grid field.  The quadrature
    argument is kept in the signature for interface symmetry.
    """
    if w.frame != "similarity":
        raise ValueError("projection is defined for similarity-frame fields")
    if w.grid.dim != fp.n:
        raise ValueError(f"field dimension {w.grid.dim} does not match n={fp.n}")
    if q is not None and q.dimension != fp.n:
        raise ValueError(f"quadrature dimension {q.dimension} does not match n={fp.n}")
    resid = w.values - fp.kappa
    basis = basis_on_grid(w.grid, fp.n)
    mass = _grid_mass(w.grid)
    weighted = (mass * resid).ravel()
    coeffs = basis.reshape(basis.shape[0], -1) @ weighted
    modes = ModeVector.from_array(fp.n, coeffs)
    remainder_vals = resid - np.tensordot(coeffs, basis, axes=(0, 0))
    remainder = Field(grid=w.grid, values=remainder_vals, frame="similarity")
    return Decomposition(modes=modes, remainder=remainder, tau=float(tau))


def reconstruct(m: ModeVector, fp: FrameParams, grid: Grid) -> Field:
    """kappa + b0 H0 + b1.H1 + b2.H2 sampled on the grid."""
    if m.n != fp.n or grid.dim != fp.n:
        raise ValueError("mode vector, frame and grid dimensions must agree")
    basis = basis_on_grid(grid, fp.n)
    vals = fp.kappa + np.tensordot(m.to_array(), basis, axes=(0, 0))
    return Field(grid=grid, values=vals, frame="similarity")


def profile_comparison_field(w: Field, tau: float, fp: FrameParams) -> Field:
    """w - kappa + (1/(c_p tau)) sum_J H_{2,JJ} as a field on w's grid."""
    basis = basis_on_grid(w.grid, fp.n)
    diag_sum = basis[1 + fp.n : 1 + 2 * fp.n].sum(axis=0)
    vals = w.values - fp.kappa + diag_sum / (fp.c_p * tau)
    return Field(grid=w.grid, values=vals, frame="similarity")


def profile_residual(w: Field, tau: float, fp: FrameParams, q: QuadratureRule | None = None) -> float:
    """tau * || w - kappa + (1/(c_p tau)) sum_J H_{2,JJ} ||_{H^1_rho}.

    Vanishes exactly on the canonical backward profile; measures how far a
    rescaled solution is from it, in the scale where convergence means -> 0.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    return tau * norm_h1_rho(profile_comparison_field(w, tau, fp))
