"""Gaussian-weighted function space L^2_rho for the similarity frame.

The weight is rho(z) = exp(-|z|^2/4).  Everything downstream (mode
projections, recentering, solver diagnostics) is built on the pieces here:
tensor Gauss-Hermite quadrature for integrals against rho, the normalized
eigenfunctions of A_z = Laplacian - (z/2).grad up to degree two, and a
finite-difference discretization of A_z.

Two integration paths coexist and are cross-checked in the tests:

* ``build_quadrature`` + ``inner_product_rho``: Gauss-Hermite nodes; grid
  fields are evaluated there by multilinear interpolation (clamped to zero
  beyond the grid).  Exact for polynomial integrands, O(h^2) fuzz when a
  sampled field has to be interpolated off its grid.
* ``grid_inner_product``: the field's own uniform grid with trapezoidal
  weights times rho.  For smooth fast-decaying integrands on L >= 10 grids
  this is accurate to machine precision (Euler-Maclaurin), and because no
  interpolation happens it keeps mode decompositions orthogonal to ~1e-13.
  The spectral layer uses this path for aligned-grid products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.ndimage import map_coordinates

__all__ = [
    "FrameParams",
    "QuadratureRule",
    "EigenIndex",
    "Grid",
    "Field",
    "build_quadrature",
    "basis_indices",
    "eval_eigenfunction",
    "eval_basis_matrix",
    "rho_weight",
    "as_evaluator",
    "inner_product_rho",
    "grid_inner_product",
    "grid_h1_product",
    "norm_rho",
    "norm_h1_rho",
    "apply_Az",
    "gradient",
]


# ---------------------------------------------------------------------------
# frame constants


@dataclass(frozen=True)
class FrameParams:
    """Problem constants p, n and the derived kappa, k0, c_p.

    kappa = (p-1)^(-1/(p-1)) is the flat stationary amplitude,
    k0 = (4 pi)^(-1/4) normalizes the constant eigenfunction, and
    c_p = sqrt(2) p k0^n / kappa drives the diagonal second-mode Riccati law.
    T and center carry the blowup frame when one has been estimated.
    """

    p: float
    n: int
    kappa: float = dc_field(init=False)
    k0: float = dc_field(init=False)
    c_p: float = dc_field(init=False)
    T: float | None = None
    center: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.p <= 1:
            raise ValueError(f"exponent p must exceed 1, got {self.p}")
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"dimension must be a positive integer, got {self.n}")
        kappa = (self.p - 1.0) ** (-1.0 / (self.p - 1.0))
        k0 = (4.0 * math.pi) ** -0.25
        c_p = math.sqrt(2.0) * self.p * k0**self.n / kappa
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "k0", k0)
        object.__setattr__(self, "c_p", c_p)
        if abs((self.p - 1.0) * kappa ** (self.p - 1.0) - 1.0) > 1e-12:
            raise ValueError("kappa inconsistent with p")

    def with_frame(self, T: float, center: tuple[float, ...]) -> "FrameParams":
        return FrameParams(self.p, self.n, T=T, center=tuple(center))


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor rule for integrals against rho(z) = exp(-|z|^2/4) on R^n.

    nodes has shape (M, n); weights (M,) are positive and sum to (4 pi)^(n/2).
    The 1D factor is Gauss-Hermite under the substitution z = 2y, so a rule
    with m points per axis integrates polynomials of degree <= 2m-1 exactly.
    """

    dimension: int
    points_per_axis: int
    nodes: np.ndarray
    weights: np.ndarray


def build_quadrature(n: int, m: int = 64) -> QuadratureRule:
    """Tensor Gauss-Hermite rule with m points per axis in dimension n."""
    if n not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {n}; expected 1, 2 or 3")
    if m < 8:
        raise ValueError(f"need at least 8 points per axis, got {m}")
    y, wy = np.polynomial.hermite.hermgauss(m)
    # int f(z) e^{-z^2/4} dz = 2 int f(2y) e^{-y^2} dy
    z1 = 2.0 * y
    w1 = 2.0 * wy
    mesh = np.meshgrid(*([z1] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    wmesh = np.meshgrid(*([w1] * n), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    return QuadratureRule(dimension=n, points_per_axis=m, nodes=nodes, weights=weights)


def rho_weight(z: np.ndarray) -> np.ndarray:
    """rho(z) = exp(-|z|^2/4); z has shape (..., n) or (...,) for n=1."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        return np.exp(-z * z / 4.0)
    return np.exp(-np.sum(z * z, axis=-1) / 4.0)


# ---------------------------------------------------------------------------
# eigenfunctions of A_z (degree <= 2, normalized in L^2_rho)


@dataclass(frozen=True)
class EigenIndex:
    """Index of a normalized eigenfunction: H0, H1(J), or H2(I,J) with I <= J.

    Axis labels are 1-based.  The eigenvalue of -A_z is degree/2:
    0 for H0, 1/2 for H1, 1 for H2.
    """

    degree: int
    i: int = 0
    j: int = 0

    def __post_init__(self) -> None:
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if self.degree == 1 and self.j < 1:
            raise ValueError("H1 index needs a positive axis label")
        if self.degree == 2 and not (1 <= self.i <= self.j):
            raise ValueError("H2 index needs 1 <= I <= J")

    @classmethod
    def H0(cls) -> "EigenIndex":
        return cls(0)

    @classmethod
    def H1(cls, j: int) -> "EigenIndex":
        return cls(1, j=j)

    @classmethod
    def H2(cls, i: int, j: int) -> "EigenIndex":
        if i > j:
            i, j = j, i
        return cls(2, i=i, j=j)

    @property
    def eigenvalue(self) -> float:
        return self.degree / 2.0


def basis_indices(n: int) -> list[EigenIndex]:
    """Tracked basis in wire order: H0, H1(1..n), H2 diagonal, H2 off-diagonal.

    Off-diagonal pairs run lexicographically (1,2), (1,3), ..., (n-1,n);
    this order is the serialization contract for ModeVector everywhere.
    """
    out = [EigenIndex.H0()]
    out += [EigenIndex.H1(j) for j in range(1, n + 1)]
    out += [EigenIndex.H2(j, j) for j in range(1, n + 1)]
    out += [EigenIndex.H2(i, j) for i, j in combinations(range(1, n + 1), 2)]
    return out


def eval_eigenfunction(idx: EigenIndex, z: np.ndarray, fp: FrameParams) -> np.ndarray:
    """Closed-form value of the normalized eigenfunction at points z.

    z has shape (..., n); scalars/1D arrays are accepted for n = 1.
    H0 = k0^n, H1_J = (k0^n/sqrt2) z_J, H2_JJ = (k0^n/(2 sqrt2))(z_J^2 - 2),
    H2_IJ = (k0^n/2) z_I z_J for I < J.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[-1] != fp.n:
        if fp.n == 1:
            z = z[..., np.newaxis]
        else:
            raise ValueError(f"points have last axis {z.shape[-1]}, expected n={fp.n}")
    k0n = fp.k0**fp.n
    if idx.degree == 0:
        return np.full(z.shape[:-1], k0n)
    if idx.degree == 1:
        return (k0n / math.sqrt(2.0)) * z[..., idx.j - 1]
    if idx.i == idx.j:
        zj = z[..., idx.j - 1]
        return (k0n / (2.0 * math.sqrt(2.0))) * (zj * zj - 2.0)
    return (k0n / 2.0) * z[..., idx.i - 1] * z[..., idx.j - 1]


def eval_basis_matrix(points: np.ndarray, fp: FrameParams) -> np.ndarray:
    """All tracked eigenfunctions at the given points, shape (n_basis, M)."""
    pts = np.asarray(points, dtype=float).reshape(-1, fp.n)
    return np.stack([eval_eigenfunction(ix, pts, fp) for ix in basis_indices(fp.n)])


# ---------------------------------------------------------------------------
# grids and sampled fields


@dataclass(frozen=True)
class Grid:
    """Uniform symmetric tensor grid: axis j covers [-L_j, L_j] with npts_j points.

    Point counts are odd so the origin is a grid point; spacing h_j follows.
    """

    extents: tuple[float, ...]
    npts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.extents) != len(self.npts):
            raise ValueError("extents and npts must have equal length")
        for L, m in zip(self.extents, self.npts):
            if L <= 0 or m < 2:
                raise ValueError("grid axes need L > 0 and at least 2 points")

    @classmethod
    def make(cls, n: int, L: float, h: float) -> "Grid":
        npts = int(round(2.0 * L / h)) + 1
        if npts % 2 == 0:
            npts += 1
        return cls(extents=(float(L),) * n, npts=(npts,) * n)

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(2.0 * L / (m - 1) for L, m in zip(self.extents, self.npts))

    def axis(self, j: int) -> np.ndarray:
        return np.linspace(-self.extents[j], self.extents[j], self.npts[j])

    def meshgrid(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis(j) for j in range(self.dim)], indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points, shape (prod(npts), dim)."""
        mesh = self.meshgrid()
        return np.stack([g.ravel() for g in mesh], axis=-1)


@dataclass
class Field:
    """Scalar samples on a Grid, tagged with the frame they live in."""

    grid: Grid
    values: np.ndarray
    frame: str = "similarity"  # "similarity" | "physical"
    blown_up: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.npts):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.npts}"
            )
        if self.frame not in ("similarity", "physical"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if not self.blown_up and not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite samples in a field not flagged blown_up")

    @classmethod
    def from_callable(cls, grid: Grid, f, frame: str = "similarity") -> "Field":
        pts = grid.points()
        vals = np.asarray(f(pts), dtype=float).reshape(grid.npts)
        return cls(grid=grid, values=vals, frame=frame)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation at arbitrary points; 0 beyond the extent."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.grid.dim)
        coords = np.empty((self.grid.dim, pts.shape[0]))
        for j in range(self.grid.dim):
            L = self.grid.extents[j]
            h = self.grid.h[j]
            coords[j] = (pts[:, j] + L) / h
        return map_coordinates(self.values, coords, order=1, mode="constant", cval=0.0)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.frame, self.blown_up)


def as_evaluator(f, fp: FrameParams | None = None):
    """Uniform point-evaluation view of a Field, callable, or EigenIndex."""
    if isinstance(f, Field):
        return f.evaluate
    if isinstance(f, EigenIndex):
        if fp is None:
            raise ValueError("need FrameParams to evaluate an EigenIndex")
        return lambda pts: eval_eigenfunction(f, pts, fp)
    if callable(f):
        return f
    raise TypeError(f"cannot evaluate object of type {type(f)!r}")


# ---------------------------------------------------------------------------
# inner products and norms


def inner_product_rho(f, g, q: QuadratureRule, fp: FrameParams | None = None) -> float:
    """<f, g>_rho by the Gauss-Hermite rule.

    f and g may be callables of points (M, n), Fields (interpolated onto the
    nodes, zero beyond their extent), or EigenIndex values (closed form).
    """
    fe = as_evaluator(f, fp)
    ge = as_evaluator(g, fp)
    fv = np.asarray(fe(q.nodes), dtype=float).ravel()
    gv = np.asarray(ge(q.nodes), dtype=float).ravel()
    return float(np.dot(q.weights, fv * gv))


@lru_cache(maxsize=32)
def _grid_mass(grid: Grid) -> np.ndarray:
    """Trapezoid weights times rho on the grid, shape = grid.npts."""
    mass = np.array(1.0)
    for j in range(grid.dim):
        ax = grid.axis(j)
        w = np.full(ax.shape, grid.h[j])
        w[0] *= 0.5
        w[-1] *= 0.5
        w = w * np.exp(-ax * ax / 4.0)
        mass = np.multiply.outer(mass, w)
    return mass


def grid_inner_product(grid: Grid, fvals: np.ndarray, gvals: np.ndarray) -> float:
    """<f, g>_rho for two sample arrays on the same grid (trapezoid x rho).

    Superalgebraically accurate for smooth integrands; no interpolation, so
    basis orthogonality survives to ~1e-13.  The aligned-grid companion of
    inner_product_rho.
    """
    return float(np.sum(_grid_mass(grid) * fvals * gvals))


def gradient(grid: Grid, vals: np.ndarray) -> list[np.ndarray]:
    """Second-order first derivatives per axis; one-sided at the boundary."""
    out = []
    for j in range(grid.dim):
        h = grid.h[j]
        v = np.moveaxis(vals, j, 0)
        d = np.empty_like(v)
        d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
        out.append(np.moveaxis(d, 0, j))
    return out


def _second_derivative(grid: Grid, vals: np.ndarray, j: int) -> np.ndarray:
    h = grid.h[j]
    v = np.moveaxis(vals, j, 0)
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    # one-sided second order (exact through cubics)
    d[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    d[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return np.moveaxis(d, 0, j)


def norm_rho(f: Field) -> float:
    """L^2_rho norm of a sampled field on its own grid."""
    return math.sqrt(max(grid_inner_product(f.grid, f.values, f.values), 0.0))


def norm_h1_rho(f: Field, q: QuadratureRule | None = None) -> float:
    """H^1_rho norm: sqrt(||f||^2_rho + sum_J ||d_J f||^2_rho).

    Derivatives are second-order finite differences on the field's grid.
    The quadrature argument is accepted for signature compatibility; the
    integrals run on the aligned grid.
    """
    if min(f.grid.npts) < 3:
        raise ValueError("grid too coarse for derivatives: need >= 3 points per axis")
    total = grid_inner_product(f.grid, f.values, f.values)
    for d in gradient(f.grid, f.values):
        total += grid_inner_product(f.grid, d, d)
    return math.sqrt(max(total, 0.0))


# ---------------------------------------------------------------------------
# discrete A_z


def apply_Az(f: Field) -> Field:
    """Discrete A_z f = Laplacian f - (z/2).grad f on the field's grid.

    Second-order central differences inside, one-sided second order at the
    boundary.  Exact on polynomials of degree <= 2 per axis, so the tracked
    eigenfunctions are reproduced to roundoff.
    """
    if f.frame != "similarity":
        raise ValueError("A_z acts on similarity-frame fields only")
    if min(f.grid.npts) < 4:
        raise ValueError("grid too coarse for A_z: need >= 4 points per axis")
    vals = f.values
    out = np.zeros_like(vals)
    grads = gradient(f.grid, vals)
    mesh = f.grid.meshgrid()
    for j in range(f.grid.dim):
        out += _second_derivative(f.grid, vals, j)
        out -= 0.5 * mesh[j] * grads[j]
    return Field(grid=f.grid, values=out, frame="similarity")
