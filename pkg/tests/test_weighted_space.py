"""Weighted-space layer: frame constants, quadrature, basis, norms, A_z.

Expected numbers are frozen closed-form literals (40-digit evaluations of
the defining formulas), not values read back from the implementation.
"""

import math

import numpy as np
import pytest

from fujitalab.weighted_space import (
    EigenIndex,
    Field,
    FrameParams,
    Grid,
    apply_Az,
    basis_indices,
    build_quadrature,
    eval_eigenfunction,
    gradient,
    grid_inner_product,
    inner_product_rho,
    norm_h1_rho,
    norm_rho,
    rho_weight,
)

K0 = 0.53112596601359845724  # (4 pi)^(-1/4)
KAPPA3 = 0.7071067811865475244  # (p-1)^(-1/(p-1)) at p = 3
MOMENT0 = 3.5449077018110320546  # sqrt(4 pi)


# ---------------------------------------------------------------------------
# frame constants


def test_frame_constants_p3_n1(fp1):
    np.testing.assert_allclose(fp1.kappa, KAPPA3, rtol=1e-15)
    np.testing.assert_allclose(fp1.k0, K0, rtol=1e-15)
    np.testing.assert_allclose(fp1.c_p, 3.1867557960815907434, rtol=1e-15)


@pytest.mark.parametrize(
    "p, n, kappa, c_p",
    [
        (3.0, 2, 0.7071067811865475244, 1.6925687506432688608),
        (2.0, 1, 1.0, 1.5022510889298849657),
        (5.0, 1, 0.7071067811865475244, math.sqrt(2) * 5 * K0 / KAPPA3),
    ],
)
def test_frame_constants_other_frames(p, n, kappa, c_p):
    fp = FrameParams(p=p, n=n)
    np.testing.assert_allclose(fp.kappa, kappa, rtol=1e-14)
    np.testing.assert_allclose(fp.c_p, c_p, rtol=1e-14)


@pytest.mark.parametrize("p", [1.0, 0.5, -3.0])
def test_frame_rejects_bad_exponent(p):
    with pytest.raises(ValueError):
        FrameParams(p=p, n=1)


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_frame_rejects_bad_dimension(n):
    with pytest.raises(ValueError):
        FrameParams(p=3.0, n=n)


def test_kappa_defining_identity_over_p():
    # (p-1) kappa^(p-1) = 1 for every admissible exponent
    rng = np.random.default_rng(7)
    for p in 1.0 + 10.0 ** rng.uniform(-2, 1, size=200):
        fp = FrameParams(p=float(p), n=1)
        np.testing.assert_allclose((p - 1.0) * fp.kappa ** (p - 1.0), 1.0, rtol=1e-12)


def test_with_frame_carries_blowup_data(fp1):
    fp = fp1.with_frame(0.25, (0.3,))
    assert fp.T == 0.25 and fp.center == (0.3,)
    assert fp.p == fp1.p and fp.kappa == fp1.kappa


# ---------------------------------------------------------------------------
# quadrature


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quadrature_total_mass(n):
    q = build_quadrature(n, m=24)
    np.testing.assert_allclose(np.sum(q.weights), MOMENT0**n, rtol=1e-13)
    assert q.nodes.shape == (24**n, n)
    assert np.all(q.weights > 0)


@pytest.mark.parametrize(
    "order, moment",
    [
        (2, 7.0898154036220641092),  # 2 sqrt(4 pi)
        (4, 42.538892421732384655),  # 12 sqrt(4 pi)
        (6, 425.38892421732384655),  # 120 sqrt(4 pi)
        (8, 5955.4449390425338517),  # 1680 sqrt(4 pi)
    ],
)
def test_quadrature_gaussian_moments(order, moment):
    q = build_quadrature(1)
    half = order // 2
    got = inner_product_rho(
        lambda pts: pts[:, 0] ** half, lambda pts: pts[:, 0] ** half, q
    )
    np.testing.assert_allclose(got, moment, rtol=1e-13)


def test_quadrature_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_quadrature(4)
    with pytest.raises(ValueError):
        build_quadrature(1, m=4)


def test_rho_weight_values():
    np.testing.assert_allclose(rho_weight(np.array([2.0])), math.exp(-1.0), rtol=1e-15)
    np.testing.assert_allclose(
        rho_weight(np.array([[1.0, 1.0]])), math.exp(-0.5), rtol=1e-15
    )


# ---------------------------------------------------------------------------
# eigenfunctions


def test_eigenfunction_point_values(fp1):
    z = np.array([1.0])
    np.testing.assert_allclose(
        eval_eigenfunction(EigenIndex.H0(), z, fp1), K0, rtol=1e-14
    )
    np.testing.assert_allclose(
        eval_eigenfunction(EigenIndex.H1(1), z, fp1),
        0.37556277223247124143,  # k0 / sqrt(2)
        rtol=1e-14,
    )
    # H2 vanishes at z = sqrt(2) and equals -k0/sqrt2 at the origin
    np.testing.assert_allclose(
        eval_eigenfunction(EigenIndex.H2(1, 1), np.array([math.sqrt(2.0)]), fp1),
        0.0,
        atol=1e-15,
    )
    np.testing.assert_allclose(
        eval_eigenfunction(EigenIndex.H2(1, 1), np.array([0.0]), fp1),
        -0.37556277223247124143,
        rtol=1e-14,
    )


def test_eigenfunction_off_diagonal(fp2):
    z = np.array([[1.0, 1.0], [1.0, -2.0]])
    got = eval_eigenfunction(EigenIndex.H2(1, 2), z, fp2)
    np.testing.assert_allclose(got, [K0**2 / 2.0, -(K0**2)], rtol=1e-14)


def test_eigenvalues_and_wire_order():
    idx = basis_indices(3)
    assert [ix.eigenvalue for ix in idx] == [0.0, 0.5, 0.5, 0.5, 1, 1, 1, 1, 1, 1]
    offs = [(ix.i, ix.j) for ix in idx if ix.degree == 2 and ix.i != ix.j]
    assert offs == [(1, 2), (1, 3), (2, 3)]


def test_eigenindex_validation():
    with pytest.raises(ValueError):
        EigenIndex(3)
    with pytest.raises(ValueError):
        EigenIndex(1)
    with pytest.raises(ValueError):
        EigenIndex(2, i=2, j=1)
    assert EigenIndex.H2(2, 1) == EigenIndex.H2(1, 2)  # constructor sorts


@pytest.mark.parametrize("n", [1, 2])
def test_gram_identity_by_quadrature(n):
    fp = FrameParams(p=3.0, n=n)
    q = build_quadrature(n)
    idx = basis_indices(n)
    G = np.array([[inner_product_rho(a, b, q, fp) for b in idx] for a in idx])
    np.testing.assert_allclose(G, np.eye(len(idx)), atol=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_gram_identity_on_grid(n):
    # the aligned-grid route must keep the basis orthonormal to ~1e-13
    fp = FrameParams(p=3.0, n=n)
    grid = Grid.make(n, 12.0, 0.1)
    idx = basis_indices(n)
    samples = [
        eval_eigenfunction(ix, grid.points(), fp).reshape(grid.npts) for ix in idx
    ]
    G = np.array(
        [[grid_inner_product(grid, a, b) for b in samples] for a in samples]
    )
    np.testing.assert_allclose(G, np.eye(len(idx)), atol=1e-12)


def test_inner_product_examples(fp1):
    q = build_quadrature(1)
    one = lambda pts: np.ones(pts.shape[0])
    np.testing.assert_allclose(
        inner_product_rho(one, EigenIndex.H0(), q, fp1),
        1.8827925275534296253,  # 1 / k0
        rtol=1e-13,
    )
    np.testing.assert_allclose(
        inner_product_rho(EigenIndex.H1(1), EigenIndex.H1(1), q, fp1), 1.0, rtol=1e-13
    )
    np.testing.assert_allclose(
        inner_product_rho(EigenIndex.H0(), EigenIndex.H2(1, 1), q, fp1), 0.0, atol=1e-14
    )


# ---------------------------------------------------------------------------
# grids, fields, norms


def test_grid_make_is_odd_and_symmetric():
    grid = Grid.make(1, 20.0, 0.05)
    assert grid.npts == (801,)
    np.testing.assert_allclose(grid.h, (0.05,), rtol=1e-12)
    ax = grid.axis(0)
    assert ax[0] == -20.0 and ax[-1] == 20.0
    assert ax[len(ax) // 2] == 0.0


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(extents=(1.0,), npts=(5, 5))
    with pytest.raises(ValueError):
        Grid(extents=(-1.0,), npts=(5,))


def test_field_validation(grid1):
    with pytest.raises(ValueError):
        Field(grid1, np.zeros(7), "similarity")
    with pytest.raises(ValueError):
        Field(grid1, np.zeros(grid1.npts), "spectral")
    bad = np.zeros(grid1.npts)
    bad[0] = np.inf
    with pytest.raises(ValueError):
        Field(grid1, bad, "similarity")
    Field(grid1, bad, "similarity", blown_up=True)  # flagged: allowed


def test_field_evaluate_multilinear(grid1):
    f = Field.from_callable(grid1, lambda pts: 2.0 * pts[:, 0] + 1.0)
    pts = np.array([[0.123], [-7.7], [3.025]])
    np.testing.assert_allclose(f.evaluate(pts), 2.0 * pts[:, 0] + 1.0, rtol=1e-12)
    np.testing.assert_allclose(f.evaluate(np.array([[25.0]])), 0.0, atol=0.0)


def test_grid_inner_product_matches_quadrature(fp1):
    q = build_quadrature(1)
    grid = Grid.make(1, 14.0, 0.05)
    f = lambda pts: np.exp(-pts[:, 0] ** 2 / 6.0)
    g = lambda pts: pts[:, 0] ** 2
    fg_quad = inner_product_rho(f, g, q)
    fv = f(grid.points()).reshape(grid.npts)
    gv = g(grid.points()).reshape(grid.npts)
    np.testing.assert_allclose(grid_inner_product(grid, fv, gv), fg_quad, rtol=1e-10)


def test_norm_examples(fp1, grid1):
    h0 = Field.from_callable(grid1, lambda pts: eval_eigenfunction(EigenIndex.H0(), pts, fp1))
    h1 = Field.from_callable(grid1, lambda pts: eval_eigenfunction(EigenIndex.H1(1), pts, fp1))
    np.testing.assert_allclose(norm_rho(h0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(norm_h1_rho(h0), 1.0, rtol=1e-12)
    # d(H1)/dz = H0 up to normalization: ||H1||_H1^2 = 1 + 1/2
    np.testing.assert_allclose(norm_h1_rho(h1), 1.2247448713915890491, rtol=1e-10)
    zero = Field(grid1, np.zeros(grid1.npts), "similarity")
    assert norm_rho(zero) == 0.0


def test_gradient_exact_on_quadratics():
    grid = Grid.make(1, 5.0, 0.1)
    vals = (grid.axis(0) ** 2 - 3.0 * grid.axis(0)).reshape(grid.npts)
    (d,) = gradient(grid, vals)
    np.testing.assert_allclose(d, 2.0 * grid.axis(0) - 3.0, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# discrete A_z


@pytest.mark.parametrize("n", [1, 2])
def test_apply_Az_eigen_relation(n):
    # A_z H = -mu H; the tracked basis is polynomial, so the discretization
    # reproduces it to roundoff, far below the 1e-6 working tolerance
    fp = FrameParams(p=3.0, n=n)
    grid = Grid.make(n, 12.0, 0.1) if n == 2 else Grid.make(1, 20.0, 0.05)
    for ix in basis_indices(n):
        f = Field.from_callable(grid, lambda pts, ix=ix: eval_eigenfunction(ix, pts, fp))
        resid = apply_Az(f).values + ix.eigenvalue * f.values
        assert norm_rho(Field(grid, resid, "similarity")) < 1e-6


def test_apply_Az_second_order_convergence():
    # non-polynomial target: f = exp(-z^2/8), A_z f = (-1/4 + 3 z^2/16) f
    def err(h):
        grid = Grid.make(1, 10.0, h)
        z = grid.axis(0)
        f = Field(grid, np.exp(-z * z / 8.0), "similarity")
        exact = (-0.25 + 3.0 * z * z / 16.0) * f.values
        interior = np.abs(z) <= 9.0
        return float(np.max(np.abs(apply_Az(f).values - exact)[interior]))

    e1, e2 = err(0.05), err(0.025)
    assert e1 / e2 > 3.5  # second order: ratio ~ 4


def test_apply_Az_guards(grid1):
    with pytest.raises(ValueError):
        apply_Az(Field(grid1, np.zeros(grid1.npts), "physical"))
    tiny = Grid(extents=(1.0,), npts=(3,))
    with pytest.raises(ValueError):
        apply_Az(Field(tiny, np.zeros(3), "similarity"))
