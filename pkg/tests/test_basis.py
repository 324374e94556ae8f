import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fincell.basis import (
    BasisError,
    BasisSet,
    Discretization1D,
    Discretization2D,
    eval_bspline_1d,
    eval_p_version_1d,
    eval_tensor_2d,
    legendre,
)
from fincell.quadrature import gauss_rule


def test_p_version_endpoint_values():
    N, _ = eval_p_version_1d(3, -1.0)
    np.testing.assert_allclose(N, [1.0, 0.0, 0.0, 0.0], atol=1e-15)
    N, _ = eval_p_version_1d(3, 1.0)
    np.testing.assert_allclose(N, [0.0, 1.0, 0.0, 0.0], atol=1e-15)


def test_phi2_at_midpoint():
    N, _ = eval_p_version_1d(2, 0.0)
    assert N[2] == pytest.approx(-np.sqrt(6.0) / 4.0, abs=1e-15)


def test_phi_matches_defining_integral():
    # phi_j(xi) = sqrt((2j-1)/2) * int_{-1}^{xi} P_{j-1}(t) dt, by Gauss quadrature
    rule = gauss_rule(20)
    for xi in (-0.7, 0.1, 0.55):
        t = -1.0 + (xi + 1.0) * (rule.points + 1.0) / 2.0
        w = rule.weights * (xi + 1.0) / 2.0
        P, _ = legendre(9, t)
        N, _ = eval_p_version_1d(10, xi)
        for j in range(2, 11):
            ref = np.sqrt((2 * j - 1) / 2.0) * np.dot(w, P[:, j - 1])
            assert N[j] == pytest.approx(ref, abs=1e-14)


def test_p_version_derivative_fd():
    h = 1e-6
    N, dN = eval_p_version_1d(8, 0.3)
    Np, _ = eval_p_version_1d(8, 0.3 + h)
    Nm, _ = eval_p_version_1d(8, 0.3 - h)
    fd = (Np - Nm) / (2 * h)
    np.testing.assert_allclose(dN, fd, rtol=1e-7, atol=1e-9)


def test_p_version_bad_degree():
    with pytest.raises(BasisError):
        eval_p_version_1d(0, 0.0)
    with pytest.raises(BasisError):
        eval_p_version_1d(2, 1.5)


def test_bspline_cubic_at_interior_knot():
    N, _, first = eval_bspline_1d(3, 6, 3.0, clamped=False)
    np.testing.assert_allclose(N, [1 / 6, 2 / 3, 1 / 6, 0.0], atol=1e-15)


def test_bspline_hat_midpoint():
    N, _, _ = eval_bspline_1d(1, 4, 1.5)
    np.testing.assert_allclose(N, [0.5, 0.5], atol=1e-15)


def test_bspline_outside_patch():
    with pytest.raises(BasisError):
        eval_bspline_1d(2, 3, 3.5)


def test_clamped_ends_interpolate():
    N, _, first = eval_bspline_1d(4, 5, 0.0)
    assert first == 0 and N[0] == 1.0
    N, _, first = eval_bspline_1d(4, 5, 5.0)
    assert first == 4 and N[-1] == pytest.approx(1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.0, 1.0), st.booleans())
def test_bspline_partition_of_unity(p, n, t, clamped):
    N, dN, _ = eval_bspline_1d(p, n, t * n, clamped)
    assert abs(N.sum() - 1.0) <= 1e-12
    assert np.all(N >= -1e-15)
    assert abs(dN.sum()) <= 1e-9 * max(1.0, np.abs(dN).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 14), st.floats(-1.0, 1.0))
def test_p_version_hierarchy(p, xi):
    N1, d1 = eval_p_version_1d(p, xi)
    N2, d2 = eval_p_version_1d(p + 1, xi)
    np.testing.assert_allclose(N2[: p + 1], N1, rtol=0, atol=1e-13)
    np.testing.assert_allclose(d2[: p + 1], d1, rtol=0, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(2, 9), st.floats(0.05, 0.95))
def test_bspline_translation(p, n, t):
    # interior spans of a uniform (unclamped) patch carry identical functions
    N0, d0, _ = eval_bspline_1d(p, n, 0 + t, clamped=False)
    N1, d1, _ = eval_bspline_1d(p, n, 1 + t, clamped=False)
    np.testing.assert_allclose(N1, N0, atol=1e-13)
    np.testing.assert_allclose(d1, d0, atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["p_version", "bspline"]), st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_derivatives_match_finite_differences(family, p, seed):
    disc = Discretization1D(family, p, 3, 0.0, 2.0)
    rng = np.random.default_rng(seed)
    e = int(rng.integers(3))
    x0, x1 = disc.cell_bounds(e)
    h = 1e-6
    x = rng.uniform(x0 + 1e-3, x1 - 1e-3, 5)
    _, dN = disc.eval_cell(e, x)
    Np, _ = disc.eval_cell(e, x + h)
    Nm, _ = disc.eval_cell(e, x - h)
    fd = (Np - Nm) / (2 * h)
    scale = np.abs(dN).max()
    np.testing.assert_allclose(dN, fd, rtol=1e-6, atol=1e-6 * scale)


@pytest.mark.parametrize("family", ["p_version", "bspline"])
@pytest.mark.parametrize("p", [1, 3, 6, 9])
def test_polynomial_reproduction(family, p):
    # L2 projection of a degree-p polynomial on a single cell reproduces it
    disc = Discretization1D(family, p, 1, -0.5, 1.0)
    rule = gauss_rule(p + 2)
    x = 0.25 + 0.75 * rule.points
    w = 0.75 * rule.weights
    N, _ = disc.eval_cell(0, x)
    coeff = np.random.default_rng(p).normal(size=p + 1)
    f = np.polynomial.polynomial.polyval(x, coeff)
    M = N.T @ (w[:, None] * N)
    c = np.linalg.solve(M, N.T @ (w * f))
    xs = np.linspace(-0.5, 1.0, 57)
    u, _ = disc.evaluate(c, xs)
    np.testing.assert_allclose(u, np.polynomial.polynomial.polyval(xs, coeff), atol=1e-10)


def test_tensor_counts():
    assert BasisSet("p_version", 3, 2).functions_per_cell() == 16
    assert BasisSet("p_version", 3, 2, space_rule="trunk").functions_per_cell() == 12
    # trunk p=4 adds the single internal mode phi_2 phi_2
    assert BasisSet("p_version", 4, 2, space_rule="trunk").functions_per_cell() == 17


def test_trunk_is_subset_of_tensor():
    full = {tuple(r) for r in BasisSet("p_version", 6, 2).local_pairs()}
    trunk = {tuple(r) for r in BasisSet("p_version", 6, 2, space_rule="trunk").local_pairs()}
    assert trunk < full
    rng = np.random.default_rng(0)
    xi, eta = rng.uniform(-1, 1, 10), rng.uniform(-1, 1, 10)
    vf, _ = eval_tensor_2d(BasisSet("p_version", 6, 2), xi, eta)
    vt, _ = eval_tensor_2d(BasisSet("p_version", 6, 2, space_rule="trunk"), xi, eta)
    index = {tuple(r): k for k, r in enumerate(BasisSet("p_version", 6, 2).local_pairs())}
    cols = [index[tuple(r)] for r in BasisSet("p_version", 6, 2, space_rule="trunk").local_pairs()]
    np.testing.assert_array_equal(vt, vf[:, cols])


def test_trunk_requires_p_version():
    with pytest.raises(BasisError):
        BasisSet("bspline", 3, 2, space_rule="trunk")


def test_bspline_2d_partition_of_unity():
    rng = np.random.default_rng(7)
    basis = BasisSet("bspline", 3, 2, cells_per_direction=4)
    for _ in range(100):
        sx, sy = rng.integers(4, size=2)
        xi, eta = sx + rng.random(), sy + rng.random()
        v, g = eval_tensor_2d(basis, xi, eta, (sx, sy))
        assert abs(v.sum() - 1.0) <= 1e-12
        assert np.abs(g.sum(axis=0)).max() <= 1e-10


def test_tensor_gradient_product_rule():
    basis = BasisSet("p_version", 4, 2, space_rule="trunk")
    h = 1e-6
    v, g = eval_tensor_2d(basis, 0.2, -0.4)
    vx, _ = eval_tensor_2d(basis, 0.2 + h, -0.4)
    vy, _ = eval_tensor_2d(basis, 0.2, -0.4 + h)
    vx2, _ = eval_tensor_2d(basis, 0.2 - h, -0.4)
    vy2, _ = eval_tensor_2d(basis, 0.2, -0.4 - h)
    np.testing.assert_allclose(g[:, 0], (vx - vx2) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(g[:, 1], (vy - vy2) / (2 * h), atol=1e-8)


@pytest.mark.parametrize("family,rule", [("p_version", "trunk"), ("p_version", "tensor_product"), ("bspline", "tensor_product")])
def test_shared_functions_continuous_across_cells(family, rule):
    disc = Discretization2D(family, 4, 3, 2, (0.0, 0.0, 1.5, 1.0), rule)
    c = np.random.default_rng(5).normal(size=disc.ndofs)
    y = np.linspace(0.01, 0.99, 9)
    left, _ = disc.evaluate(c, np.column_stack([np.full_like(y, 0.5 - 1e-13), y]))
    right, _ = disc.evaluate(c, np.column_stack([np.full_like(y, 0.5 + 1e-13), y]))
    np.testing.assert_allclose(left, right, atol=1e-10)


def test_p_version_dof_counts():
    d = Discretization1D("p_version", 5, 2, 0.0, 3.0)
    assert d.ndofs == 2 + 1 + 2 * 4
    b = Discretization1D("bspline", 5, 11, 0.0, 3.0)
    assert b.ndofs == 16


def test_face_constant_values_reproduce_constant():
    for family, rule in (("p_version", "trunk"), ("bspline", "tensor_product")):
        disc = Discretization2D(family, 5, 3, 3, (0, 0, 1, 1), rule)
        c = np.zeros(disc.ndofs)
        for d, v in disc.constant_face_values("right", 0.7).items():
            c[d] = v
        y = np.linspace(0, 1, 11)
        val, _ = disc.evaluate(c, np.column_stack([np.ones_like(y), y]))
        np.testing.assert_allclose(val, 0.7, atol=1e-13)
