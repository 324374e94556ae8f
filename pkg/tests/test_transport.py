import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from fincell.basis import Discretization2D
from fincell.errors import ConfigError, SolverError
from fincell.geometry import inclusion_geometry, rod_geometry
from fincell.oracles import convection_diffusion_1d_exact
from fincell.quadrature import cell_points
from fincell.transport import (
    TransportProblem,
    assemble_transport,
    cell_matrix,
    diagonal_profile,
    grid_values,
    solve_transport,
    sparse_solve,
    transport_fixture,
)


def _brute_cell(problem, disc, ex, ey, n, m):
    # straightforward point-by-point assembly for cross-checking
    lo, hi = disc.cell_bounds(ex, ey)
    pts, w = cell_points(lo, hi, problem.geometry, n, m)
    w = w * problem.geometry.alpha(pts)
    Nx, dNx = disc.dx.eval_cell(ex, pts[:, 0])
    Ny, dNy = disc.dy.eval_cell(ey, pts[:, 1])
    i, j = disc.local_pairs[:, 0], disc.local_pairs[:, 1]
    V = Nx[:, i] * Ny[:, j]
    Gx = dNx[:, i] * Ny[:, j]
    Gy = Nx[:, i] * dNy[:, j]
    qx, qy = problem.q
    K = problem.diffusion * (Gx.T @ (w[:, None] * Gx) + Gy.T @ (w[:, None] * Gy))
    K += Gx.T @ (w[:, None] * qx * V) + Gy.T @ (w[:, None] * qy * V)
    return K


@pytest.mark.parametrize("family,rule", [("p_version", "trunk"), ("p_version", "tensor_product"), ("bspline", "tensor_product")])
def test_cell_matrix_matches_pointwise_assembly(family, rule):
    geom = inclusion_geometry(q=6)
    problem = TransportProblem(geom, (0.7, -0.4), 0.9)
    disc = Discretization2D(family, 4, 4, 4, (0, 0, 1, 1), rule)
    for ex, ey in [(0, 0), (1, 2), (2, 1)]:
        Ke, _ = cell_matrix(problem, disc, ex, ey, 5, 3)
        np.testing.assert_allclose(Ke, _brute_cell(problem, disc, ex, ey, 5, 3), rtol=1e-12, atol=1e-13)


def test_pure_diffusion_symmetric():
    problem, disc = transport_fixture(pe=0.0, p=4, cells=4)
    A = assemble_transport(problem, disc, m=3).A
    assert abs(A - A.T).max() <= 1e-13 * abs(A).max()


def test_p1_laplacian_rows_sum_to_zero():
    problem, disc = transport_fixture(pe=0.0, p=1, cells=4, inclusions=())
    A = assemble_transport(problem, disc, m=2).A
    np.testing.assert_allclose(np.asarray(A.sum(axis=1)).ravel(), 0.0, atol=1e-14)
    # with equal face values and no inclusions the constant is reproduced
    problem, disc = transport_fixture(pe=3.0, p=3, cells=3, inclusions=())
    problem1 = TransportProblem(problem.geometry, problem.q, problem.diffusion, left=1.0, right=1.0)
    field = solve_transport(problem1, disc, m=2)
    pts = np.random.default_rng(0).random((20, 2))
    np.testing.assert_allclose(field(pts), 1.0, atol=1e-12)


@pytest.fixture(scope="module")
def open_field():
    problem, disc = transport_fixture(pe=1.0, inclusions=())
    return solve_transport(problem, disc)


def test_no_inclusion_matches_1d_exact(open_field):
    x = np.linspace(0, 1, 41)
    for y in (0.0, 0.3, 0.77, 1.0):
        c = open_field(np.column_stack([x, np.full_like(x, y)]))
        np.testing.assert_allclose(c, convection_diffusion_1d_exact(1.0, x), atol=1e-6)


def test_profile_monotone_and_endpoints(open_field):
    s, c = diagonal_profile(open_field, 101)
    assert s[0] == 0.0 and s[-1] == pytest.approx(np.sqrt(2.0))
    assert c[0] == pytest.approx(0.0, abs=1e-12) and c[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(c) >= -1e-8)


def test_laplace_limit_linear():
    problem, disc = transport_fixture(pe=1e-12, inclusions=(), p=3, cells=2)
    field = solve_transport(problem, disc, m=1)
    pts = np.random.default_rng(1).random((50, 2))
    np.testing.assert_allclose(field(pts), pts[:, 0], atol=1e-8)


def test_weak_residual(open_field):
    assert open_field.residual <= 1e-10


@pytest.fixture(scope="module")
def inclusion_profiles():
    out = {}
    for q in (6, 8, 10):
        problem, disc = transport_fixture(q=q)
        out[q] = diagonal_profile(solve_transport(problem, disc), 101)
    return out


def _physical_diag(s):
    t = s / np.sqrt(2.0)
    return inclusion_geometry().is_physical(np.column_stack([t, t]))


def test_inclusion_profile_bounded(inclusion_profiles):
    s, c = inclusion_profiles[6]
    phys = _physical_diag(s)
    assert np.all(c[phys] >= -1e-2) and np.all(c[phys] <= 1 + 1e-2)


def test_alpha_robustness(inclusion_profiles):
    s, ref = inclusion_profiles[6]
    phys = _physical_diag(s)
    for q in (8, 10):
        c = inclusion_profiles[q][1]
        assert np.abs(c - ref)[phys].max() <= 1e-3 * np.abs(ref).max()


@pytest.mark.slow
def test_inclusion_profile_against_overkill(inclusion_profiles):
    s, c = inclusion_profiles[6]
    problem, disc = transport_fixture(p=10, cells=16)
    _, ref = diagonal_profile(solve_transport(problem, disc, m=6), 101)
    phys = _physical_diag(s)
    assert np.abs(c - ref)[phys].max() <= 1e-2 * np.abs(ref[phys]).max()


def test_depth_differences_shrink():
    problem, disc = transport_fixture(p=4, cells=4)
    prof = [diagonal_profile(solve_transport(problem, disc, m=m), 101)[1] for m in range(2, 8)]
    d = [np.abs(b - a).max() for a, b in zip(prof, prof[1:])]
    assert all(b <= a for a, b in zip(d, d[1:])), d


def test_grid_values_layout(open_field):
    g = grid_values(open_field, 5, 3)
    assert g.shape == (15, 3)
    np.testing.assert_array_equal(g[:5, 1], 0.0)
    np.testing.assert_array_equal(g[:5, 0], np.linspace(0, 1, 5))


def test_profile_needs_two_samples(open_field):
    with pytest.raises(ValueError):
        diagonal_profile(open_field, 1)


def test_problem_validation():
    with pytest.raises(ConfigError):
        TransportProblem(rod_geometry())
    with pytest.raises(ConfigError):
        TransportProblem(inclusion_geometry(), diffusion=0.0)
    with pytest.raises(ConfigError):
        TransportProblem.from_peclet(inclusion_geometry(), -1.0)


def test_sparse_solve_rejects_zero_diagonal():
    A = scipy.sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(SolverError):
        sparse_solve(A, np.ones(2))


def _constant_coeffs(disc):
    def one(d1):
        c = np.zeros(d1.ndofs)
        c[: d1.n_cells + 1 if d1.family == "p_version" else d1.ndofs] = 1.0
        return c

    gx, gy = disc.dof_pairs.T
    return one(disc.dx)[gx] * one(disc.dy)[gy]


@settings(max_examples=5, deadline=None)
@given(st.floats(0.0, 4.0), st.integers(2, 4), st.sampled_from(["p_version", "bspline"]))
def test_constant_in_kernel_without_inclusions(pe, p, family):
    problem, disc = transport_fixture(pe=pe, p=p, cells=2, inclusions=(), family=family)
    assert problem.peclet == pytest.approx(pe, abs=1e-14)
    system = assemble_transport(problem, disc, m=1)
    free = np.setdiff1d(np.arange(disc.ndofs), sorted(system.constraints))
    # test functions vanish on the inflow and outflow faces, so int q . grad w = 0
    r = system.A @ _constant_coeffs(disc)
    assert np.abs(r[free]).max() <= 1e-12 * max(1.0, abs(system.A).max())
