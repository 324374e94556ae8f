import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fincell.geometry import EmbeddedGeometry, HalfPlane, Rectangle, inclusion_geometry, rod_geometry
from fincell.quadrature import (
    QuadratureError,
    alpha_step_error,
    build_subcell_tree,
    cell_points,
    composed_integrate,
    gauss_rule,
)


def test_one_point_rule():
    r = gauss_rule(1)
    np.testing.assert_array_equal(r.points, [0.0])
    np.testing.assert_array_equal(r.weights, [2.0])


def test_two_point_rule():
    r = gauss_rule(2)
    np.testing.assert_allclose(r.points, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], atol=1e-15)
    assert np.dot(r.weights, r.points**3) == 0.0


@pytest.mark.parametrize("n", [0, 65, 2.5])
def test_rule_range(n):
    with pytest.raises(QuadratureError):
        gauss_rule(n)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40))
def test_rule_invariants(n):
    r = gauss_rule(n)
    assert abs(r.weights.sum() - 2.0) < 1e-13
    np.testing.assert_allclose(r.points, -r.points[::-1], atol=1e-15)
    assert np.all(r.weights > 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 20), st.data())
def test_exactness_degree(n, data):
    r = gauss_rule(n)
    k = data.draw(st.integers(0, 2 * n - 1))
    exact = 0.0 if k % 2 else 2.0 / (k + 1)
    assert abs(np.dot(r.weights, r.points**k) - exact) <= 1e-12


def test_uncut_cell_single_leaf():
    geom = rod_geometry()
    tree = build_subcell_tree([0.0], [0.9], geom, 7)
    assert len(tree.leaves()) == 1 and tree.depth == 0


def test_hand_bisection_m2():
    tree = build_subcell_tree([0.0], [1.5], rod_geometry(), 2)
    boxes = sorted((l.lo[0], l.hi[0], l.level) for l in tree.leaves())
    assert boxes == [(0.0, 0.75, 1), (0.75, 1.125, 2), (1.125, 1.5, 2)]


def test_straight_cut_2d_m1():
    geom = EmbeddedGeometry((0, 0), (1, 1), Rectangle(0, 0, 1, 1) & HalfPlane(1.0, 0.3, 0.55), q=8)
    tree = build_subcell_tree([0, 0], [1, 1], geom, 1)
    leaves = tree.leaves()
    assert len(leaves) == 4 and all(l.level == 1 for l in leaves)


def test_negative_depth():
    with pytest.raises(QuadratureError):
        build_subcell_tree([0.0], [1.0], rod_geometry(), -1)


def test_leaves_tile_root():
    geom = inclusion_geometry()
    tree = build_subcell_tree([0.125, 0.375], [0.25, 0.5], geom, 5)
    lo, hi = tree.leaf_boxes()
    assert np.prod(hi - lo, axis=1).sum() == pytest.approx(0.125**2, rel=1e-14)
    for leaf in tree.leaves():
        assert leaf.level <= 5
    # only cut nodes have children
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.children:
            assert node.cut
            stack.extend(node.children)


def test_constant_integrand_exact():
    tree = build_subcell_tree([0.0], [1.5], rod_geometry(), 12)
    assert composed_integrate(lambda x: np.ones(len(x)), tree, 3) == pytest.approx(1.5, rel=1e-15)


def test_alpha_step_converges_toward_exact():
    value, exact, _ = alpha_step_error(rod_geometry(8), 0.0, 1.5, 16, 20)
    assert exact == pytest.approx(1.0 + 0.5e-8, rel=1e-15)
    assert abs(value - exact) / exact < 1e-7


def test_alpha_step_monotone_m0_to_12():
    geom = rod_geometry(8)
    errs = [abs(v - e) for v, e, _ in (alpha_step_error(geom, 0.0, 1.5, 16, m) for m in range(13))]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(0, 8), st.integers(0, 2**31 - 1))
def test_smooth_polynomial_independent_of_tree(n, m, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(2 * n, 2 * n))
    deg = 2 * n - 1

    def f(pts):
        x, y = pts[:, 0], pts[:, 1]
        out = np.zeros(len(pts))
        for i in range(deg + 1):
            for j in range(deg + 1 - i):
                out += c[i, j] * x**i * y**j
        return out

    geom = inclusion_geometry()
    tree = build_subcell_tree([0.125, 0.375], [0.375, 0.625], geom, m)
    root = build_subcell_tree([0.125, 0.375], [0.375, 0.625], geom, 0)
    a = composed_integrate(f, tree, n)
    b = composed_integrate(f, root, n)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


def test_quadtree_leaf_growth_on_transport_fixture():
    geom = inclusion_geometry()
    counts = []
    for m in range(1, 7):
        tree = build_subcell_tree([0.125, 0.375], [0.25, 0.5], geom, m)
        counts.append(len(tree.leaves()))
    # boundary-refined: each level adds a bounded multiple of 2^m leaves
    c = max((counts[i] - (counts[i - 1] if i else 1)) / 2 ** (i + 1) for i in range(len(counts)))
    for m, cnt in enumerate(counts, start=1):
        assert cnt <= 4 + 3 * sum(c * 2**i for i in range(1, m + 1))
    assert counts[-1] < 4**6 / 4


def test_cell_points_2d_weights():
    geom = inclusion_geometry()
    pts, w = cell_points([0.125, 0.375], [0.25, 0.5], geom, 3, 4)
    assert pts.shape[1] == 2
    assert w.sum() == pytest.approx(0.125**2, rel=1e-14)
