"""Gauss-Legendre rules and adaptive sub-cell integration of cut cells.

A cell that is cut by a material interface is bisected recursively (binary
tree in 1D, quadtree in 2D). Only cut nodes are split, and splitting stops
at the maximum depth ``m``; every leaf carries a full tensor Gauss rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .geometry import EmbeddedGeometry, ProbeRule


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class GaussRule:
    n: int
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n: int) -> GaussRule:
    """n-point Gauss-Legendre rule on [-1, 1] (1 <= n <= 64)."""
    if int(n) != n or not 1 <= n <= 64:
        raise QuadratureError(f"point count must be in 1..64, got {n}")
    x, w = _leggauss(int(n))
    return GaussRule(int(n), x, w)


@dataclass
class SubCellNode:
    lo: np.ndarray
    hi: np.ndarray
    level: int
    cut: bool
    children: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class SubCellTree:
    """Hierarchical bisection of one finite cell."""

    root: SubCellNode
    max_depth: int

    def leaves(self) -> list[SubCellNode]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def leaf_boxes(self) -> tuple[np.ndarray, np.ndarray]:
        leaves = self.leaves()
        return np.array([l.lo for l in leaves]), np.array([l.hi for l in leaves])

    @property
    def depth(self) -> int:
        return max(l.level for l in self.leaves())


def build_subcell_tree(
    lo,
    hi,
    geometry: EmbeddedGeometry,
    m: int,
    probe: ProbeRule | None = None,
) -> SubCellTree:
    """Bisect every cut node of the box ``[lo, hi]`` down to depth ``m``."""
    if m < 0:
        raise QuadratureError("maximum depth must be non-negative")
    probe = probe or ProbeRule()
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    root = SubCellNode(lo, hi, 0, geometry.is_cut(lo, hi, probe))
    stack = [root]
    while stack:
        node = stack.pop()
        if not node.cut or node.level >= m:
            continue
        mid = 0.5 * (node.lo + node.hi)
        for corner in np.ndindex(*(2,) * len(lo)):
            c = np.array(corner)
            clo = np.where(c == 0, node.lo, mid)
            chi = np.where(c == 0, mid, node.hi)
            child = SubCellNode(clo, chi, node.level + 1, geometry.is_cut(clo, chi, probe))
            node.children.append(child)
        stack.extend(node.children)
    return SubCellTree(root, m)


def leaf_rules_1d(lo: np.ndarray, hi: np.ndarray, n: int):
    """Mapped Gauss points and weights for an array of 1D boxes.

    Returns arrays of shape ``(n_leaves, n)``.
    """
    rule = gauss_rule(n)
    lo, hi = np.asarray(lo, float).ravel(), np.asarray(hi, float).ravel()
    half = 0.5 * (hi - lo)
    x = 0.5 * (lo + hi)[:, None] + half[:, None] * rule.points[None, :]
    w = half[:, None] * rule.weights[None, :]
    return x, w


def cell_points(
    lo,
    hi,
    geometry: EmbeddedGeometry,
    n: int,
    m: int,
    probe: ProbeRule | None = None,
):
    """Integration points of a 1D or 2D cell, refined by a sub-cell tree if cut.

    Returns ``(points, weights)`` with ``points`` of shape ``(npts, dim)``,
    ordered leaf by leaf.
    """
    tree = build_subcell_tree(lo, hi, geometry, m, probe)
    los, his = tree.leaf_boxes()
    dim = los.shape[1]
    if dim == 1:
        x, w = leaf_rules_1d(los[:, 0], his[:, 0], n)
        return x.reshape(-1, 1), w.ravel()
    xs, wx = leaf_rules_1d(los[:, 0], his[:, 0], n)
    ys, wy = leaf_rules_1d(los[:, 1], his[:, 1], n)
    X = np.broadcast_to(xs[:, :, None], (len(los), n, n))
    Y = np.broadcast_to(ys[:, None, :], (len(los), n, n))
    W = wx[:, :, None] * wy[:, None, :]
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


def composed_integrate(
    integrand: Callable[[np.ndarray], np.ndarray],
    tree: SubCellTree,
    n: int,
) -> float:
    """Sum of mapped ``n``-point Gauss rules over the leaves of ``tree``.

    ``integrand`` receives physical points of shape ``(npts, dim)``.
    Leaves are reduced in a fixed order.
    """
    los, his = tree.leaf_boxes()
    dim = los.shape[1]
    total = 0.0
    for lo, hi in zip(los, his):
        if dim == 1:
            x, w = leaf_rules_1d(lo, hi, n)
            total += float(np.dot(w.ravel(), integrand(x.reshape(-1, 1))))
        else:
            xs, wx = leaf_rules_1d(lo[:1], hi[:1], n)
            ys, wy = leaf_rules_1d(lo[1:], hi[1:], n)
            X, Y = np.meshgrid(xs[0], ys[0], indexing="ij")
            W = np.outer(wx[0], wy[0])
            total += float(np.dot(W.ravel(), integrand(np.stack([X.ravel(), Y.ravel()], 1))))
    return total


def alpha_step_error(geometry: EmbeddedGeometry, lo: float, hi: float, n: int, m: int) -> tuple[float, float, int]:
    """Composed integral of the penalization factor over a 1D cell.

    Returns ``(value, exact, leaf_count)``; the exact value is computed from
    the interface positions found by bisection of the classification.
    """
    tree = build_subcell_tree([lo], [hi], geometry, m)
    value = composed_integrate(lambda x: geometry.alpha(x), tree, n)
    exact = exact_alpha_integral_1d(geometry, lo, hi)
    return value, exact, len(tree.leaves())


def exact_alpha_integral_1d(geometry: EmbeddedGeometry, lo: float, hi: float) -> float:
    # locate classification changes on a fine scan, then refine each by bisection
    xs = np.linspace(lo, hi, 4097)
    phys = geometry.is_physical(xs)
    breaks = [lo]
    for k in np.flatnonzero(phys[1:] != phys[:-1]):
        a, b = xs[k], xs[k + 1]
        pa = phys[k]
        for _ in range(200):
            c = 0.5 * (a + b)
            if geometry.is_physical(c)[0] == pa:
                a = c
            else:
                b = c
            if b - a <= 1e-17 * max(1.0, abs(a)):
                break
        breaks.append(0.5 * (a + b))
    breaks.append(hi)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (a + b)
        total += (b - a) * (1.0 if geometry.is_physical(mid)[0] else geometry.alpha_fict)
    return total
