"""High-order approximation bases on structured cell grids.

Two families are provided:

* ``p_version``: C0 hierarchic basis of the p-version of the FEM, made of
  the two linear nodal modes and integrated Legendre bubbles
  ``phi_j(xi) = sqrt((2j-1)/2) * int_{-1}^{xi} P_{j-1}(t) dt``.
* ``bspline``: a single uniform B-spline patch (open-uniform knots by
  default) whose knot spans act as finite cells.

Higher-dimensional spaces are tensor products of the 1D families; the
p-version additionally offers the trunk space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

FAMILIES = ("p_version", "bspline")
SPACE_RULES = ("tensor_product", "trunk")


class BasisError(ValueError):
    """Invalid basis arguments or evaluation outside the parameter domain."""


# ---------------------------------------------------------------------------
# 1D evaluation kernels
# ---------------------------------------------------------------------------


def legendre(n: int, x):
    """Legendre polynomials P_0..P_n and their derivatives at ``x``.

    Returns two arrays of shape ``x.shape + (n+1,)``.
    """
    x = np.asarray(x, dtype=float)
    P = np.zeros(x.shape + (n + 1,))
    dP = np.zeros_like(P)
    P[..., 0] = 1.0
    if n >= 1:
        P[..., 1] = x
        dP[..., 1] = 1.0
    for k in range(1, n):
        P[..., k + 1] = ((2 * k + 1) * x * P[..., k] - k * P[..., k - 1]) / (k + 1)
        dP[..., k + 1] = dP[..., k - 1] + (2 * k + 1) * P[..., k]
    return P, dP


def eval_p_version_1d(p: int, xi):
    """Values and derivatives of the 1D p-version basis at ``xi`` in [-1, 1].

    The ordering is ``[N1, N2, phi_2, ..., phi_p]``. Scalar ``xi`` gives
    vectors of length ``p+1``; array input adds leading axes.
    """
    if int(p) != p or p < 1:
        raise BasisError(f"polynomial degree must be >= 1, got {p}")
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) > 1.0 + 1e-12):
        raise BasisError("p-version basis is defined on [-1, 1]")
    P, dP = legendre(p, xi)
    N = np.empty(xi.shape + (p + 1,))
    dN = np.empty_like(N)
    N[..., 0] = 0.5 * (1.0 - xi)
    N[..., 1] = 0.5 * (1.0 + xi)
    dN[..., 0] = -0.5
    dN[..., 1] = 0.5
    for j in range(2, p + 1):
        N[..., j] = (P[..., j] - P[..., j - 2]) / np.sqrt(2.0 * (2 * j - 1))
        dN[..., j] = np.sqrt((2 * j - 1) / 2.0) * P[..., j - 1]
    return N, dN


def bspline_knots(p: int, n_spans: int, clamped: bool = True) -> np.ndarray:
    """Knot vector in span units: interior knots at 1..n_spans-1."""
    if clamped:
        return np.concatenate([np.zeros(p), np.arange(n_spans + 1.0), np.full(p, float(n_spans))])
    return np.arange(-p, n_spans + p + 1.0)


def _span_basis(p: int, U: np.ndarray, i: int, u: np.ndarray):
    """Cox-de Boor values and first derivatives of the p+1 functions of knot
    interval ``i``; valid on the closed interval (polynomial pieces)."""

    def table(deg):
        N = np.zeros((len(u), deg + 1))
        N[:, 0] = 1.0
        left = np.zeros((len(u), deg + 1))
        right = np.zeros((len(u), deg + 1))
        for j in range(1, deg + 1):
            left[:, j] = u - U[i + 1 - j]
            right[:, j] = U[i + j] - u
            saved = np.zeros(len(u))
            for r in range(j):
                temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
                N[:, r] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            N[:, j] = saved
        return N

    N = table(p)
    low = table(p - 1)
    dN = np.zeros_like(N)
    for k in range(p + 1):
        g = i - p + k
        if k >= 1:
            dN[:, k] += p * low[:, k - 1] / (U[g + p] - U[g])
        if k <= p - 1:
            dN[:, k] -= p * low[:, k] / (U[g + p + 1] - U[g + 1])
    return N, dN


def eval_bspline_1d(p: int, n_spans: int, xi, clamped: bool = True):
    """Nonzero B-splines and their derivatives at parameter ``xi``.

    ``xi`` is measured in knot-span units on ``[0, n_spans]``. Returns
    ``(values, derivatives, first)`` where ``values[..., k]`` belongs to the
    global function ``first + k``. A point on an interior knot is assigned
    to the span on its right.
    """
    if int(p) != p or p < 1:
        raise BasisError(f"polynomial degree must be >= 1, got {p}")
    if n_spans < 1:
        raise BasisError("a patch needs at least one knot span")
    xi = np.asarray(xi, dtype=float)
    u = np.atleast_1d(xi).ravel()
    if np.any(u < -1e-12) or np.any(u > n_spans + 1e-12):
        raise BasisError(f"parameter outside the patch [0, {n_spans}]")
    u = np.clip(u, 0.0, float(n_spans))
    span = np.minimum(np.floor(u).astype(int), n_spans - 1)
    U = bspline_knots(p, n_spans, clamped)
    N = np.empty((len(u), p + 1))
    dN = np.empty_like(N)
    for s in np.unique(span):
        sel = span == s
        N[sel], dN[sel] = _span_basis(p, U, s + p, u[sel])
    if xi.ndim == 0:
        return N[0], dN[0], int(span[0])
    return N.reshape(xi.shape + (p + 1,)), dN.reshape(xi.shape + (p + 1,)), span.reshape(xi.shape)


def bspline_on_span(p: int, n_spans: int, span: int, u, clamped: bool = True):
    """Functions of a given span evaluated at ``u`` (span units), closed span."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return _span_basis(p, bspline_knots(p, n_spans, clamped), span + p, u)


# ---------------------------------------------------------------------------
# Structured 1D discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Discretization1D:
    """A line of finite cells carrying one basis family.

    For the B-spline family each knot span is a cell. Global dofs of the
    p-version are numbered vertices first, then bubbles cell by cell.
    """

    family: str
    p: int
    n_cells: int
    a: float = 0.0
    b: float = 1.0
    clamped: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BasisError(f"unknown basis family {self.family!r}")
        if int(self.p) != self.p or self.p < 1:
            raise BasisError(f"polynomial degree must be >= 1, got {self.p}")
        if self.n_cells < 1:
            raise BasisError("need at least one cell")
        if self.b <= self.a:
            raise BasisError("empty interval")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def n_local(self) -> int:
        return self.p + 1

    @cached_property
    def ndofs(self) -> int:
        if self.family == "p_version":
            return self.n_cells + 1 + self.n_cells * (self.p - 1)
        return self.n_cells + self.p

    def cell_bounds(self, e: int) -> tuple[float, float]:
        return self.a + e * self.h, self.a + (e + 1) * self.h

    @cached_property
    def _cell_dofs(self) -> np.ndarray:
        n, p = self.n_cells, self.p
        dofs = np.empty((n, p + 1), dtype=int)
        for e in range(n):
            if self.family == "p_version":
                bubbles = n + 1 + e * (p - 1) + np.arange(p - 1)
                dofs[e] = np.concatenate([[e, e + 1], bubbles])
            else:
                dofs[e] = e + np.arange(p + 1)
        return dofs

    def cell_dofs(self, e: int) -> np.ndarray:
        return self._cell_dofs[e]

    def local_degree(self) -> np.ndarray:
        """Polynomial degree attached to each local function (p-version ordering)."""
        if self.family == "p_version":
            return np.array([1, 1] + list(range(2, self.p + 1)))
        return np.full(self.p + 1, self.p)

    def eval_cell(self, e: int, x):
        """Local values and physical x-derivatives at points ``x`` inside cell ``e``."""
        x = np.asarray(x, dtype=float)
        x0, x1 = self.cell_bounds(e)
        if self.family == "p_version":
            xi = np.clip(2.0 * (x - x0) / self.h - 1.0, -1.0, 1.0)
            N, dN = eval_p_version_1d(self.p, xi)
            return N, dN * (2.0 / self.h)
        N, dN = bspline_on_span(self.p, self.n_cells, e, (x - self.a) / self.h, self.clamped)
        N, dN = N.reshape(x.shape + (-1,)), dN.reshape(x.shape + (-1,))
        return N, dN / self.h

    def locate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(np.floor((x - self.a) / self.h).astype(int), 0, self.n_cells - 1)

    def evaluate(self, coeffs, x):
        """Field value and x-derivative of ``sum_a coeffs[a] N_a`` at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cells = self.locate(x)
        u = np.empty_like(x)
        du = np.empty_like(x)
        coeffs = np.asarray(coeffs)
        for e in np.unique(cells):
            sel = cells == e
            N, dN = self.eval_cell(e, x[sel])
            c = coeffs[self.cell_dofs(e)]
            u[sel] = N @ c
            du[sel] = dN @ c
        return u, du

    def face_dofs(self, side: str) -> np.ndarray:
        """Dofs whose functions are nonzero at an end of the interval."""
        if not self.clamped:
            raise BasisError("unclamped B-spline patches have no interpolatory end dofs")
        if side == "left":
            return np.array([0])
        if side == "right":
            return np.array([self.n_cells if self.family == "p_version" else self.ndofs - 1])
        raise BasisError(f"unknown face {side!r}")


# ---------------------------------------------------------------------------
# 2D tensor products
# ---------------------------------------------------------------------------


def trunk_keep(p: int) -> np.ndarray:
    """Boolean (p+1, p+1) mask of local tensor pairs kept in the trunk space.

    Nodal and edge modes are always kept; internal modes phi_i * phi_j
    only if i + j <= p.
    """
    deg = np.array([1, 1] + list(range(2, p + 1)))
    I, J = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="ij")
    internal = (I >= 2) & (J >= 2)
    return ~internal | (deg[I] + deg[J] <= p)


@dataclass(frozen=True)
class BasisSet:
    """Descriptor of a basis family on a 1D or 2D structured grid."""

    family: str
    p: int
    dimension: int = 1
    cells_per_direction: int = 1
    space_rule: str = "tensor_product"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise BasisError(f"unknown basis family {self.family!r}")
        if self.dimension not in (1, 2):
            raise BasisError("only 1D and 2D bases are supported")
        if self.space_rule not in SPACE_RULES:
            raise BasisError(f"unknown space rule {self.space_rule!r}")
        if self.space_rule == "trunk" and self.family != "p_version":
            raise BasisError("the trunk space applies to the p-version only")
        if int(self.p) != self.p or self.p < 1:
            raise BasisError(f"polynomial degree must be >= 1, got {self.p}")

    def local_pairs(self) -> np.ndarray:
        """Local (i, j) index pairs of the 2D functions of one cell."""
        keep = trunk_keep(self.p) if self.space_rule == "trunk" else np.ones((self.p + 1,) * 2, bool)
        return np.argwhere(keep)

    def functions_per_cell(self) -> int:
        if self.dimension == 1:
            return self.p + 1
        return len(self.local_pairs())


def eval_tensor_2d(basis: BasisSet, xi, eta, span: tuple[int, int] = (0, 0)):
    """Values and parametric gradients of the 2D functions of one cell.

    For the p-version ``(xi, eta)`` lie in [-1, 1]^2. For B-splines they are
    patch parameters in span units, ``span`` only fixes which span's
    functions are returned when the point sits on a knot line.

    Returns ``values`` of shape ``(..., nf)`` and ``grads`` of shape
    ``(..., nf, 2)``, with functions ordered as ``basis.local_pairs()``.
    """
    if basis.dimension != 2:
        raise BasisError("eval_tensor_2d needs a 2D basis set")
    p = basis.p
    if basis.family == "p_version":
        Nx, dNx = eval_p_version_1d(p, xi)
        Ny, dNy = eval_p_version_1d(p, eta)
    else:
        n = basis.cells_per_direction
        Nx, dNx = bspline_on_span(p, n, span[0], xi)
        Ny, dNy = bspline_on_span(p, n, span[1], eta)
        if np.ndim(xi) == 0:
            Nx, dNx, Ny, dNy = Nx[0], dNx[0], Ny[0], dNy[0]
    pairs = basis.local_pairs()
    i, j = pairs[:, 0], pairs[:, 1]
    values = Nx[..., i] * Ny[..., j]
    grads = np.stack([dNx[..., i] * Ny[..., j], Nx[..., i] * dNy[..., j]], axis=-1)
    return values, grads


@dataclass(frozen=True)
class Discretization2D:
    """Structured ``nx x ny`` grid over a rectangle with a tensor-product basis.

    Global dofs are pairs of 1D global dofs; the trunk rule drops internal
    pairs consistently across cells because bubble dofs carry their degree.
    """

    family: str
    p: int
    nx: int
    ny: int
    bounds: tuple = (0.0, 0.0, 1.0, 1.0)
    space_rule: str = "tensor_product"

    def __post_init__(self):
        BasisSet(self.family, self.p, 2, max(self.nx, self.ny), self.space_rule)

    @cached_property
    def basis_set(self) -> BasisSet:
        return BasisSet(self.family, self.p, 2, self.nx, self.space_rule)

    @cached_property
    def dx(self) -> Discretization1D:
        return Discretization1D(self.family, self.p, self.nx, self.bounds[0], self.bounds[2])

    @cached_property
    def dy(self) -> Discretization1D:
        return Discretization1D(self.family, self.p, self.ny, self.bounds[1], self.bounds[3])

    @cached_property
    def local_pairs(self) -> np.ndarray:
        return self.basis_set.local_pairs()

    @cached_property
    def _numbering(self):
        pairs = self.local_pairs
        raw = np.empty((self.nx, self.ny, len(pairs), 2), dtype=int)
        for ex in range(self.nx):
            gx = self.dx.cell_dofs(ex)
            for ey in range(self.ny):
                gy = self.dy.cell_dofs(ey)
                raw[ex, ey, :, 0] = gx[pairs[:, 0]]
                raw[ex, ey, :, 1] = gy[pairs[:, 1]]
        ordered, inverse = np.unique(raw.reshape(-1, 2), axis=0, return_inverse=True)
        return inverse.reshape(self.nx, self.ny, len(pairs)), ordered

    @property
    def ndofs(self) -> int:
        return len(self._numbering[1])

    def cell_dofs(self, ex: int, ey: int) -> np.ndarray:
        return self._numbering[0][ex, ey]

    @property
    def dof_pairs(self) -> np.ndarray:
        """1D global dof pair (gx, gy) behind each 2D global dof."""
        return self._numbering[1]

    def cell_bounds(self, ex: int, ey: int):
        x0, x1 = self.dx.cell_bounds(ex)
        y0, y1 = self.dy.cell_bounds(ey)
        return np.array([x0, y0]), np.array([x1, y1])

    def face_dofs(self, side: str) -> np.ndarray:
        """2D dofs whose trace on an embedding face is nonzero."""
        pairs = self.dof_pairs
        if side in ("left", "right"):
            sel = np.isin(pairs[:, 0], self.dx.face_dofs(side))
        elif side in ("bottom", "top"):
            sel = np.isin(pairs[:, 1], self.dy.face_dofs("left" if side == "bottom" else "right"))
        else:
            raise BasisError(f"unknown face {side!r}")
        return np.flatnonzero(sel)

    def constant_face_values(self, side: str, value: float) -> dict[int, float]:
        """Coefficients representing a constant trace ``value`` on a face.

        Nodal (p-version) and all face B-spline coefficients take ``value``,
        edge bubbles take zero.
        """
        dofs = self.face_dofs(side)
        pairs = self.dof_pairs[dofs]
        other = pairs[:, 1] if side in ("left", "right") else pairs[:, 0]
        line = self.dy if side in ("left", "right") else self.dx
        if self.family == "p_version":
            nodal = other <= line.n_cells
            vals = np.where(nodal, value, 0.0)
        else:
            vals = np.full(len(dofs), float(value))
        return {int(d): float(v) for d, v in zip(dofs, vals)}

    def evaluate(self, coeffs, points):
        """Field value and gradient at an array of physical points ``(n, 2)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ex = self.dx.locate(pts[:, 0])
        ey = self.dy.locate(pts[:, 1])
        c = np.asarray(coeffs)
        val = np.empty(len(pts))
        grad = np.empty((len(pts), 2))
        pairs = self.local_pairs
        for cx, cy in sorted(set(zip(ex.tolist(), ey.tolist()))):
            sel = (ex == cx) & (ey == cy)
            Nx, dNx = self.dx.eval_cell(cx, pts[sel, 0])
            Ny, dNy = self.dy.eval_cell(cy, pts[sel, 1])
            local = c[self.cell_dofs(cx, cy)]
            i, j = pairs[:, 0], pairs[:, 1]
            val[sel] = (Nx[:, i] * Ny[:, j]) @ local
            grad[sel, 0] = (dNx[:, i] * Ny[:, j]) @ local
            grad[sel, 1] = (Nx[:, i] * dNy[:, j]) @ local
        return val, grad
