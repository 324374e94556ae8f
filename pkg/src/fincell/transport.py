"""Steady convection-diffusion on an embedding square with penalized inclusions.

The weak form is

    int q c . grad w + (theta nu) grad c . grad w  =  int w f

with both ``q`` and ``theta nu`` multiplied by the penalization factor at
every quadrature point. Dirichlet data are imposed strongly on the left
and right faces; top and bottom faces are natural.

With this sign of the convective term, the one-dimensional solution
``(exp(Pe x / W) - 1) / (exp(Pe) - 1)`` belongs to ``q = (-Pe theta nu / W, 0)``;
:meth:`TransportProblem.from_peclet` builds that velocity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .basis import Discretization2D
from .errors import ConfigError, SolverError
from .geometry import EmbeddedGeometry, inclusion_geometry
from .quadrature import build_subcell_tree, leaf_rules_1d

log = logging.getLogger(__name__)


@dataclass
class TransportProblem:
    """Coefficients and boundary data of one transport run.

    Parameters
    ----------
    geometry : EmbeddedGeometry
        Two-dimensional; inclusions are fictitious.
    q : tuple of float
        Velocity vector as it enters the convective term of the weak form.
    diffusion : float
        Effective diffusion coefficient ``theta nu``.
    source : callable, optional
        ``f(points) -> values``; zero if omitted.
    left, right : float
        Dirichlet values on the left and right faces.
    """

    geometry: EmbeddedGeometry
    q: tuple = (0.0, 0.0)
    diffusion: float = 1.0
    source: Callable | None = None
    left: float = 0.0
    right: float = 1.0

    def __post_init__(self):
        if self.geometry.dim != 2:
            raise ConfigError("transport needs a two-dimensional geometry", "geometry")
        if not self.diffusion > 0:
            raise ConfigError("diffusion coefficient must be positive", "diffusion")
        self.q = (float(self.q[0]), float(self.q[1]))

    @property
    def width(self) -> float:
        return float(self.geometry.upper[0] - self.geometry.lower[0])

    @property
    def peclet(self) -> float:
        return float(np.hypot(*self.q)) * self.width / self.diffusion

    @classmethod
    def from_peclet(cls, geometry: EmbeddedGeometry, pe: float, diffusion: float = 1.0, **kw) -> "TransportProblem":
        """Velocity along x whose 1D solution is the exponential boundary layer at ``x = W``."""
        if pe < 0:
            raise ConfigError("Peclet number must be non-negative", "pe")
        W = float(geometry.upper[0] - geometry.lower[0])
        return cls(geometry, (-pe * diffusion / W, 0.0), diffusion, **kw)


@dataclass
class TransportSystem:
    A: scipy.sparse.csr_matrix
    f: np.ndarray
    constraints: dict = field(default_factory=dict)

    @property
    def ndofs(self) -> int:
        return len(self.f)


def _cell_leaves(geometry, lo, hi, n, m, probe):
    tree = build_subcell_tree(lo, hi, geometry, m, probe)
    los, his = tree.leaf_boxes()
    xs, wx = leaf_rules_1d(los[:, 0], his[:, 0], n)
    ys, wy = leaf_rules_1d(los[:, 1], his[:, 1], n)
    return xs, wx, ys, wy


def cell_matrix(problem: TransportProblem, disc: Discretization2D, ex: int, ey: int, n: int, m: int, probe=None):
    """Local convection-diffusion matrix and load of cell ``(ex, ey)``.

    The integrand is separable apart from the penalization factor, so each
    leaf first contracts over its y points and then over its x points as a
    single matrix product across all leaves.
    """
    lo, hi = disc.cell_bounds(ex, ey)
    xs, wx, ys, wy = _cell_leaves(problem.geometry, lo, hi, n, m, probe)
    L = len(xs)
    X = np.broadcast_to(xs[:, :, None], (L, n, n))
    Y = np.broadcast_to(ys[:, None, :], (L, n, n))
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    alpha = problem.geometry.alpha(pts).reshape(L, n, n)
    A = alpha * wx[:, :, None] * wy[:, None, :]  # (L, a, b)

    Nx, dNx = disc.dx.eval_cell(ex, xs.ravel())
    Ny, dNy = disc.dy.eval_cell(ey, ys.ravel())
    k = Nx.shape[1]
    Nx, dNx = Nx.reshape(L, n, k), dNx.reshape(L, n, k)
    Ny, dNy = Ny.reshape(L, n, k), dNy.reshape(L, n, k)

    def yfactor(P, Q):
        # (L, a, j, l) = sum_b A[L, a, b] P[L, b, j] Q[L, b, l]
        return np.einsum("Lab,Lbj,Lbl->Lajl", A, P, Q, optimize=True).reshape(L * n, k * k)

    def xfactor(P, Q):
        return np.einsum("Lai,Lak->ikLa", P, Q, optimize=True).reshape(k * k, L * n)

    # full tensor blocks indexed [(i, k), (j, l)]: test i, j; trial k, l
    yy = yfactor(Ny, Ny)
    diff = xfactor(dNx, dNx) @ yy + xfactor(Nx, Nx) @ yfactor(dNy, dNy)
    qx, qy = problem.q
    conv = qx * (xfactor(dNx, Nx) @ yy) + qy * (xfactor(Nx, Nx) @ yfactor(dNy, Ny))
    full = (problem.diffusion * diff + conv).reshape(k, k, k, k)  # i, k, j, l

    pairs = disc.local_pairs
    i, j = pairs[:, 0], pairs[:, 1]
    Ke = full[i[:, None], i[None, :], j[:, None], j[None, :]]

    fe = np.zeros(len(pairs))
    if problem.source is not None:
        src = np.asarray(problem.source(pts), dtype=float).reshape(L, n, n)
        # source acts on the physical domain only
        src = src * (alpha == 1.0) * wx[:, :, None] * wy[:, None, :]
        fe = np.einsum("Lab,Lai,Lbj->ij", src, Nx, Ny)[i, j]
    return Ke, fe


def assemble_transport(problem: TransportProblem, disc: Discretization2D, n: int | None = None, m: int = 4, probe=None) -> TransportSystem:
    """Sparse system of the penalized transport problem.

    ``n`` Gauss points per direction per leaf (default ``p + 1``) and
    sub-cell depth ``m``. Dirichlet values of the left and right faces are
    returned as constraints, not applied.
    """
    n = n or disc.p + 1
    rows, cols, vals = [], [], []
    f = np.zeros(disc.ndofs)
    for ex in range(disc.nx):
        for ey in range(disc.ny):
            Ke, fe = cell_matrix(problem, disc, ex, ey, n, m, probe)
            dofs = disc.cell_dofs(ex, ey)
            rows.append(np.repeat(dofs, len(dofs)))
            cols.append(np.tile(dofs, len(dofs)))
            vals.append(Ke.ravel())
            np.add.at(f, dofs, fe)
    N = disc.ndofs
    K = scipy.sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)).tocsr()
    constraints = disc.constant_face_values("left", problem.left)
    constraints.update(disc.constant_face_values("right", problem.right))
    return TransportSystem(K, f, constraints)


def sparse_solve(A, b, rtol: float = 1e-10) -> np.ndarray:
    """Sparse LU with symmetric diagonal scaling and a residual check."""
    if A.shape[0] == 0:
        return np.zeros(0)
    d = np.abs(A.diagonal())
    if np.any(d == 0):
        raise SolverError("zero diagonal entry", count=int(np.sum(d == 0)))
    s = 1.0 / np.sqrt(d)
    S = scipy.sparse.diags(s)
    try:
        y = scipy.sparse.linalg.spsolve((S @ A @ S).tocsc(), s * b)
    except RuntimeError as exc:
        raise SolverError("sparse factorization failed", size=A.shape[0]) from exc
    x = s * y
    res = float(np.linalg.norm(A @ x - b))
    scale = max(float(np.linalg.norm(b)), 1e-300)
    if not np.all(np.isfinite(x)) or res > rtol * max(scale, float(abs(A).sum(axis=1).max()) * float(np.linalg.norm(x))):
        raise SolverError("residual check failed", residual=res, scale=scale)
    return x


@dataclass
class ConcentrationField:
    disc: Discretization2D
    coeffs: np.ndarray
    residual: float = 0.0

    def __call__(self, points) -> np.ndarray:
        return self.disc.evaluate(self.coeffs, points)[0]

    def gradient(self, points) -> np.ndarray:
        return self.disc.evaluate(self.coeffs, points)[1]


def solve_transport(problem: TransportProblem, disc: Discretization2D, n: int | None = None, m: int = 4, probe=None) -> ConcentrationField:
    system = assemble_transport(problem, disc, n, m, probe)
    fixed = np.array(sorted(system.constraints), dtype=int)
    values = np.array([system.constraints[d] for d in fixed])
    free = np.setdiff1d(np.arange(system.ndofs), fixed)
    A = system.A
    rhs = system.f[free] - A[free][:, fixed] @ values
    c = np.zeros(system.ndofs)
    c[fixed] = values
    c[free] = sparse_solve(A[free][:, free], rhs)
    r = system.f[free] - A[free] @ c
    return ConcentrationField(disc, c, float(np.linalg.norm(r)))


def diagonal_profile(field: ConcentrationField, samples: int = 101) -> tuple[np.ndarray, np.ndarray]:
    """Concentration along the main diagonal, parameterized by arc length."""
    if samples < 2:
        raise ValueError("need at least two samples")
    x0, y0, x1, y1 = field.disc.bounds
    t = np.linspace(0.0, 1.0, samples)
    pts = np.column_stack([x0 + t * (x1 - x0), y0 + t * (y1 - y0)])
    s = t * np.hypot(x1 - x0, y1 - y0)
    return s, field(pts)


def grid_values(field: ConcentrationField, nx: int = 41, ny: int = 41) -> np.ndarray:
    """Rows ``(x, y, c)`` on a regular sampling grid, x varying fastest."""
    x0, y0, x1, y1 = field.disc.bounds
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return np.column_stack([pts, field(pts)])


def transport_fixture(
    pe: float = 1.0,
    q: int = 6,
    inclusions=None,
    family: str = "p_version",
    p: int = 8,
    cells: int = 8,
    space_rule: str = "trunk",
):
    """Unit-square benchmark; ``inclusions=()`` gives the inclusion-free case."""
    geom = inclusion_geometry(q=q) if inclusions is None else inclusion_geometry(inclusions, q=q)
    problem = TransportProblem.from_peclet(geom, pe)
    if family != "p_version":
        space_rule = "tensor_product"
    disc = Discretization2D(family, p, cells, cells, (0.0, 0.0, 1.0, 1.0), space_rule)
    return problem, disc


__all__ = [
    "ConcentrationField",
    "TransportProblem",
    "TransportSystem",
    "assemble_transport",
    "cell_matrix",
    "diagonal_profile",
    "grid_values",
    "solve_transport",
    "sparse_solve",
    "transport_fixture",
]
