"""Penalized linear elasticity of 1D rods on finite cell grids.

The stiffness integrand carries the penalization factor at every
quadrature point, so cut cells see the material jump through their
sub-cell rules. Body forces act on the physical domain only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .basis import Discretization1D
from .errors import ConfigError, SolverError
from .geometry import BoundaryDescriptor, EmbeddedGeometry, ProbeRule, check_boundaries, rod_geometry
from .oracles import f_sin, rod_linear_reference
from .quadrature import cell_points

ROD_CELLS = {"p_version": 2, "bspline": 11}


@dataclass(frozen=True)
class QuadratureConfig:
    """Sub-cell depth and Gauss points per direction (``None``: p + 1)."""

    depth: int = 20
    points: int | None = None
    probe: int | None = None

    def n(self, p: int) -> int:
        return self.points or p + 1

    def probe_rule(self, p: int) -> ProbeRule:
        return ProbeRule(self.probe) if self.probe else ProbeRule.for_degree(p)


@dataclass
class LinearElasticityProblem:
    geometry: EmbeddedGeometry
    E: float = 1.0
    nu: float = 0.0
    A: float = 1.0
    body_force: Callable | None = None
    boundaries: Sequence[BoundaryDescriptor] = ()

    def __post_init__(self):
        if self.E <= 0:
            raise ConfigError("Young's modulus must be positive", "E")
        if not 0.0 <= self.nu < 0.5:
            raise ConfigError("Poisson's ratio must lie in [0, 0.5)", "nu")
        check_boundaries(self.boundaries)


def left_rod_load(x):
    """Sine load restricted to the left rod [0, 1]."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 1.0, f_sin(x), 0.0)


def rod_problem(q: int = 8, delta_u: float = 0.02, load: bool = True) -> LinearElasticityProblem:
    """Rod of the benchmark: clamped at X = 0, end displacement at X = 3."""
    return LinearElasticityProblem(
        geometry=rod_geometry(q),
        body_force=left_rod_load if load else None,
        boundaries=(BoundaryDescriptor("left", dirichlet=0.0), BoundaryDescriptor("right", dirichlet=delta_u)),
    )


def rod_discretization(family: str, p: int, n_cells: int | None = None) -> Discretization1D:
    return Discretization1D(family, p, n_cells or ROD_CELLS[family], 0.0, 3.0)


@dataclass
class CellQuadrature:
    """Integration points of one cell with basis data cached."""

    dofs: np.ndarray
    x: np.ndarray
    w: np.ndarray
    alpha: np.ndarray
    N: np.ndarray
    dN: np.ndarray


def cell_quadrature(geometry: EmbeddedGeometry, disc: Discretization1D, quad: QuadratureConfig) -> list[CellQuadrature]:
    out = []
    n, probe = quad.n(disc.p), quad.probe_rule(disc.p)
    for e in range(disc.n_cells):
        lo, hi = disc.cell_bounds(e)
        pts, w = cell_points([lo], [hi], geometry, n, quad.depth, probe)
        x = pts[:, 0]
        N, dN = disc.eval_cell(e, x)
        out.append(CellQuadrature(disc.cell_dofs(e), x, w, geometry.alpha(x), N, dN))
    return out


@dataclass
class AssembledSystem:
    K: np.ndarray
    f: np.ndarray
    constraints: dict = field(default_factory=dict)

    @property
    def ndofs(self) -> int:
        return len(self.f)


def cell_matrices(problem: LinearElasticityProblem, disc: Discretization1D, quad: QuadratureConfig):
    """Per-cell ``(dofs, K_e, f_e)`` of the penalized rod."""
    mats = []
    for cq in cell_quadrature(problem.geometry, disc, quad):
        k = problem.E * problem.A * cq.alpha * cq.w
        Ke = cq.dN.T @ (k[:, None] * cq.dN)
        fe = np.zeros(len(cq.dofs))
        if problem.body_force is not None:
            b = problem.body_force(cq.x) * (cq.alpha == 1.0)
            fe = cq.N.T @ (cq.w * problem.A * b)
        mats.append((cq.dofs, Ke, fe))
    return mats


def boundary_constraints(problem, disc: Discretization1D) -> tuple[dict[int, float], dict[int, float]]:
    """Dirichlet values and end loads keyed by dof."""
    fixed, loads = {}, {}
    for bc in problem.boundaries:
        dof = int(disc.face_dofs(bc.face)[0])
        if bc.dirichlet is not None:
            fixed[dof] = float(bc.dirichlet)
        else:
            loads[dof] = loads.get(dof, 0.0) + float(bc.traction) * problem.A
    return fixed, loads


def assemble(problem: LinearElasticityProblem, disc: Discretization1D, quad: QuadratureConfig | None = None) -> AssembledSystem:
    """Global stiffness, load vector and Dirichlet map.

    Cell contributions are added in cell order, which keeps the result
    bitwise reproducible.
    """
    quad = quad or QuadratureConfig()
    n = disc.ndofs
    K = np.zeros((n, n))
    f = np.zeros(n)
    for dofs, Ke, fe in cell_matrices(problem, disc, quad):
        K[np.ix_(dofs, dofs)] += Ke
        f[dofs] += fe
    fixed, loads = boundary_constraints(problem, disc)
    for dof, val in loads.items():
        f[dof] += val
    return AssembledSystem(K, f, fixed)


@dataclass
class ReducedSystem:
    K: np.ndarray
    f: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    full: AssembledSystem

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.full.ndofs)
        u[self.free] = u_free
        u[self.fixed] = self.values
        return u


def apply_dirichlet_strong(system: AssembledSystem, constraints: dict[int, float] | None = None) -> ReducedSystem:
    """Eliminate prescribed dofs; their coupling moves to the right-hand side."""
    constraints = system.constraints if constraints is None else constraints
    n = system.ndofs
    bad = [d for d in constraints if not 0 <= d < n]
    if bad:
        raise ConfigError(f"constrained dofs {bad} do not exist (system has {n} dofs)", "constraints")
    fixed = np.array(sorted(constraints), dtype=int)
    values = np.array([constraints[d] for d in fixed], dtype=float)
    free = np.setdiff1d(np.arange(n), fixed)
    Kff = system.K[np.ix_(free, free)]
    f = system.f[free] - system.K[np.ix_(free, fixed)] @ values
    return ReducedSystem(Kff, f, free, fixed, values, system)


def spd_solve(K: np.ndarray, f: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Cholesky solve with symmetric diagonal scaling.

    Penalized fictitious functions have tiny diagonal entries; scaling by
    the diagonal removes that part of the conditioning.
    """
    if K.shape[0] == 0:
        return np.zeros(0)
    d = np.diag(K)
    if np.any(d <= 0):
        raise SolverError("matrix has non-positive diagonal entries", min_diagonal=float(d.min()))
    s = 1.0 / np.sqrt(d)
    Ks = K * s[:, None] * s[None, :]
    try:
        c = scipy.linalg.cho_factor(Ks, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        w = np.linalg.eigvalsh(0.5 * (Ks + Ks.T))
        raise SolverError("matrix is not positive definite", min_eigenvalue=float(w[0]), size=len(d)) from exc
    u = s * scipy.linalg.cho_solve(c, s * f)
    res = np.linalg.norm(K @ u - f)
    scale = max(np.linalg.norm(f), np.linalg.norm(K, 1) * np.linalg.norm(u), 1e-300)
    if res > rtol * scale:
        raise SolverError("residual check failed", residual=float(res), scale=float(scale))
    return u


def scaled_solve(K: np.ndarray, f: np.ndarray) -> np.ndarray:
    """LU solve with symmetric scaling by ``|diag K|**-1/2`` (indefinite tangents)."""
    if K.shape[0] == 0:
        return np.zeros(0)
    d = np.abs(np.diag(K))
    s = 1.0 / np.sqrt(np.where(d > 0, d, 1.0))
    try:
        return s * scipy.linalg.solve(K * s[:, None] * s[None, :], s * f)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError("singular tangent matrix", size=len(d)) from exc


def solve_linear(system: ReducedSystem | AssembledSystem) -> np.ndarray:
    """Coefficient vector of the full system (constrained entries included)."""
    if isinstance(system, AssembledSystem):
        system = apply_dirichlet_strong(system)
    u_free = spd_solve(system.K, system.f)
    return system.expand(u_free)


def strain_energy(u: np.ndarray, K: np.ndarray) -> float:
    return 0.5 * float(u @ K @ u)


def strain_field(u: np.ndarray, disc: Discretization1D, x) -> np.ndarray:
    """Rows ``(x, u_h, eps_h)`` at the sample points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val, der = disc.evaluate(u, x)
    return np.column_stack([x, val, der])


@dataclass
class RodSolution:
    disc: Discretization1D
    system: AssembledSystem
    u: np.ndarray

    @property
    def energy(self) -> float:
        return strain_energy(self.u, self.system.K)


def solve_rod(family: str, p: int, q: int = 8, depth: int = 20, delta_u: float = 0.02, n_cells: int | None = None) -> RodSolution:
    disc = rod_discretization(family, p, n_cells)
    system = assemble(rod_problem(q, delta_u), disc, QuadratureConfig(depth))
    return RodSolution(disc, system, solve_linear(system))


def convergence_study(family: str, p_values, q: int = 8, depth: int = 20, p_ref: int = 30, n_cells: int | None = None):
    """Energy convergence against the body-fitted penalized reference.

    Returns rows ``(family, p, dofs, energy, rel_error)``.
    """
    ref = rod_linear_reference(10.0**-q, p_ref=max(p_ref, max(p_values) + 4)).energy
    rows = []
    for p in p_values:
        sol = solve_rod(family, p, q, depth, n_cells=n_cells)
        rows.append((family, int(p), sol.disc.ndofs, sol.energy, abs(sol.energy - ref) / ref))
    return rows
