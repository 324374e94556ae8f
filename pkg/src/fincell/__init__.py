"""High-order finite cell kernels: embedded geometry, p-version and B-spline
bases, sub-cell quadrature, linear and Hencky rods, and 2D transport."""

from .basis import BasisSet, Discretization1D, Discretization2D, eval_bspline_1d, eval_p_version_1d
from .config import RunConfig
from .errors import ConfigError, InvalidDeformationError, SolverError
from .geometry import EmbeddedGeometry, inclusion_geometry, rod_geometry
from .harness import compare, run
from .linear import assemble, convergence_study, solve_linear, solve_rod, strain_energy
from .nonlinear import NonlinearRod, rod_nonlinear
from .quadrature import build_subcell_tree, cell_points, gauss_rule
from .transport import TransportProblem, diagonal_profile, solve_transport

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "ConfigError",
    "Discretization1D",
    "Discretization2D",
    "EmbeddedGeometry",
    "InvalidDeformationError",
    "NonlinearRod",
    "RunConfig",
    "SolverError",
    "TransportProblem",
    "assemble",
    "build_subcell_tree",
    "cell_points",
    "compare",
    "convergence_study",
    "diagonal_profile",
    "eval_bspline_1d",
    "eval_p_version_1d",
    "gauss_rule",
    "inclusion_geometry",
    "rod_geometry",
    "rod_nonlinear",
    "run",
    "solve_linear",
    "solve_rod",
    "solve_transport",
    "strain_energy",
]
