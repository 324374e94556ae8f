"""Independent reference solutions for the benchmark problems.

Nothing here reuses the cell assembly, basis or sub-cell machinery of the
solvers. The body-fitted references put element boundaries on the material
interfaces and use a Gauss-Lobatto-Legendre nodal (spectral element) basis;
the only shared ingredient is the Gauss-Legendre rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import InvalidDeformationError, SolverError
from .quadrature import gauss_rule

ROD_SEGMENTS = (0.0, 1.0, 7.0 / 3.0, 3.0)


def f_sin(x):
    """Sine body load acting on the left rod."""
    return np.sin(4.0 * np.pi * np.asarray(x, dtype=float)) / 20.0


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

LEFT_ROD_ENERGY_LIMIT = 3.0 / (25600.0 * np.pi**2)


def _load_resultant(x):
    # int_0^x f_sin on the left rod; zero beyond X = 1 since the load integrates to 0 there
    x = np.asarray(x, dtype=float)
    return np.where(x <= 1.0, (1.0 - np.cos(4.0 * np.pi * np.minimum(x, 1.0))) / (80.0 * np.pi), 0.0)


@dataclass(frozen=True)
class RodClosedForm:
    """Exact penalized linear rod: stress ``C - B(X)`` with ``B`` the load resultant."""

    alpha: float
    delta_u: float
    C: float
    energy: float

    def stress(self, x):
        return self.C - _load_resultant(x)

    def strain(self, x):
        x = np.asarray(x, dtype=float)
        a, b = ROD_SEGMENTS[1], ROD_SEGMENTS[2]
        fict = (x > a) & (x < b)
        return self.stress(x) / np.where(fict, self.alpha, 1.0)


def rod_linear_closed_form(alpha: float, delta_u: float = 0.02, load: bool = True) -> RodClosedForm:
    """Analytic solution of the three-segment rod with E = A = 1.

    Statically the stress is ``C - B(X)``; ``C`` follows from the end
    displacement ``int sigma / alpha dX = delta_u``.
    """
    a, b, L = ROD_SEGMENTS[1], ROD_SEGMENTS[2], ROD_SEGMENTS[3]
    s = 1.0 / (80.0 * np.pi) if load else 0.0  # int_0^1 B
    s2 = 1.5 * s**2  # int_0^1 B^2
    flex = a + (b - a) / alpha + (L - b)
    C = (delta_u + s) / flex
    energy = 0.5 * (C**2 * a - 2.0 * C * s + s2 + C**2 * (b - a) / alpha + C**2 * (L - b))
    return RodClosedForm(alpha, delta_u, C, energy)


def convection_diffusion_1d_exact(pe: float, x):
    """Steady two-point profile with c(0) = 0, c(1) = 1: (e^{Pe x} - 1)/(e^{Pe} - 1)."""
    x = np.asarray(x, dtype=float)
    if abs(pe) < 1e-12:
        return x.copy()
    return np.expm1(pe * x) / np.expm1(pe)


def left_rod_nonlinear_energy(load_factor: float = 1.0, E: float = 1.0, npts: int = 400) -> float:
    """Hencky energy of the left rod under the sine load, free at X = 1.

    The rod is statically determinate: the first Piola stress is
    ``P(X) = int_X^1 b``, and the stretch solves ``E ln(l)/l = P``.
    """
    rule = gauss_rule(50)
    edges = np.linspace(0.0, 1.0, npts // 50 + 2)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xs = 0.5 * (a + b) + 0.5 * (b - a) * rule.points
        for xq, wq in zip(xs, 0.5 * (b - a) * rule.weights):
            P = load_factor * (np.cos(4 * np.pi * xq) - 1.0) / (80.0 * np.pi)
            lam = 1.0 if P == 0 else brentq(lambda l: E * np.log(l) / l - P, 1e-3, np.e, xtol=1e-15, rtol=1e-15)
            total += wq * 0.5 * E * np.log(lam) ** 2
    return total


# ---------------------------------------------------------------------------
# Spectral-element body-fitted discretization
# ---------------------------------------------------------------------------


def gll_nodes(p: int):
    """Gauss-Lobatto-Legendre nodes on [-1, 1] (p+1 of them)."""
    if p == 1:
        return np.array([-1.0, 1.0])
    # Newton iteration on (1 - x^2) P_p'(x) from Chebyshev-Gauss-Lobatto guesses
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(100):
        P = np.zeros((p + 1, len(x)))
        P[0], P[1] = 1.0, x
        for k in range(1, p):
            P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dx = (x * P[p] - P[p - 1]) / ((p + 1) * P[p])
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    return x


def lagrange_matrices(nodes: np.ndarray, x: np.ndarray):
    """Values and derivatives of the Lagrange basis on ``nodes`` at ``x``."""
    n = len(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    wb = 1.0 / np.prod(diff, axis=1)  # barycentric weights
    V = np.zeros((len(x), n))
    dV = np.zeros((len(x), n))
    for i in range(n):
        others = np.delete(np.arange(n), i)
        terms = x[:, None] - nodes[None, others]
        V[:, i] = wb[i] * np.prod(terms, axis=1)
        # product rule: sum over the omitted factor
        acc = np.zeros(len(x))
        for k in range(n - 1):
            acc += np.prod(np.delete(terms, k, axis=1), axis=1)
        dV[:, i] = wb[i] * acc
    return V, dV


@dataclass
class SpectralRod:
    """C0 spectral elements, one per segment, nodes shared at interfaces."""

    segments: tuple
    alphas: tuple
    p: int

    def __post_init__(self):
        self.nodes_ref = gll_nodes(self.p)
        nq = self.p + 4
        rule = gauss_rule(nq)
        V, dV = lagrange_matrices(self.nodes_ref, rule.points)
        self.xq, self.wq, self.Bq, self.dBq, self.aq, self.seg = [], [], [], [], [], []
        for e, (a, b) in enumerate(zip(self.segments[:-1], self.segments[1:])):
            J = 0.5 * (b - a)
            self.xq.append(0.5 * (a + b) + J * rule.points)
            self.wq.append(J * rule.weights)
            self.Bq.append(V)
            self.dBq.append(dV / J)
            self.aq.append(np.full(nq, self.alphas[e]))
        self.ndofs = self.p * (len(self.segments) - 1) + 1

    def dofs(self, e: int) -> np.ndarray:
        return e * self.p + np.arange(self.p + 1)

    @property
    def n_el(self) -> int:
        return len(self.segments) - 1

    def nodes(self) -> np.ndarray:
        out = np.empty(self.ndofs)
        for e in range(self.n_el):
            a, b = self.segments[e], self.segments[e + 1]
            out[self.dofs(e)] = 0.5 * (a + b) + 0.5 * (b - a) * self.nodes_ref
        return out

    def element(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e = np.searchsorted(np.asarray(self.segments), x, side="right") - 1
        return np.clip(e, 0, self.n_el - 1), x

    def evaluate(self, u, x):
        e, x = self.element(x)
        val, der = np.empty_like(x), np.empty_like(x)
        for k in np.unique(e):
            sel = e == k
            a, b = self.segments[k], self.segments[k + 1]
            xi = (2.0 * x[sel] - a - b) / (b - a)
            V, dV = lagrange_matrices(self.nodes_ref, xi)
            val[sel] = V @ u[self.dofs(k)]
            der[sel] = dV @ u[self.dofs(k)] * 2.0 / (b - a)
        return val, der


def _solve_constrained(K, r, fixed: dict[int, float]):
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), list(fixed))
    du = np.zeros(n)
    for i, v in fixed.items():
        du[i] = v
    rhs = r[free] - K[np.ix_(free, list(fixed))] @ np.array(list(fixed.values()))
    du[free] = np.linalg.solve(K[np.ix_(free, free)], rhs)
    return du


@dataclass
class LinearReference:
    energy: float
    rod: SpectralRod
    u: np.ndarray

    def displacement(self, x):
        return self.rod.evaluate(self.u, x)[0]

    def strain(self, x):
        return self.rod.evaluate(self.u, x)[1]


def rod_linear_reference(alpha: float, p_ref: int = 30, delta_u: float = 0.02, load: bool = True, E: float = 1.0) -> LinearReference:
    """Body-fitted solve of the penalized linear rod (three fitted segments)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    rod = SpectralRod(ROD_SEGMENTS, (1.0, alpha, 1.0), p_ref)
    K = np.zeros((rod.ndofs, rod.ndofs))
    f = np.zeros(rod.ndofs)
    for e in range(rod.n_el):
        d = rod.dofs(e)
        dB, B, w, a = rod.dBq[e], rod.Bq[e], rod.wq[e], rod.aq[e]
        K[np.ix_(d, d)] += dB.T @ ((E * a * w)[:, None] * dB)
        if load and e == 0:
            f[d] += B.T @ (w * f_sin(rod.xq[e]))
    u = _solve_constrained(K, f, {0: 0.0, rod.ndofs - 1: delta_u})
    # quadrature of the strain energy density is less sensitive to round-off than u K u
    energy = sum(0.5 * np.sum(rod.wq[e] * E * rod.aq[e] * (rod.dBq[e] @ u[rod.dofs(e)]) ** 2) for e in range(rod.n_el))
    return LinearReference(float(energy), rod, u)


@dataclass
class NonlinearReference:
    energy: float
    rod: SpectralRod
    u: np.ndarray
    mode: str
    E: float = 1.0

    def raw_stretch(self, x):
        """Stretch of the deformed configuration, ignoring any reset."""
        return 1.0 + self.rod.evaluate(self.u, x)[1]

    def stretch(self, x):
        lam = self.raw_stretch(x)
        if self.mode == "resetting":
            e, _ = self.rod.element(x)
            lam = np.where(e == 1, 1.0, lam)
        return lam

    def stress(self, x):
        """Cauchy stress with nu = 0 (J = stretch)."""
        e, x = self.rod.element(x)
        alpha = np.asarray(self.rod.alphas)[e]
        lam = self.stretch(x)
        return alpha * self.E * np.log(lam) / lam


def rod_nonlinear_reference(
    alpha: float,
    delta_u: float = 1.0,
    increments: int = 10,
    p_ref: int = 30,
    mode: str = "resetting",
    load: bool = True,
    E: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> NonlinearReference:
    """Body-fitted Hencky rod under displacement increments.

    In resetting mode the fictitious segment is evaluated at its reference
    configuration before every stress evaluation, so it only contributes
    the linear stiffness ``alpha * E``.
    """
    if mode not in ("standard", "resetting"):
        raise ValueError(f"unknown mode {mode!r}")
    rod = SpectralRod(ROD_SEGMENTS, (1.0, alpha, 1.0), p_ref)
    n = rod.ndofs
    u = np.zeros(n)

    def internal(u):
        F = np.zeros(n)
        K = np.zeros((n, n))
        for e in range(rod.n_el):
            d = rod.dofs(e)
            dB, w, a = rod.dBq[e], rod.wq[e], rod.aq[e]
            if mode == "resetting" and e == 1:
                P = np.zeros_like(w)
                dP = a * E
            else:
                lam = 1.0 + dB @ u[d]
                if np.any(lam <= 0):
                    k = int(np.argmin(lam))
                    raise InvalidDeformationError(float(rod.xq[e][k]), float(lam[k]))
                P = a * E * np.log(lam) / lam
                dP = a * E * (1.0 - np.log(lam)) / lam**2
            F[d] += dB.T @ (w * P)
            K[np.ix_(d, d)] += dB.T @ ((w * dP)[:, None] * dB)
        return F, K

    f_ref = np.zeros(n)
    if load:
        d = rod.dofs(0)
        f_ref[d] += rod.Bq[0].T @ (rod.wq[0] * f_sin(rod.xq[0]))
    free = np.arange(1, n - 1)
    for inc in range(1, increments + 1):
        t = inc / increments
        F, K = internal(u)
        R = F - t * f_ref
        du = _solve_constrained(K, -R, {0: 0.0, n - 1: t * delta_u - u[-1]})
        u = u + du
        ref = max(np.linalg.norm(R[free] + K[np.ix_(free, [n - 1])] @ du[[n - 1]]), np.linalg.norm(t * f_ref), 1e-300)
        for _ in range(max_iter):
            F, K = internal(u)
            R = F - t * f_ref
            if np.linalg.norm(R[free]) <= tol * ref:
                break
            u = u + _solve_constrained(K, -R, {0: 0.0, n - 1: 0.0})
        else:
            raise SolverError("body-fitted Newton iteration did not converge", increment=inc)

    energy = 0.0
    for e in range(rod.n_el):
        if mode == "resetting" and e == 1:
            continue
        lam = 1.0 + rod.dBq[e] @ u[rod.dofs(e)]
        energy += np.sum(rod.wq[e] * rod.aq[e] * 0.5 * E * np.log(lam) ** 2)
    return NonlinearReference(float(energy), rod, u, mode, E)


def two_point_fd(pe: float, n: int = 4000) -> Callable[[np.ndarray], np.ndarray]:
    """Central finite-difference solution of c'' = Pe c' on [0, 1] (check of the closed form)."""
    h = 1.0 / n
    x = np.linspace(0.0, 1.0, n + 1)
    lo = np.full(n - 1, 1.0 / h**2 + pe / (2 * h))
    di = np.full(n - 1, -2.0 / h**2)
    up = np.full(n - 1, 1.0 / h**2 - pe / (2 * h))
    rhs = np.zeros(n - 1)
    rhs[-1] -= up[-1] * 1.0
    ab = np.vstack([np.r_[0.0, up[:-1]], di, np.r_[lo[1:], 0.0]])
    c = np.r_[0.0, solve_banded((1, 1), ab, rhs), 1.0]
    return lambda xx: np.interp(xx, x, c)
