"""Density-weighted Cahn-Hilliard model.

The density rho = 1/J is read off the mesh.  With piecewise-constant rho on
affine elements the weighted mass matrix is the reference mass matrix M0 at
every time, so the discrete system is

    M0 (gamma - gamma_old)/dt + A_S_rho omega = 0
    A_S gamma + int rho F'(c_h) chi - M0 omega = 0

and 1^T M0 gamma = int rho c is conserved by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, PreconditionError
from .forms import as_quadrature, assemble, nonlinear_load, nonlinear_load_jacobian
from .geometry import advance_mesh
from .model1 import SCHEMES, PhaseState, _safeguard
from .newton import NEWTON_TOL, newton, sparse_solve


@dataclass(frozen=True)
class WeightedOperators:
    mesh: object
    M0: sp.csr_matrix
    M: sp.csr_matrix
    A_S_rho: sp.csr_matrix
    A_S: sp.csr_matrix
    rho: np.ndarray

    @property
    def time(self):
        return self.mesh.time


def weighted_operators(mesh, forms, M0):
    return WeightedOperators(mesh, M0, forms.M, forms.A_S_rho, forms.A_S, forms.rho)


def operators_at(mesh0, flow, t, M0, quad="midpoint3"):
    mesh = advance_mesh(mesh0, flow, t)
    return weighted_operators(mesh, assemble(mesh, flow, quad), M0)


def initialize_weighted(ops, c0, p, quad="midpoint3"):
    gamma = np.asarray(c0, dtype=float).copy()
    if gamma.shape != (ops.mesh.n_vertices,):
        raise ConfigurationError(f"c0 must have one value per vertex ({ops.mesh.n_vertices}), got {gamma.shape}")
    if np.any(np.abs(gamma) > 1.0):
        raise ConfigurationError(f"c0 must lie in [-1, 1], max |c0| = {np.max(np.abs(gamma))}")
    load = nonlinear_load(ops.mesh, p, gamma, weighted=True, quad=quad, rho=ops.rho)
    omega = sparse_solve(ops.M0, ops.A_S @ gamma + load)
    return PhaseState(gamma, omega, ops.time, "weighted", p.delta)


def step_weighted(state, ops_n, ops_np1, dt, p, scheme="convex_split", quad="midpoint3", guess=None):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    quad = as_quadrature(quad)
    mesh = ops_np1.mesh
    N = mesh.n_vertices
    M0, A_Sr, A_S = ops_np1.M0, ops_np1.A_S_rho, ops_np1.A_S
    implicit = scheme == "fully_implicit"
    convex_only = not implicit
    rhs1 = (M0 @ state.alpha) / dt
    explicit = np.zeros(N) if implicit else M0 @ state.alpha
    K11 = (M0 / dt).tocsr()

    def residual(x):
        g, w = x[:N], x[N:]
        r1 = K11 @ g + A_Sr @ w - rhs1
        load = nonlinear_load(mesh, p, g, weighted=True, quad=quad, rho=ops_np1.rho, convex_only=convex_only)
        r2 = A_S @ g + load - explicit - M0 @ w
        return np.concatenate([r1, r2])

    def jacobian(x):
        Jl = nonlinear_load_jacobian(
            mesh, p, x[:N], weighted=True, quad=quad, rho=ops_np1.rho, convex_only=convex_only
        )
        return sp.bmat([[K11, A_Sr], [A_S + Jl, -M0]], format="csc")

    start = guess if guess is not None else state
    x0 = np.concatenate([start.alpha, start.beta])
    tol = NEWTON_TOL * max(1.0, mesh.area)
    inside = _safeguard(mesh, p, quad)
    x, _ = newton(residual, jacobian, x0, lambda x: inside(x[:N]), tol, sharp=p.sharp)
    return replace(state, alpha=x[:N], beta=x[N:], time=mesh.time, delta_used=p.delta)


# --------------------------------------------------------------------------
# weighted inverse Laplacian
# --------------------------------------------------------------------------


def weighted_load(ops, f):
    """Vector with entries int rho f_h chi_j (M0 equals the weighted mass matrix)."""
    return ops.M0 @ np.asarray(f, dtype=float)


def weighted_inverse_laplacian(ops, f, tol=1e-10):
    """zeta with int rho grad zeta . grad eta = int rho f eta and int zeta = 0."""
    b = weighted_load(ops, f)
    defect = float(np.sum(b))
    if abs(defect) > tol * max(1.0, float(np.sum(np.abs(b)))):
        raise PreconditionError(f"right-hand side has nonzero weighted mean: int rho f = {defect:.3e}")
    N = len(b)
    m = np.asarray(ops.M @ np.ones(N)).reshape(-1, 1)
    K = sp.bmat([[ops.A_S_rho, sp.csr_matrix(m)], [sp.csr_matrix(m.T), None]], format="csc")
    sol = sparse_solve(K, np.concatenate([b, [0.0]]))
    return sol[:N]


def rho_h_minus1_norm(ops, f):
    zeta = weighted_inverse_laplacian(ops, f)
    return float(np.sqrt(max(zeta @ (ops.A_S_rho @ zeta), 0.0)))


# --------------------------------------------------------------------------
# continuous dependence
# --------------------------------------------------------------------------


@dataclass
class StabilityResult:
    times: np.ndarray
    distance: np.ndarray
    C_hat: float
    intercept: float
    fit_residual: float  # max positive deviation of log d above the fitted line

    def envelope(self, t):
        return np.exp(self.intercept + self.C_hat * np.asarray(t))


def fit_exponential_rate(times, distance):
    times = np.asarray(times, dtype=float)
    logd = np.log(np.asarray(distance, dtype=float))
    A = np.stack([np.ones_like(times), times], axis=1)
    (a, c), *_ = np.linalg.lstsq(A, logd, rcond=None)
    resid = float(np.max(logd - (a + c * times)))
    return float(c), float(a), max(resid, 0.0)


def stability_pair(mesh0, flow, c01, c02, p, dt, n_steps, scheme="convex_split", quad="midpoint3"):
    """March two weighted-model trajectories and record ||c1 - c2||_{rho,-1}."""
    quad = as_quadrature(quad)
    start = advance_mesh(mesh0, flow, 0.0)
    forms = assemble(start, flow, quad)
    M0 = forms.M_rho
    ops = weighted_operators(start, forms, M0)
    area0 = float(np.sum(M0 @ np.ones(mesh0.n_vertices)))
    gap = float(np.sum(M0 @ (np.asarray(c01) - np.asarray(c02)))) / area0
    if abs(gap) > 1e-12:
        raise PreconditionError(f"initial data must have equal means; difference {gap:.3e}")
    s1 = initialize_weighted(ops, c01, p, quad)
    s2 = initialize_weighted(ops, c02, p, quad)
    times, dist = [0.0], [rho_h_minus1_norm(ops, s1.alpha - s2.alpha)]
    for n in range(1, n_steps + 1):
        new = operators_at(mesh0, flow, n * dt, M0, quad)
        s1 = step_weighted(s1, ops, new, dt, p, scheme, quad)
        s2 = step_weighted(s2, ops, new, dt, p, scheme, quad)
        ops = new
        times.append(new.time)
        dist.append(rho_h_minus1_norm(ops, s1.alpha - s2.alpha))
    times, dist = np.array(times), np.array(dist)
    C, a, res = fit_exponential_rate(times, dist)
    return StabilityResult(times, dist, C, a, res)
