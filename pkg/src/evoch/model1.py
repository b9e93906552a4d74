"""Advected Cahn-Hilliard model on an evolving surface.

Backward Euler on the transported-basis Galerkin system

    d/dt (M alpha) + A_N alpha + A_S beta = 0
    A_S alpha + Load(alpha) - M beta = 0

where Load_j = int F'(u_h) chi_j.  Because the basis is transported, the
time derivative of M alpha already contains the G alpha term.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import potential as pot
from .errors import ConfigurationError
from .forms import as_quadrature, nonlinear_load, nonlinear_load_jacobian, quadrature_values
from .newton import NEWTON_TOL, newton, sparse_solve

SCHEMES = ("convex_split", "fully_implicit")


@dataclass(frozen=True)
class PhaseState:
    alpha: np.ndarray  # order parameter coefficients (u or c)
    beta: np.ndarray  # chemical potential coefficients
    time: float
    model: str = "advected"
    delta_used: float = 0.0


def check_admissible(report):
    if not report.admissible:
        raise ConfigurationError(
            "initial datum is not admissible: need |mean(u0)| * S_R < 1, got "
            f"|mean(u0)| = {report.abs_mean:.6g}, S_R = {report.S_R:.6g}, product = {report.product:.6g}"
        )


def _safeguard(mesh, p, quad):
    lo, hi = pot.newton_safeguard_region(p)

    def inside(alpha):
        uq = quadrature_values(mesh, alpha, quad)
        return bool(np.all((uq >= lo) & (uq <= hi)))

    return inside


def initialize(mesh, forms, u0, p, quad="midpoint3", report=None):
    """Initial state from nodal values; beta from the chemical potential equation.

    ``report`` is an admissibility report; an inadmissible datum raises
    ConfigurationError.
    """
    alpha = np.asarray(u0, dtype=float).copy()
    if alpha.shape != (mesh.n_vertices,):
        raise ConfigurationError(f"u0 must have one value per vertex ({mesh.n_vertices}), got {alpha.shape}")
    if np.any(np.abs(alpha) > 1.0):
        raise ConfigurationError(f"u0 must lie in [-1, 1], max |u0| = {np.max(np.abs(alpha))}")
    if report is not None:
        check_admissible(report)
    load = nonlinear_load(mesh, p, alpha, quad=quad)
    beta = sparse_solve(forms.M, forms.A_S @ alpha + load)
    return PhaseState(alpha, beta, mesh.time, "advected", p.delta)


def step(state, mesh_n, mesh_np1, forms_n, forms_np1, dt, p, scheme="convex_split", quad="midpoint3", guess=None):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    quad = as_quadrature(quad)
    N = mesh_np1.n_vertices
    M0, M1 = forms_n.M, forms_np1.M
    A_N, A_S = forms_np1.A_N, forms_np1.A_S
    implicit = scheme == "fully_implicit"
    rhs1 = (M0 @ state.alpha) / dt
    explicit = np.zeros(N) if implicit else M1 @ state.alpha
    K11 = (M1 / dt + A_N).tocsr()

    def residual(x):
        a, b = x[:N], x[N:]
        r1 = K11 @ a + A_S @ b - rhs1
        load = nonlinear_load(mesh_np1, p, a, quad=quad, convex_only=not implicit)
        if implicit:
            load = load - M1 @ a
        r2 = A_S @ a + load - explicit - M1 @ b
        return np.concatenate([r1, r2])

    def jacobian(x):
        a = x[:N]
        Jl = nonlinear_load_jacobian(mesh_np1, p, a, quad=quad, convex_only=not implicit)
        if implicit:
            Jl = Jl - M1
        return sp.bmat([[K11, A_S], [A_S + Jl, -M1]], format="csc")

    start = guess if guess is not None else state
    x0 = np.concatenate([start.alpha, start.beta])
    tol = NEWTON_TOL * max(1.0, mesh_np1.area)
    x, _ = newton(residual, jacobian, x0, lambda x: _safeguard(mesh_np1, p, quad)(x[:N]), tol, sharp=p.sharp)
    return replace(state, alpha=x[:N], beta=x[N:], time=mesh_np1.time, delta_used=p.delta)


def solve_with_continuation(solve, p, levels):
    """Call ``solve(params, guess)`` with delta * 2**levels, then re-solve with
    halved delta down to p.delta, warm-starting from the previous solution."""
    sol = None
    for k in range(levels, -1, -1):
        pk = p.with_delta(min(p.delta * 2.0**k, 0.5)) if p.delta > 0 else p
        sol = solve(pk, sol)
    return sol
