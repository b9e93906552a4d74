"""Per-step scalars and numerical checks of the transport identities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import potential as pot
from .errors import DomainError
from .forms import (
    advective_transport_matrix,
    as_quadrature,
    assemble,
    integrate,
    mass_matrix,
    quadrature_values,
    rho_stiffness_transport_matrix,
    stiffness_matrix,
    velocity_jacobian,
)
from .geometry import advance_mesh, area_ratio_and_density

TRANSPORT_CHECKS = ("m_form", "aS_form", "aN_form", "rho_grad_form", "rho_ode")
EXACT_TOL = 1e-12
ROUNDOFF_FACTOR = 64.0
DEFAULT_DTS = (1e-2, 5e-3, 2.5e-3)


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    grad_w_norm_sq: float
    u_min: float
    u_max: float
    xi: float
    mean_w: float
    area: float
    S_R_running: float
    separation_violated: bool = False

    def as_dict(self):
        return asdict(self)


def energy(mesh, alpha, p, quad="midpoint3", rho=None):
    """int |grad u|^2/2 + [rho] F(u); nan if a sharp potential is evaluated outside [-1, 1]."""
    quad = as_quadrature(quad)
    grad = 0.5 * float(alpha @ (stiffness_matrix(mesh) @ alpha))
    uq = quadrature_values(mesh, alpha, quad)
    try:
        Fq = pot.F_value(uq, p)
    except DomainError:
        return float("nan")
    if rho is not None:
        Fq = Fq * np.asarray(rho)[:, None]
    return grad + integrate(mesh, Fq, quad)


def record(state, mesh, p, forms, quad="midpoint3", S_R_running=1.0, M0=None):
    """Diagnostics of a state on the mesh it lives on.

    For the weighted model pass the reference mass matrix ``M0``; masses
    and energies then carry the density.
    """
    weighted = state.model == "weighted"
    a, b = state.alpha, state.beta
    ones = np.ones(len(a))
    if weighted:
        mass = float(ones @ (M0 @ a))
        e = energy(mesh, a, p, quad, rho=forms.rho)
        gw = float(b @ (forms.A_S_rho @ b))
    else:
        mass = float(ones @ (forms.M @ a))
        e = energy(mesh, a, p, quad)
        gw = float(b @ (forms.A_S @ b))
    u_min, u_max = float(np.min(a)), float(np.max(a))
    xi = 1.0 - max(abs(u_min), abs(u_max))
    area = mesh.area
    mean_w = float(ones @ (forms.M @ b)) / area
    violated = xi <= 0.0 if p.sharp else False
    return DiagnosticsRecord(
        time=float(state.time),
        mass=mass,
        energy=e,
        grad_w_norm_sq=gw,
        u_min=u_min,
        u_max=u_max,
        xi=xi,
        mean_w=mean_w,
        area=area,
        S_R_running=float(S_R_running),
        separation_violated=bool(violated),
    )


# --------------------------------------------------------------------------
# transport identities
# --------------------------------------------------------------------------


def _form_and_prediction(which, mesh, flow, eta, phi, quad):
    F = assemble(mesh, flow, quad)
    if which == "m_form":
        return eta @ (F.M @ phi), eta @ (F.G @ phi)
    if which == "aS_form":
        return eta @ (F.A_S @ phi), eta @ (F.B_mat @ phi)
    if which == "aN_form":
        return phi @ (F.A_N @ eta), phi @ (advective_transport_matrix(mesh, flow, quad) @ eta)
    if which == "rho_grad_form":
        return eta @ (F.A_S_rho @ phi), eta @ (rho_stiffness_transport_matrix(mesh, flow, F.rho) @ phi)
    raise ValueError(f"unknown transport check {which!r}; expected one of {TRANSPORT_CHECKS}")


def _form_value(which, mesh, flow, eta, phi, quad):
    F = assemble(mesh, flow, quad)
    if which == "m_form":
        return eta @ (F.M @ phi)
    if which == "aS_form":
        return eta @ (F.A_S @ phi)
    if which == "aN_form":
        return phi @ (F.A_N @ eta)
    return eta @ (F.A_S_rho @ phi)


def _transport_residual(mesh, flow, which, eta, phi, t, dt, quad):
    """Residual and its floating-point floor (cancellation in the difference)."""
    quad = as_quadrature(quad)
    cur = advance_mesh(mesh, flow, t)
    plus = advance_mesh(mesh, flow, t + dt)
    minus = advance_mesh(mesh, flow, t - dt)
    eps = np.finfo(float).eps
    if which == "rho_ode":
        _, rho = area_ratio_and_density(cur)
        rp = area_ratio_and_density(plus)[1]
        rm = area_ratio_and_density(minus)[1]
        _, div = velocity_jacobian(cur, flow)
        res = float(np.max(np.abs((rp - rm) / (2.0 * dt) + rho * div)))
        return res, ROUNDOFF_FACTOR * eps * float(np.max(rho)) / dt
    eta = np.asarray(eta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    _, pred = _form_and_prediction(which, cur, flow, eta, phi, quad)
    fp = _form_value(which, plus, flow, eta, phi, quad)
    fm = _form_value(which, minus, flow, eta, phi, quad)
    res = float(abs((fp - fm) / (2.0 * dt) - pred))
    floor = ROUNDOFF_FACTOR * eps * ((abs(fp) + abs(fm)) / (2.0 * dt) + abs(pred))
    return res, floor


def verify_transport_identity(mesh, flow, which, eta=None, phi=None, t=0.5, dt=1e-3, quad="midpoint3"):
    """|centered difference of a form in time - its predicted production term|.

    ``eta`` and ``phi`` are fixed nodal coefficient vectors, so they are
    transported with the mesh.  For ``rho_ode`` the fields are ignored and the
    result is max over elements of |d/dt rho + rho div V|.
    """
    return _transport_residual(mesh, flow, which, eta, phi, t, dt, quad)[0]


def observed_orders(dts, residuals):
    """Pairwise orders and the least-squares slope of log r against log dt."""
    r = np.asarray(residuals, dtype=float)
    d = np.asarray(dts, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pair = np.log(r[:-1] / r[1:]) / np.log(d[:-1] / d[1:])
        slope = np.polyfit(np.log(d), np.log(np.maximum(r, 1e-300)), 1)[0]
    return pair, float(slope)


def transport_convergence(mesh, flow, which, eta, phi, t, dts=DEFAULT_DTS, quad="midpoint3"):
    """Residuals over a sequence of time steps with the observed order.

    ``status`` is "exact" when every residual is at most 1e-12, "roundoff"
    when every residual sits below the cancellation floor of the centered
    difference (the identity holds but no order is observable), and
    "order" otherwise.
    """
    pairs = [_transport_residual(mesh, flow, which, eta, phi, t, dt, quad) for dt in dts]
    res = [r for r, _ in pairs]
    pair, slope = observed_orders(dts, res)
    if all(r <= EXACT_TOL for r in res):
        status = "exact"
    elif all(r <= f for r, f in pairs):
        status = "roundoff"
    else:
        status = "order"
    return {
        "which": which,
        "t": float(t),
        "dts": list(dts),
        "residuals": res,
        "floors": [f for _, f in pairs],
        "pair_orders": [float(x) for x in pair],
        "order": slope,
        "status": status,
    }


def default_test_fields(mesh):
    """Two smooth, non-symmetric nodal fields on the reference surface."""
    x = mesh.vertices_ref
    eta = np.sin(x[:, 0]) + x[:, 2] + 0.5 * x[:, 0] * x[:, 1]
    phi = np.cos(2.0 * x[:, 1]) * x[:, 0] + x[:, 2] ** 2
    return eta, phi


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    S_R: float
    abs_mean: float
    product: float
    admissible: bool
    max_m_u0: float
    sample_times: int

    def as_dict(self):
        return asdict(self)


def admissibility_report(u0, mesh, flow, T, sample_count=401, quad="midpoint3"):
    """Sampled shrinkage ratio and the |mean(u0)| * S_R < 1 verdict.

    ``mesh`` is the reference mesh; ``u0`` nodal values on it.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    ref = advance_mesh(mesh, flow, 0.0)
    area0 = ref.area
    integral = float(np.sum(mass_matrix(ref, quad) @ np.asarray(u0, dtype=float)))
    abs_mean = abs(integral) / area0
    times = np.linspace(0.0, float(T), sample_count) if T > 0 else np.zeros(1)
    areas = np.array([advance_mesh(mesh, flow, t).area for t in times])
    S_R = float(np.max(area0 / areas))
    max_m = float(np.max(abs(integral) / areas))
    product = abs_mean * S_R
    # margin keeps u0 == +-1 (a pure phase) rejected despite summation rounding
    admissible = bool(product < 1.0 - 1e-12 and np.all(np.abs(u0) <= 1.0))
    return AdmissibilityReport(S_R, abs_mean, product, admissible, max_m, len(times))
