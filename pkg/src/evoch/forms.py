"""Sparse P1 assembly of the surface bilinear forms on a moving mesh.

Matrix conventions (N = vertex count, chi_i the hat functions):

    M_ij     = int chi_i chi_j
    G_ij     = int chi_i chi_j div_G V
    A_S_ij   = int grad chi_i . grad chi_j
    B_ij     = int B(V) grad chi_i . grad chi_j
    A_N_ij   = int chi_j W . grad chi_i          (W = V_tau - V_a)
    M_rho    = int rho chi_i chi_j
    A_S_rho  = int rho grad chi_i . grad chi_j

The velocity entering G, B and V_tau is the P1 interpolant of the nodal
velocities, i.e. the velocity the discrete surface actually moves with.  This
makes the discrete transport identities hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import potential as pot
from .errors import ConfigurationError, DomainError
from .geometry import advance_mesh, area_ratio_and_density, surface_jacobian

QUADRATURE_POLICIES = ("lumped", "midpoint3", "gauss6")
MATERIAL_FD_STEP = 1e-5


@dataclass(frozen=True)
class Quadrature:
    name: str
    points: np.ndarray  # barycentric, (nq, 3)
    weights: np.ndarray  # (nq,), sum to 1

    @property
    def lumped(self):
        return self.name == "lumped"


def quadrature_rule(policy="midpoint3"):
    if policy == "lumped":
        return Quadrature(policy, np.eye(3), np.full(3, 1.0 / 3.0))
    if policy == "midpoint3":
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        return Quadrature(policy, pts, np.full(3, 1.0 / 3.0))
    if policy == "gauss6":
        a, b = 0.445948490915965, 0.091576213509771
        wa, wb = 0.223381589678011, 0.109951743655322
        pts = np.array(
            [
                [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
                [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
            ]
        )
        w = np.array([wa, wa, wa, wb, wb, wb])
        return Quadrature(policy, pts, w / w.sum())
    raise ConfigurationError(f"unknown quadrature policy {policy!r}; expected one of {QUADRATURE_POLICIES}")


def as_quadrature(q):
    return q if isinstance(q, Quadrature) else quadrature_rule(q)


@dataclass(frozen=True)
class FormMatrices:
    M: sp.csr_matrix
    G: sp.csr_matrix
    A_N: sp.csr_matrix
    A_S: sp.csr_matrix
    B_mat: sp.csr_matrix
    M_rho: sp.csr_matrix
    A_S_rho: sp.csr_matrix
    rho: np.ndarray
    J: np.ndarray
    time: float


# --------------------------------------------------------------------------
# element-level helpers
# --------------------------------------------------------------------------


def _scatter(mesh, local):
    """Sum (n_elem, 3, 3) element matrices into an N x N CSR matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _local_mass(mesh, quad):
    area = mesh.elem_cache.area
    if quad.lumped:
        return area[:, None, None] * np.eye(3)[None] / 3.0
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * ref[None]


def _local_stiffness(mesh, tensor=None):
    g = mesh.elem_cache.shape_grad
    if tensor is None:
        gg = np.einsum("eid,ejd->eij", g, g)
    else:
        gg = np.einsum("eia,eab,ejb->eij", g, tensor, g)
    return mesh.elem_cache.area[:, None, None] * gg


def quadrature_points(mesh, quad):
    x = mesh.vertices_cur[mesh.triangles]  # (e, 3, 3)
    return np.einsum("qk,ekd->eqd", quad.points, x)


def quadrature_values(mesh, nodal, quad):
    vals = np.asarray(nodal, dtype=float)[mesh.triangles]
    return vals @ quad.points.T  # (e, q)


def integrate(mesh, values, quad):
    """Integrate (n_elem, nq) samples over the surface."""
    return float(np.sum(mesh.elem_cache.area * (values @ quad.weights)))


def nodal_velocity(mesh, flow):
    return flow.velocity(mesh.vertices_cur, mesh.time)


def velocity_jacobian(mesh, flow):
    """Per-element grad_Gamma V_h and div_Gamma V_h of the interpolated velocity."""
    jac = surface_jacobian(mesh, nodal_velocity(mesh, flow))
    return jac, np.trace(jac, axis1=1, axis2=2)


def _projector(normal):
    return np.eye(3)[None] - normal[:, :, None] * normal[:, None, :]


def rate_tensor_field(mesh, flow):
    """Per-element B(V) = (div V) I - 2 D(V) with D = P sym(grad V) P."""
    jac, div = velocity_jacobian(mesh, flow)
    P = _projector(mesh.elem_cache.normal)
    D = P @ (0.5 * (jac + jac.transpose(0, 2, 1))) @ P
    return div[:, None, None] * np.eye(3)[None] - 2.0 * D, D, div


def advective_tangential_field(mesh, flow, quad):
    """W = V_tau - V_a at quadrature points, both tangential to the element."""
    quad = as_quadrature(quad)
    Vn = nodal_velocity(mesh, flow)
    Vq = np.einsum("qk,ekd->eqd", quad.points, Vn[mesh.triangles])
    Va = flow.advective(quadrature_points(mesh, quad), mesh.time)
    n = mesh.elem_cache.normal[:, None, :]
    diff = Vq - Va
    return diff - np.sum(diff * n, axis=-1, keepdims=True) * n


def advective_transport_field(mesh, flow, quad, h=MATERIAL_FD_STEP):
    """B_adv at quadrature points.

    The material derivative of W follows quadrature points with fixed
    barycentric coordinates, i.e. the discrete trajectories.
    """
    quad = as_quadrature(quad)
    W = advective_tangential_field(mesh, flow, quad)
    if flow.advective_kind == "zero" and flow.kind == "static":
        return np.zeros_like(W)
    plus = advective_tangential_field(advance_mesh(mesh, flow, mesh.time + h), flow, quad)
    minus = advective_tangential_field(advance_mesh(mesh, flow, mesh.time - h), flow, quad)
    dW = (plus - minus) / (2.0 * h)
    jac, div = velocity_jacobian(mesh, flow)
    # (W . grad) V : sum_j W_j D_j V_i
    conv = np.einsum("eij,eqj->eqi", jac, W)
    return dW + div[:, None, None] * W - conv


# --------------------------------------------------------------------------
# pointwise tensors
# --------------------------------------------------------------------------


def rate_tensor_B(flow, x, t, normal):
    """B(V) = (div_G V) I - 2 P sym(grad V) P at a single point."""
    n = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("normal must have unit length")
    P = np.eye(3) - np.outer(n, n)
    jac = flow.jacobian(t) @ P
    div = np.trace(jac)
    return div * np.eye(3) - 2.0 * (P @ (0.5 * (jac + jac.T)) @ P)


def _transported_normal(flow, n, t, s):
    At, _, _, _ = flow.affine(t)
    As, _, _, _ = flow.affine(s)
    F = As @ np.linalg.inv(At)
    m = np.linalg.solve(F.T, n)
    return m / np.linalg.norm(m)


def _w_point(flow, x, t, n):
    P = np.eye(3) - np.outer(n, n)
    return P @ (flow.velocity(x, t) - flow.advective(x, t))


def adv_tensor_Badv(flow, x, t, normal, h=MATERIAL_FD_STEP):
    """B_adv(V_a^tau, V) at a single point of Gamma(t) with the given normal."""
    x = np.asarray(x, dtype=float)
    n = np.asarray(normal, dtype=float)
    W = _w_point(flow, x, t, n)
    ws = []
    for s in (t + h, t - h):
        xs = flow.transport(x[None], t, s)[0]
        ws.append(_w_point(flow, xs, s, _transported_normal(flow, n, t, s)))
    dW = (ws[0] - ws[1]) / (2.0 * h)
    P = np.eye(3) - np.outer(n, n)
    jac = flow.jacobian(t) @ P
    return dW + np.trace(jac) * W - jac @ W


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


def assemble(mesh, flow, quad="midpoint3"):
    quad = as_quadrature(quad)
    M_loc = _local_mass(mesh, quad)
    A_loc = _local_stiffness(mesh)
    Bten, _, div = rate_tensor_field(mesh, flow)
    B_loc = _local_stiffness(mesh, Bten)
    J, rho = area_ratio_and_density(mesh)

    # A_N: sum_q w_q |T| lambda_j(q) W(q) . grad lambda_i
    W = advective_tangential_field(mesh, flow, quad)
    wg = np.einsum("eqd,eid->eqi", W, mesh.elem_cache.shape_grad)
    AN_loc = np.einsum("q,eqi,qj->eij", quad.weights, wg, quad.points) * mesh.elem_cache.area[:, None, None]

    return FormMatrices(
        M=_scatter(mesh, M_loc),
        G=_scatter(mesh, div[:, None, None] * M_loc),
        A_N=_scatter(mesh, AN_loc),
        A_S=_scatter(mesh, A_loc),
        B_mat=_scatter(mesh, B_loc),
        M_rho=_scatter(mesh, rho[:, None, None] * M_loc),
        A_S_rho=_scatter(mesh, rho[:, None, None] * A_loc),
        rho=rho,
        J=J,
        time=mesh.time,
    )


def mass_matrix(mesh, quad="midpoint3"):
    return _scatter(mesh, _local_mass(mesh, as_quadrature(quad)))


def stiffness_matrix(mesh, rho=None):
    loc = _local_stiffness(mesh)
    if rho is not None:
        loc = np.asarray(rho)[:, None, None] * loc
    return _scatter(mesh, loc)


def rho_stiffness_transport_matrix(mesh, flow, rho):
    """Matrix of int rho (-2 D(V)) grad chi_i . grad chi_j."""
    _, D, _ = rate_tensor_field(mesh, flow)
    return _scatter(mesh, np.asarray(rho)[:, None, None] * _local_stiffness(mesh, -2.0 * D))


def advective_transport_matrix(mesh, flow, quad="midpoint3"):
    """Matrix of int chi_j B_adv . grad chi_i, same ordering as A_N."""
    quad = as_quadrature(quad)
    Badv = advective_transport_field(mesh, flow, quad)
    bg = np.einsum("eqd,eid->eqi", Badv, mesh.elem_cache.shape_grad)
    loc = np.einsum("q,eqi,qj->eij", quad.weights, bg, quad.points) * mesh.elem_cache.area[:, None, None]
    return _scatter(mesh, loc)


# --------------------------------------------------------------------------
# nonlinear terms
# --------------------------------------------------------------------------


def _load_parts(mesh, p, nodal, quad, rho, convex_only):
    nodal = np.asarray(nodal, dtype=float)
    if not np.all(np.isfinite(nodal)):
        raise DomainError("non-finite order parameter")
    if p.sharp and np.any(np.abs(nodal) >= 1.0):
        raise DomainError(f"sharp potential needs |u| < 1 at every node, max |u| = {np.max(np.abs(nodal))!r}")
    uq = quadrature_values(mesh, nodal, quad)
    if convex_only:
        f = 0.5 * p.theta * pot.phi(uq, p)
        df = 0.5 * p.theta * pot.phi_prime(uq, p)
    else:
        f = pot.F_prime(uq, p)
        df = pot.F_second(uq, p)
    scale = mesh.elem_cache.area * (1.0 if rho is None else np.asarray(rho))
    return f, df, scale


def nonlinear_load(mesh, p, nodal, weighted=False, quad="midpoint3", rho=None, convex_only=False):
    """Vector with entries int [rho] F'(u_h) chi_j (or only its convex part)."""
    quad = as_quadrature(quad)
    if weighted and rho is None:
        rho = area_ratio_and_density(mesh)[1]
    f, _, scale = _load_parts(mesh, p, nodal, quad, rho if weighted else None, convex_only)
    local = scale[:, None] * ((f * quad.weights) @ quad.points)  # (e, 3)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles, local)
    return out


def nonlinear_load_jacobian(mesh, p, nodal, weighted=False, quad="midpoint3", rho=None, convex_only=False):
    quad = as_quadrature(quad)
    if weighted and rho is None:
        rho = area_ratio_and_density(mesh)[1]
    _, df, scale = _load_parts(mesh, p, nodal, quad, rho if weighted else None, convex_only)
    local = np.einsum("eq,qi,qj->eij", df * quad.weights, quad.points, quad.points) * scale[:, None, None]
    return _scatter(mesh, local)
