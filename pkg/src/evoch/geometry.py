"""Evolving triangulated surfaces.

A surface is a fixed connectivity whose vertices are carried from the
reference configuration by an affine-in-space flow map.  Because the basis
functions are attached to vertices, every nodal coefficient vector is
automatically a transported field (zero material derivative).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, GeometryError

SURFACE_PRESETS = ("unit_sphere", "sphere")
FLOW_PRESETS = ("static", "breathing_sphere", "ellipsoid_stretch", "translate_rotate")
ADVECTIVE_PRESETS = ("zero", "rigid_rotation", "user_tangent_field")

MAX_REFINEMENT = 7
DEGENERATE_RATIO = 1e-14


# --------------------------------------------------------------------------
# reference surfaces
# --------------------------------------------------------------------------


def _icosahedron():
    t = (1.0 + 5.0**0.5) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    return verts, faces


def _subdivide(verts, faces):
    # one midpoint per undirected edge, numbered in first-seen order
    edges = np.sort(faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mids = 0.5 * (verts[uniq[:, 0]] + verts[uniq[:, 1]])
    mids /= np.linalg.norm(mids, axis=1)[:, None]
    n = len(verts)
    m = (inverse + n).reshape(-1, 3)
    ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.stack(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    return np.vstack([verts, mids]), new_faces


def icosphere(refinement, radius=1.0):
    verts, faces = _icosahedron()
    for _ in range(refinement):
        verts, faces = _subdivide(verts, faces)
    # orient outward
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    faces[flip] = faces[flip][:, ::-1]
    return radius * verts, faces


def check_closed_orientable(triangles):
    """Raise GeometryError unless every edge is shared by exactly two
    consistently oriented triangles."""
    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    keys = directed[:, 0] * (triangles.max() + 1) + directed[:, 1]
    rev = directed[:, 1] * (triangles.max() + 1) + directed[:, 0]
    if len(np.unique(keys)) != len(keys):
        raise GeometryError("mesh is not consistently oriented (repeated directed edge)")
    if not np.array_equal(np.sort(keys), np.sort(rev)):
        raise GeometryError("mesh is not closed (edge without opposite twin)")


def euler_characteristic(triangles):
    n_vert = len(np.unique(triangles))
    edges = np.unique(np.sort(triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1), axis=0)
    return n_vert - len(edges) + len(triangles)


# --------------------------------------------------------------------------
# mesh
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ElementCache:
    area: np.ndarray  # (n_elem,)
    area_ref: np.ndarray  # (n_elem,)
    normal: np.ndarray  # (n_elem, 3)
    shape_grad: np.ndarray  # (n_elem, 3 local vertices, 3 components)


def _element_geometry(vertices, triangles):
    x0, x1, x2 = (vertices[triangles[:, k]] for k in range(3))
    cr = np.cross(x1 - x0, x2 - x0)
    dbl = np.linalg.norm(cr, axis=1)
    area = 0.5 * dbl
    with np.errstate(divide="ignore", invalid="ignore"):
        normal = cr / dbl[:, None]
        # grad of barycentric coordinate k is n x (opposite edge) / (2A)
        grads = np.stack(
            [np.cross(normal, x2 - x1), np.cross(normal, x0 - x2), np.cross(normal, x1 - x0)],
            axis=1,
        ) / dbl[:, None, None]
    return area, normal, grads


@dataclass(frozen=True)
class SurfaceMesh:
    vertices_ref: np.ndarray
    vertices_cur: np.ndarray
    triangles: np.ndarray
    elem_cache: ElementCache
    time: float = 0.0

    @property
    def n_vertices(self):
        return len(self.vertices_cur)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def area(self):
        return float(np.sum(self.elem_cache.area))

    @property
    def area_ref(self):
        return float(np.sum(self.elem_cache.area_ref))

    @property
    def area_ratio(self):
        """Per-element J = current area / reference area."""
        return self.elem_cache.area / self.elem_cache.area_ref


def make_mesh(vertices_ref, triangles, vertices_cur=None, time=0.0):
    vertices_ref = np.ascontiguousarray(vertices_ref, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if vertices_cur is None:
        vertices_cur = vertices_ref.copy()
    area_ref, _, _ = _element_geometry(vertices_ref, triangles)
    if np.any(~(area_ref > 0)):
        bad = int(np.flatnonzero(~(area_ref > 0))[0])
        raise GeometryError(f"reference element {bad} has non-positive area")
    area, normal, grads = _element_geometry(vertices_cur, triangles)
    small = ~(area >= DEGENERATE_RATIO * area_ref)
    if np.any(small):
        bad = int(np.flatnonzero(small)[0])
        raise GeometryError(
            f"element {bad} degenerated: area {area[bad]:.3e} vs reference {area_ref[bad]:.3e}"
        )
    cache = ElementCache(area=area, area_ref=area_ref, normal=normal, shape_grad=grads)
    return SurfaceMesh(vertices_ref, np.ascontiguousarray(vertices_cur), triangles, cache, float(time))


def build_reference_surface(preset="unit_sphere", refinement=3, radius=1.0):
    if preset not in SURFACE_PRESETS:
        raise ConfigurationError(f"unknown surface preset {preset!r}; expected one of {SURFACE_PRESETS}")
    if not 0 <= int(refinement) <= MAX_REFINEMENT:
        raise ConfigurationError(f"refinement must be in [0, {MAX_REFINEMENT}], got {refinement}")
    if preset == "unit_sphere":
        radius = 1.0
    elif not radius > 0:
        raise ConfigurationError(f"sphere radius must be positive, got {radius}")
    verts, faces = icosphere(int(refinement), radius)
    return make_mesh(verts, faces)


# --------------------------------------------------------------------------
# flows
# --------------------------------------------------------------------------


def _skew(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


_FLOW_DEFAULTS = {
    "static": {},
    "breathing_sphere": {"amplitude": 0.25, "frequency": 1.0},
    "ellipsoid_stretch": {"amplitude": 0.2, "frequency": 1.0},
    "translate_rotate": {"velocity": [0.1, 0.0, 0.0], "angular_rate": 1.0},
}

_ADVECTIVE_DEFAULTS = {
    "zero": {},
    "rigid_rotation": {"omega": [0.0, 0.0, 1.0]},
    "user_tangent_field": {"vector": [1.0, 0.0, 0.0]},
}


@dataclass(frozen=True)
class FlowField:
    """Analytic flow map Phi(p, t) = A(t) p + b(t) and an advective field.

    All presets are affine in space, so the velocity is affine in x and its
    piecewise-linear interpolant on a flat triangle is exact.
    """

    kind: str = "static"
    params: dict = field(default_factory=dict)
    advective_kind: str = "zero"
    advective_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FLOW_PRESETS:
            raise ConfigurationError(f"unknown flow preset {self.kind!r}; expected one of {FLOW_PRESETS}")
        if self.advective_kind not in ADVECTIVE_PRESETS:
            raise ConfigurationError(
                f"unknown advective preset {self.advective_kind!r}; expected one of {ADVECTIVE_PRESETS}"
            )
        params = {**_FLOW_DEFAULTS[self.kind], **(self.params or {})}
        unknown = set(params) - set(_FLOW_DEFAULTS[self.kind])
        if unknown:
            raise ConfigurationError(f"unknown parameters {sorted(unknown)} for flow {self.kind!r}")
        adv = {**_ADVECTIVE_DEFAULTS[self.advective_kind], **(self.advective_params or {})}
        unknown = set(adv) - set(_ADVECTIVE_DEFAULTS[self.advective_kind])
        if unknown:
            raise ConfigurationError(f"unknown parameters {sorted(unknown)} for advective field {self.advective_kind!r}")
        if self.kind in ("breathing_sphere", "ellipsoid_stretch") and not 0 <= params["amplitude"] < 1:
            raise ConfigurationError(f"flow amplitude must be in [0, 1), got {params['amplitude']}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "advective_params", adv)

    # -- the affine map and its time derivative -------------------------
    def affine(self, t):
        """Return (A, b, dA/dt, db/dt) at time t."""
        p = self.params
        eye = np.eye(3)
        if self.kind == "static":
            return eye, np.zeros(3), np.zeros((3, 3)), np.zeros(3)
        if self.kind == "breathing_sphere":
            a, w = p["amplitude"], p["frequency"]
            return (1.0 + a * np.sin(w * t)) * eye, np.zeros(3), a * w * np.cos(w * t) * eye, np.zeros(3)
        if self.kind == "ellipsoid_stretch":
            a, w = p["amplitude"], p["frequency"]
            s, ds = a * np.sin(w * t), a * w * np.cos(w * t)
            return np.diag([1.0 + s, 1.0, 1.0 - s]), np.zeros(3), np.diag([ds, 0.0, -ds]), np.zeros(3)
        # translate_rotate: rotation about the z axis then translation
        v = np.asarray(p["velocity"], dtype=float)
        om = float(p["angular_rate"])
        c, s = np.cos(om * t), np.sin(om * t)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        drot = om * np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])
        return rot, v * t, drot, v

    def position(self, p, t):
        A, b, _, _ = self.affine(t)
        return np.asarray(p) @ A.T + b

    def transport(self, x, t, s):
        """Carry points of Gamma(t) to Gamma(s) along trajectories."""
        At, bt, _, _ = self.affine(t)
        As, bs, _, _ = self.affine(s)
        return np.linalg.solve(At, (np.asarray(x) - bt).T).T @ As.T + bs

    def jacobian(self, t):
        """Ambient spatial Jacobian dV_i/dx_j (constant in space)."""
        A, _, dA, _ = self.affine(t)
        return dA @ np.linalg.inv(A)

    def velocity(self, x, t):
        A, b, dA, db = self.affine(t)
        return (np.asarray(x) - b) @ (dA @ np.linalg.inv(A)).T + db

    def advective(self, x, t):
        """Advective velocity V_a before projection onto the tangent plane."""
        x = np.asarray(x, dtype=float)
        if self.advective_kind == "zero":
            return np.zeros_like(x)
        if self.advective_kind == "rigid_rotation":
            return np.cross(np.asarray(self.advective_params["omega"], dtype=float), x)
        return np.broadcast_to(np.asarray(self.advective_params["vector"], dtype=float), x.shape).copy()


def _project(v, normal):
    return v - np.sum(v * normal, axis=-1, keepdims=True) * normal


def velocity_split(flow, x, t, normal):
    """Return (V, V_tau, V_nu, V_a, V_a^tau) at points x with unit normals."""
    normal = np.asarray(normal, dtype=float)
    if np.any(np.abs(np.linalg.norm(normal, axis=-1) - 1.0) > 1e-12):
        raise ValueError("normal must have unit length")
    V = flow.velocity(x, t)
    V_nu = np.sum(V * normal, axis=-1, keepdims=True) * normal
    V_tau = V - V_nu
    V_a = _project(flow.advective(x, t), normal)
    return V, V_tau, V_nu, V_a, V_tau - V_a


# --------------------------------------------------------------------------
# mesh motion and geometric fields
# --------------------------------------------------------------------------


def advance_mesh(mesh, flow, t):
    """Place the vertices at Phi_t(reference positions) and rebuild the cache."""
    cur = flow.position(mesh.vertices_ref, t)
    return make_mesh(mesh.vertices_ref, mesh.triangles, cur, t)


def density(mesh):
    """Per-element rho = 1/J, rounded so that rho * J == 1 in floating point."""
    J = mesh.area_ratio
    return _exact_reciprocal(J)[1]


def area_ratio_and_density(mesh):
    return _exact_reciprocal(mesh.area_ratio)


def _exact_reciprocal(J):
    J = np.array(J, dtype=np.float64)
    rho = 1.0 / J
    bad = np.flatnonzero(rho * J != 1.0)
    for i in bad:
        # both J and 1/J carry an ulp of rounding; search nearby pairs
        found = False
        for dj in (0, 1, -1, 2, -2, 3, -3):
            Ji = J[i]
            step = np.inf if dj > 0 else -np.inf
            for _ in range(abs(dj)):
                Ji = np.nextafter(Ji, step)
            r = 1.0 / Ji
            for r_try in (r, np.nextafter(r, np.inf), np.nextafter(r, -np.inf)):
                if r_try * Ji == 1.0:
                    J[i], rho[i] = Ji, r_try
                    found = True
                    break
            if found:
                break
    return J, rho


def shrinkage_ratio(mesh, flow, times):
    """Discrete S_R = max_t |Gamma_0| / |Gamma(t)| over the sampled times."""
    a0 = mesh.area_ref
    return max(a0 / advance_mesh(mesh, flow, t).area for t in times)


def tangential_gradients(mesh, nodal):
    """Constant surface gradient of the P1 interpolant on every element."""
    vals = np.asarray(nodal, dtype=float)[mesh.triangles]
    return np.einsum("ek,ekd->ed", vals, mesh.elem_cache.shape_grad)


def tangential_gradient(mesh, nodal, element):
    vals = np.asarray(nodal, dtype=float)[mesh.triangles[element]]
    return vals @ mesh.elem_cache.shape_grad[element]


def surface_jacobian(mesh, nodal_vectors):
    """Per-element tangential Jacobian (grad_Gamma V)_{ij} = D_j V_i of a P1 vector field."""
    vals = np.asarray(nodal_vectors, dtype=float)[mesh.triangles]  # (e, k, i)
    return np.einsum("eki,ekj->eij", vals, mesh.elem_cache.shape_grad)
