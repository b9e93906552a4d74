import numpy as np
import pytest
import scipy.sparse as sp

from evoch import model1, model2
from evoch.diagnostics import admissibility_report, energy
from evoch.errors import ConfigurationError, PreconditionError, SolverError, StepError
from evoch.forms import assemble
from evoch.geometry import FlowField, advance_mesh
from evoch.newton import newton, sparse_solve
from evoch.potential import F_prime, PotentialParams

P = PotentialParams(0.3, 1e-4)


def _at(mesh0, flow, t):
    m = advance_mesh(mesh0, flow, t)
    return m, assemble(m, flow)


def _random_u0(mesh, seed=7, amp=0.05):
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-amp, amp, mesh.n_vertices)


def test_constant_is_fixed_point(mesh2):
    f = FlowField("static")
    m, F = _at(mesh2, f, 0.0)
    s = model1.initialize(m, F, np.full(mesh2.n_vertices, 0.3), P)
    assert np.allclose(s.beta, float(F_prime(0.3, P)), atol=1e-12)
    m1, F1 = _at(mesh2, f, 0.01)
    s1 = model1.step(s, m, m1, F, F1, 0.01, P)
    assert np.max(np.abs(s1.alpha - 0.3)) < 1e-12
    assert np.allclose(s1.beta, float(F_prime(0.3, P)), atol=1e-10)


@pytest.mark.parametrize("scheme", model1.SCHEMES)
def test_one_step_conserves_mass(mesh2, breathing, scheme):
    m, F = _at(mesh2, breathing, 0.0)
    s = model1.initialize(m, F, _random_u0(mesh2), P)
    m1, F1 = _at(mesh2, breathing, 0.05)
    s1 = model1.step(s, m, m1, F, F1, 0.05, P, scheme)
    one = np.ones(mesh2.n_vertices)
    assert abs(one @ (F1.M @ s1.alpha) - one @ (F.M @ s.alpha)) <= 1e-10 * m1.area
    assert s1.time == 0.05


def test_energy_decreases_50_steps(mesh2):
    f = FlowField("static")
    m, F = _at(mesh2, f, 0.0)
    s = model1.initialize(m, F, _random_u0(mesh2), P)
    E = [energy(m, s.alpha, P)]
    for n in range(50):
        s = model1.step(s, m, m, F, F, 0.005, P)
        E.append(energy(m, s.alpha, P))
    assert np.all(np.diff(E) <= 1e-12)


def test_initialize_validation(mesh2):
    f = FlowField("static")
    m, F = _at(mesh2, f, 0.0)
    with pytest.raises(ConfigurationError):
        model1.initialize(m, F, np.zeros(3), P)
    with pytest.raises(ConfigurationError):
        model1.initialize(m, F, np.full(mesh2.n_vertices, 1.2), P)


def test_admissibility_examples(mesh2):
    f = FlowField("breathing_sphere")
    T = 2 * np.pi
    for mean, ok in [(0.0, True), (0.5, True), (0.8, False)]:
        rep = admissibility_report(np.full(mesh2.n_vertices, mean), mesh2, f, T)
        assert rep.admissible is ok
        assert rep.S_R == pytest.approx(16 / 9, rel=1e-12)
    rep = admissibility_report(np.full(mesh2.n_vertices, 0.8), mesh2, f, T)
    m, F = _at(mesh2, f, 0.0)
    with pytest.raises(ConfigurationError, match="S_R"):
        model1.initialize(m, F, np.full(mesh2.n_vertices, 0.8), P, report=rep)


def test_pure_phase_not_admissible(mesh2):
    rep = admissibility_report(np.ones(mesh2.n_vertices), mesh2, FlowField("static"), 1.0)
    assert not rep.admissible


def test_continuation_halves_delta():
    seen = []

    def solve(pk, guess):
        seen.append((pk.delta, guess))
        return pk.delta

    assert model1.solve_with_continuation(solve, P, 3) == P.delta
    assert [d for d, _ in seen] == pytest.approx([8e-4, 4e-4, 2e-4, 1e-4])
    assert seen[0][1] is None and seen[1][1] == 8e-4


def test_newton_failure_reports_history():
    res = lambda x: np.array([np.arctan(x[0]) + 10.0])  # no root
    jac = lambda x: sp.csc_matrix([[1.0 / (1 + x[0] ** 2)]])
    with pytest.raises(StepError) as info:
        newton(res, jac, np.zeros(1), lambda x: True, 1e-10, max_iter=3)
    assert len(info.value.residual_history) == 4


def test_singular_solve():
    with pytest.raises(SolverError):
        sparse_solve(sp.csc_matrix((2, 2)), np.ones(2))


# --------------------------------------------------------------------------


def _ops(mesh0, flow, t, M0=None):
    m, F = _at(mesh0, flow, t)
    return model2.weighted_operators(m, F, F.M_rho if M0 is None else M0)


def test_weighted_step_conserves_weighted_mass(mesh2):
    f = FlowField("breathing_sphere")
    ops0 = _ops(mesh2, f, 0.0)
    s = model2.initialize_weighted(ops0, _random_u0(mesh2), P)
    ops1 = _ops(mesh2, f, 0.1, ops0.M0)
    s1 = model2.step_weighted(s, ops0, ops1, 0.1, P)
    one = np.ones(mesh2.n_vertices)
    assert abs(one @ (ops0.M0 @ (s1.alpha - s.alpha))) < 1e-14
    assert s1.model == "weighted"


def test_inverse_laplacian_solves(mesh2):
    ops = _ops(mesh2, FlowField("breathing_sphere"), 0.8)
    f = mesh2.vertices_ref[:, 0] * mesh2.vertices_ref[:, 1]
    one = np.ones(mesh2.n_vertices)
    f = f - (one @ (ops.M0 @ f)) / (one @ (ops.M0 @ one))
    z = model2.weighted_inverse_laplacian(ops, f)
    assert np.allclose(ops.A_S_rho @ z, ops.M0 @ f, atol=1e-12)
    assert abs(one @ (ops.M @ z)) < 1e-12
    assert model2.rho_h_minus1_norm(ops, f) > 0


def test_inverse_laplacian_rejects_nonzero_mean(mesh2):
    ops = _ops(mesh2, FlowField("static"), 0.0)
    with pytest.raises(PreconditionError):
        model2.weighted_inverse_laplacian(ops, np.ones(mesh2.n_vertices))


def test_stability_pair_needs_equal_means(mesh2):
    f = FlowField("static")
    c = _random_u0(mesh2)
    with pytest.raises(PreconditionError):
        model2.stability_pair(mesh2, f, c, c + 0.01, P, 0.01, 2)


def test_fit_exponential_rate():
    t = np.linspace(0, 1, 11)
    C, a, res = model2.fit_exponential_rate(t, 3e-3 * np.exp(-1.7 * t))
    assert C == pytest.approx(-1.7, rel=1e-12)
    assert np.exp(a) == pytest.approx(3e-3, rel=1e-12)
    assert res < 1e-12
