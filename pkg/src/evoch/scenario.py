"""Scenario assembly and the run loop: config in, trajectory and files out."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import model1, model2
from .config import RESOLVED_CONFIG_NAME, dump_config, output_directory
from .diagnostics import (
    DEFAULT_DTS,
    TRANSPORT_CHECKS,
    admissibility_report,
    default_test_fields,
    record,
    transport_convergence,
    verify_transport_identity,
)
from .errors import ConfigurationError, EvochError, PreconditionError
from .forms import as_quadrature, assemble, mass_matrix
from .geometry import advance_mesh, build_reference_surface
from .io import PARTIAL_MARKER, CsvWriter, write_vtk
from .potential import PotentialParams

MIN_ORDER = 1.8
RHO_ODE_DT = 1e-4


@dataclass
class Simulation:
    cfg: object
    mesh0: object
    flow: object
    p: PotentialParams
    quad: object


def build(cfg):
    mesh0 = build_reference_surface(cfg.surface.preset, cfg.surface.refinement, cfg.surface.radius)
    return Simulation(cfg, mesh0, cfg.flow_field(), PotentialParams(cfg.theta, cfg.delta), as_quadrature(cfg.quadrature))


def time_grid(T, dt):
    """t_n = n dt for n < N and t_N = T exactly."""
    if T == 0:
        return np.zeros(1)
    n = max(1, math.ceil(T / dt - 1e-9))
    t = np.arange(n + 1, dtype=float) * dt
    t[-1] = T
    return t


def _shift_to_mean(mesh, u, mean, quad):
    M = mass_matrix(mesh, quad)
    ones = np.ones(mesh.n_vertices)
    return u - float(ones @ (M @ u)) / float(ones @ (M @ ones)) + mean


def initial_data(mesh, spec, quad="midpoint3"):
    """Nodal values of u0 on the mesh at t = 0.

    random_uniform draws i.i.d. U(-a, a) from a seeded PCG64 generator and
    shifts them so the M-weighted mean is exactly ``spec.mean``.
    """
    quad = as_quadrature(quad)
    if spec.preset == "constant":
        u = np.full(mesh.n_vertices, float(spec.value))
    elif spec.preset == "random_uniform":
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        u = _shift_to_mean(mesh, rng.uniform(-spec.amplitude, spec.amplitude, mesh.n_vertices), spec.mean, quad)
    else:
        x = mesh.vertices_cur
        v = spec.amplitude * x[:, 2] / np.linalg.norm(x, axis=1)
        u = _shift_to_mean(mesh, v, spec.mean, quad)
    if np.any(np.abs(u) > 1.0):
        raise ConfigurationError(
            f"u0 leaves [-1, 1] (max |u0| = {np.max(np.abs(u)):.6g}); reduce u0.amplitude or |u0.mean|"
        )
    return u


def admissibility(cfg, sim=None, u0=None):
    sim = sim or build(cfg)
    start = advance_mesh(sim.mesh0, sim.flow, 0.0)
    if u0 is None:
        u0 = initial_data(start, cfg.u0, sim.quad)
    return admissibility_report(u0, sim.mesh0, sim.flow, cfg.T, cfg.admissibility_samples, sim.quad)


# --------------------------------------------------------------------------
# run loop
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    status: int
    records: list = field(default_factory=list)
    state: Optional[object] = None
    error: Optional[str] = None
    admissibility: Optional[object] = None
    out_dir: Optional[Path] = None
    # re-solves the last step with other potential params (None before any step)
    resolve_last: Optional[Callable] = None


def _first_step(solve, p, levels, n):
    if n == 1 and levels > 0:
        return model1.solve_with_continuation(solve, p, levels)
    return solve(p, None)


def _trajectory(sim, result, emit):
    cfg, flow, p, quad = sim.cfg, sim.flow, sim.p, sim.quad
    times = time_grid(cfg.T, cfg.dt)
    mesh = advance_mesh(sim.mesh0, flow, 0.0)
    forms = assemble(mesh, flow, quad)
    area0 = mesh.area
    u0 = initial_data(mesh, cfg.u0, quad)
    rep = admissibility(cfg, sim, u0)
    result.admissibility = rep
    weighted = cfg.model == "weighted"
    if weighted:
        M0 = forms.M_rho
        if rep.abs_mean >= 1.0:
            raise ConfigurationError(f"initial datum is not admissible: |mean(c0)| = {rep.abs_mean:.6g} must be < 1")
        ops = model2.weighted_operators(mesh, forms, M0)
        state = model2.initialize_weighted(ops, u0, p, quad)
    else:
        M0 = None
        state = model1.initialize(mesh, forms, u0, p, quad, report=rep)
    S_R = 1.0
    emit(0, state, mesh, record(state, mesh, p, forms, quad, S_R, M0))
    for n in range(1, len(times)):
        t = float(times[n])
        dt = t - float(times[n - 1])
        mesh_new = advance_mesh(sim.mesh0, flow, t)
        forms_new = assemble(mesh_new, flow, quad)
        prev = state
        if weighted:
            ops_new = model2.weighted_operators(mesh_new, forms_new, M0)

            def solve(pk, guess, prev=prev, ops=ops, ops_new=ops_new, dt=dt):
                return model2.step_weighted(prev, ops, ops_new, dt, pk, cfg.scheme, quad, guess)

            ops = ops_new
        else:

            def solve(pk, guess, prev=prev, mesh=mesh, mesh_new=mesh_new, forms=forms, forms_new=forms_new, dt=dt):
                return model1.step(prev, mesh, mesh_new, forms, forms_new, dt, pk, cfg.scheme, quad, guess)

        state = _first_step(solve, p, cfg.delta_continuation, n)
        result.resolve_last = lambda pk, solve=solve, state=state: solve(pk, state)
        mesh, forms = mesh_new, forms_new
        S_R = max(S_R, area0 / mesh.area)
        emit(n, state, mesh, record(state, mesh, p, forms, quad, S_R, M0))
    return state


def run(cfg, out_dir=None, write=True):
    """Run a scenario; returns a RunResult with status 0 on success, 2 on step failure.

    Configuration problems (including an inadmissible u0) raise
    ConfigurationError before anything is written.
    """
    sim = build(cfg)
    result = RunResult(status=0)
    writer = None
    if write:
        out = Path(out_dir) if out_dir is not None else output_directory(cfg)
        out.mkdir(parents=True, exist_ok=True)
        (out / PARTIAL_MARKER).unlink(missing_ok=True)
        result.out_dir = out
        dump_config(cfg, out / RESOLVED_CONFIG_NAME)
        for old in out.glob("snapshot_*.vtk"):
            old.unlink()
        writer = CsvWriter(out / cfg.output.csv_name)

    def emit(n, state, mesh, rec):
        result.records.append(rec)
        result.state = state
        if writer is None:
            return
        writer.write(n, rec)
        if n % cfg.output.snapshot_every == 0:
            write_vtk(
                result.out_dir / f"snapshot_{n:06d}.vtk",
                mesh.vertices_cur,
                mesh.triangles,
                {"u": state.alpha, "w": state.beta},
                title=f"evoch {cfg.model} step {n} t={rec.time!r}",
            )

    try:
        _trajectory(sim, result, emit)
    except ConfigurationError:
        if writer is not None:
            writer.close()
        raise
    except EvochError as exc:
        result.status = 2
        result.error = f"{type(exc).__name__}: {exc}"
        if writer is not None:
            (result.out_dir / PARTIAL_MARKER).write_text(
                f"run stopped after {len(result.records) - 1} completed steps\n{result.error}\n"
            )
    finally:
        if writer is not None:
            writer.close()
    return result


def run_scenario(cfg, out_dir=None):
    return run(cfg, out_dir).status


def inactivity_certificate(result, p):
    """Max-norm change of the final alpha when the last step is re-solved with delta/2."""
    if result.resolve_last is None:
        return 0.0
    again = result.resolve_last(p.with_delta(p.delta / 2.0))
    return float(np.max(np.abs(again.alpha - result.state.alpha)))


# --------------------------------------------------------------------------
# transport verification
# --------------------------------------------------------------------------


def verify_times(T, count=5):
    horizon = T if T > 0 else 1.0
    return [horizon * (k + 1) / count for k in range(count)]


def verify(cfg, which=TRANSPORT_CHECKS, dts=DEFAULT_DTS):
    """Transport-identity battery over 5 times in (0, T]; returns (rows, exit status)."""
    sim = build(cfg)
    eta, phi = default_test_fields(sim.mesh0)
    rows, status = [], 0
    for w in which:
        if w not in TRANSPORT_CHECKS:
            raise ConfigurationError(f"unknown check {w!r}; expected one of {TRANSPORT_CHECKS}")
        for t in verify_times(cfg.T):
            row = transport_convergence(sim.mesh0, sim.flow, w, eta, phi, t, dts, sim.quad)
            if w == "rho_ode":
                row["residual_fine"] = verify_transport_identity(sim.mesh0, sim.flow, w, t=t, dt=RHO_ODE_DT)
            if row["status"] == "order" and not row["order"] >= MIN_ORDER:
                status = 1
            rows.append(row)
    return rows, status


def format_verify_table(rows):
    head = f"{'check':<14} {'t':>8} " + " ".join(f"{'r(dt=' + format(d, 'g') + ')':>14}" for d in rows[0]["dts"])
    lines = [head + f" {'order':>9}"]
    for r in rows:
        order = f"{r['order']:.3f}" if r["status"] == "order" else r["status"]
        line = f"{r['which']:<14} {r['t']:>8.4f} " + " ".join(f"{x:>14.3e}" for x in r["residuals"])
        line += f" {order:>9}"
        if "residual_fine" in r:
            line += f"   r(dt={RHO_ODE_DT:g}) = {r['residual_fine']:.3e}"
        lines.append(line)
    return "\n".join(lines)


# --------------------------------------------------------------------------
# continuous dependence
# --------------------------------------------------------------------------


def stability_pair_run(cfg, size=1e-3, seed=1, n_steps=None):
    """Two weighted trajectories from c0 and c0 + q with ||q||_{rho,-1} = size
    and zero weighted mean; q is drawn from a seeded PCG64 generator."""
    if cfg.model != "weighted":
        raise ConfigurationError("stability_pair_run needs model='weighted'")
    sim = build(cfg)
    start = advance_mesh(sim.mesh0, sim.flow, 0.0)
    forms = assemble(start, sim.flow, sim.quad)
    ops = model2.weighted_operators(start, forms, forms.M_rho)
    c01 = initial_data(start, cfg.u0, sim.quad)
    rng = np.random.Generator(np.random.PCG64(seed))
    q = rng.standard_normal(start.n_vertices)
    ones = np.ones(start.n_vertices)
    q -= float(ones @ (ops.M0 @ q)) / float(ones @ (ops.M0 @ ones))
    q *= size / model2.rho_h_minus1_norm(ops, q)
    c02 = c01 + q
    if np.any(np.abs(c02) > 1.0):
        raise PreconditionError("perturbed datum leaves [-1, 1]; reduce size")
    steps = n_steps if n_steps is not None else len(time_grid(cfg.T, cfg.dt)) - 1
    return model2.stability_pair(sim.mesh0, sim.flow, c01, c02, sim.p, cfg.dt, steps, cfg.scheme, sim.quad)
