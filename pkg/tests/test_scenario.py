import numpy as np
import pytest

from conftest import make_config
from evoch.config import RESOLVED_CONFIG_NAME, parse_config
from evoch.errors import ConfigurationError
from evoch.forms import mass_matrix
from evoch.geometry import build_reference_surface
from evoch.io import PARTIAL_MARKER, read_csv, read_vtk
from evoch.scenario import initial_data, run, time_grid, verify


def test_time_grid():
    assert np.array_equal(time_grid(0.0, 0.1), [0.0])
    t = time_grid(0.25, 0.1)
    assert len(t) == 4 and t[-1] == 0.25
    assert np.all(np.diff(t) > 0)
    assert len(time_grid(1.0, 0.01)) == 101


@pytest.mark.parametrize("preset", ["random_uniform", "harmonic_patch"])
def test_initial_mean_is_exact(mesh2, preset):
    cfg = make_config(u0=dict(preset=preset, seed=3, amplitude=0.1, mean=0.25))
    u = initial_data(mesh2, cfg.u0)
    M = mass_matrix(mesh2)
    assert np.sum(M @ u) / mesh2.area == pytest.approx(0.25, abs=1e-15)


def test_initial_data_range(mesh2):
    cfg = make_config(u0=dict(preset="random_uniform", amplitude=0.5, mean=0.9))
    with pytest.raises(ConfigurationError, match="amplitude"):
        initial_data(mesh2, cfg.u0)


def test_T_zero_writes_one_row(tmp_path):
    cfg = make_config(T=0.0)
    res = run(cfg, tmp_path)
    assert res.status == 0 and len(res.records) == 1
    assert len(read_csv(tmp_path / "diagnostics.csv")) == 1
    assert sorted(p.name for p in tmp_path.glob("*.vtk")) == ["snapshot_000000.vtk"]
    assert parse_config(tmp_path / RESOLVED_CONFIG_NAME) == cfg


def test_records_and_snapshots(tmp_path):
    cfg = make_config(T=0.1, dt=0.01, output=dict(snapshot_every=5))
    res = run(cfg, tmp_path)
    assert res.status == 0
    times = [r.time for r in res.records]
    assert len(times) == 11 and np.all(np.diff(times) > 0)
    assert len(list(tmp_path.glob("snapshot_*.vtk"))) == 3
    snap = read_vtk(tmp_path / "snapshot_000010.vtk")
    assert np.array_equal(snap["point_data"]["u"], res.state.alpha)
    assert not (tmp_path / PARTIAL_MARKER).exists()


def test_inadmissible_run_raises(tmp_path):
    cfg = make_config(flow=dict(preset="breathing_sphere"), T=5.0, u0=dict(preset="constant", value=0.8))
    with pytest.raises(ConfigurationError, match="S_R"):
        run(cfg, tmp_path)


def test_step_failure_leaves_marker(tmp_path, monkeypatch):
    from evoch import model1
    from evoch.errors import StepError

    real = model1.step

    def flaky(state, *args, **kw):
        if state.time >= 0.02 - 1e-12:
            raise StepError("injected", [1.0, 0.5])
        return real(state, *args, **kw)

    monkeypatch.setattr(model1, "step", flaky)
    res = run(make_config(T=0.05), tmp_path)
    assert res.status == 2 and "injected" in res.error
    assert (tmp_path / PARTIAL_MARKER).exists()
    rows = read_csv(tmp_path / "diagnostics.csv")
    assert [r["step"] for r in rows] == [0, 1, 2]
    assert (tmp_path / "diagnostics.csv").read_text().endswith("\n")


def test_weighted_run(tmp_path):
    cfg = make_config(model="weighted", flow=dict(preset="breathing_sphere"), T=0.05)
    res = run(cfg, tmp_path)
    m = np.array([r.mass for r in res.records])
    assert res.status == 0 and np.max(np.abs(m - m[0])) < 1e-13


def test_verify_static_is_exact():
    rows, status = verify(make_config(), ("m_form", "aN_form"))
    assert status == 0 and len(rows) == 10
    assert all(r["status"] == "exact" for r in rows)


def test_verify_unknown_check():
    with pytest.raises(ConfigurationError):
        verify(make_config(), ("nope",))
