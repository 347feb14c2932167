import json
import math
import subprocess
from pathlib import Path

import numpy as np
import pytest

import orrlab.spectral
from orrlab import checks, cli, runner
from orrlab.config import validate
from orrlab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"


def tiny_compact(out_dir, **overrides):
    raw = {
        "profile": {"name": "couette_bump", "params": {"eps": 1e-6, "y0": 0.5, "w": 0.2}},
        "channel": {"kind": "finite", "n_grid": 129, "support_interval": [0.3, 0.7]},
        "modes": [1],
        "initial_data": {"shape": "bump", "center": 0.5, "width": 0.12,
                         "oscillation": 2 * math.pi},
        "time": {"dt": 0.01, "t_end": 5.0, "snapshot_every": 50},
        "diagnostics": {"boundary_traces": True},
        "output_dir": str(out_dir),
    }
    for key, val in overrides.items():
        raw[key] = val
    return raw


@pytest.fixture(scope="module")
def couette_run(tmp_path_factory):
    """The bundled couette example, run once and shared by several tests."""
    base = tmp_path_factory.mktemp("couette")
    raw = json.loads((CONFIGS / "couette.json").read_text())
    raw["output_dir"] = str(base / "run")
    cfg_path = base / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 0
    return base


def test_bundled_couette_run_hits_the_orr_rates(couette_run):
    summary = json.loads((couette_run / "run" / "summary.json").read_text())
    assert abs(summary["decay_alpha_psi"] + 2.0) <= 0.2
    assert abs(summary["decay_alpha_dpsi"] + 1.0) <= 0.2
    assert summary["mono_violations"] is False
    assert summary["dissipation_C_fit"] > 0
    # frozen spectrum: the Gevrey constant cannot grow
    assert summary["gevrey_C_ratio_max"] <= 1.0 + 1e-9


def test_materialized_config_is_complete_and_revalidates(couette_run):
    m = json.loads((couette_run / "run" / "config.materialized.json").read_text())
    for section in ("schema_version", "profile", "channel", "modes", "initial_data",
                    "time", "weights", "ladder", "diagnostics", "output_dir", "seed"):
        assert section in m
    assert m["time"]["dt"] == 0.05
    assert m["initial_data"]["phase"] == 0.0
    again = validate(m)
    assert again.materialized == m


def test_replay_is_bit_identical(couette_run, tmp_path):
    first = (couette_run / "run" / "series.csv").read_bytes()
    raw = json.loads((CONFIGS / "couette.json").read_text())
    raw["output_dir"] = str(tmp_path / "replay")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 0
    assert (tmp_path / "replay" / "series.csv").read_bytes() == first


def test_series_header_matches_declared_columns(couette_run):
    header = (couette_run / "run" / "series.csv").read_text().splitlines()[0]
    cols = header.split(",")
    assert cols[0] == "t"
    for j in range(5):
        assert f"k1_h{j}" in cols
        assert f"E{j}" in cols
    assert "k1_psi_l2" in cols and "k1_dpsi_l2" in cols


def test_refit_window_is_robust_and_updates_summary(couette_run):
    run_dir = couette_run / "run"
    before = json.loads((run_dir / "summary.json").read_text())
    updated = runner.refit_directory(run_dir, window=(20.0, 100.0))
    assert abs(updated["decay_alpha_psi"] - before["decay_alpha_psi"]) <= 0.05
    assert updated["fit"]["window"] == [20.0, 100.0]
    on_disk = json.loads((run_dir / "summary.json").read_text())
    assert on_disk["decay_alpha_psi"] == updated["decay_alpha_psi"]
    # a refit with a different Gevrey exponent stays bounded on frozen data
    updated = runner.refit_directory(run_dir, s=2.0)
    assert updated["gevrey_C_ratio_max"] <= 1.0 + 1e-9


def test_fit_cli_window_and_exit_codes(couette_run):
    assert cli.main(["fit", str(couette_run / "run"), "--window", "20,100"]) == 0
    assert cli.main(["fit", str(couette_run / "run" / "missing")]) == 2


def test_finite_compact_outputs(tmp_path):
    raw = tiny_compact(tmp_path / "out")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["gevrey_C_ratio_max"] <= 2.0
    assert summary["support_drift_max"] == 0.0
    assert abs(summary["boundary_slope_h2"]) <= 0.05
    rows = (tmp_path / "out" / "series.csv").read_text().strip().splitlines()
    snaps = sorted((tmp_path / "out" / "snapshots").glob("snap_*.npz"))
    assert len(snaps) == len(rows) - 1
    with np.load(snaps[-1]) as snap:
        assert set(snap.files) == {"t", "k1"}
        assert snap["k1"].shape == (129,)
        # the stepper accumulates t additively, so the endpoint is float-close
        assert abs(float(snap["t"]) - 5.0) < 1e-9


def test_fit_rejects_zero_series(tmp_path):
    raw = tiny_compact(tmp_path / "out",
                       initial_data={"shape": "zero"},
                       time={"dt": 0.05, "t_end": 1.0, "snapshot_every": 5})
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["dissipation_C_fit_unbounded"] is True
    assert cli.main(["fit", str(tmp_path / "out")]) == 1


def test_fit_enumerates_missing_columns(tmp_path):
    (tmp_path / "series.csv").write_text("t,foo\n0.0,1.0\n1.0,2.0\n2.0,3.0\n")
    (tmp_path / "summary.json").write_text("{}")
    (tmp_path / "config.materialized.json").write_text('{"diagnostics": {}}')
    with pytest.raises(ConfigError) as err:
        runner.refit_directory(tmp_path)
    text = "\n".join(err.value.problems)
    assert "_psi_l2" in text and "_dpsi_l2" in text and "_h<j>" in text


def test_initial_data_shapes(tmp_path):
    def samples(initial, channel, modes=(1,)):
        raw = tiny_compact(tmp_path, initial_data=initial, channel=channel,
                           diagnostics={})
        raw["modes"] = list(modes)
        cfg = validate(raw)
        return runner.initial_grid_samples(cfg, cfg.channel), cfg

    finite = {"kind": "finite", "n_grid": 64}
    infinite = {"kind": "infinite", "n_grid": 64, "half_width": 4.0}

    vals, _ = samples({"shape": "zero"}, finite)
    assert np.all(vals == 0)

    vals, cfg = samples({"shape": "mode", "eta": 2 * math.pi, "amplitude": 2.0}, finite)
    field = orrlab.spectral.ModeField(1.0, cfg.channel, vals)
    spec = np.abs(field.spectrum)
    assert np.sum(spec > 1e-12) == 1
    idx = int(np.argmax(spec))
    assert abs(field.eta[idx] - 2 * math.pi) < 1e-9

    vals, cfg = samples({"shape": "bump", "center": 0.5, "width": 0.1}, finite)
    z = cfg.channel.z_points()
    assert np.all(vals[np.abs(z - 0.5) >= 0.1] == 0)
    assert np.max(np.abs(vals)) > 0.9

    vals, cfg = samples({"shape": "wall_poly", "power": 2}, finite)
    assert vals[0] == 0 and vals[-1] == 0
    z = cfg.channel.z_points()
    assert np.allclose(vals, z**2 * (1 - z) ** 2)

    vals, cfg = samples({"shape": "cos_sum", "terms": [[1, 1.0, 0.0], [2, 0.0, 0.5]]},
                        finite)
    z = cfg.channel.z_points()
    expected = np.cos(2 * np.pi * z) + 0.5j * np.cos(4 * np.pi * z)
    assert np.allclose(vals, expected)

    vals, cfg = samples({"shape": "noise", "band_limit": 3.0}, infinite)
    vals2, _ = samples({"shape": "noise", "band_limit": 3.0}, infinite)
    assert np.array_equal(vals, vals2)
    field = orrlab.spectral.ModeField(1.0, cfg.channel, vals)
    assert np.all(np.abs(field.spectrum[np.abs(field.eta) > 3.0]) < 1e-12)


def test_sweep_eps_violation_flag_and_cell_layout(tmp_path, monkeypatch):
    monkeypatch.setenv("ORRLAB_THREADS", "1")
    raw = tiny_compact(tmp_path / "sweep")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["sweep", str(cfg_path), "--param", "profile.params.eps",
                     "--values", "1e-6,5e-2"]) == 0
    import csv

    rows = list(csv.DictReader(open(tmp_path / "sweep" / "sweep.csv")))
    assert [r["value"] for r in rows] == ["1e-06", "0.05"]
    assert rows[0]["mono_violations"] == "False"
    assert rows[1]["mono_violations"] == "True"
    # every cell keeps its own full output tree with the same seed
    for tag in ("1e-06", "0.05"):
        cell = tmp_path / "sweep" / f"profile.params.eps={tag}"
        m = json.loads((cell / "config.materialized.json").read_text())
        assert m["seed"] == 0
        assert (cell / "series.csv").exists()


def test_sweep_empty_values_writes_header_only(tmp_path, monkeypatch):
    monkeypatch.setenv("ORRLAB_THREADS", "1")
    raw = tiny_compact(tmp_path / "sweep")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["sweep", str(cfg_path), "--param", "profile.params.eps",
                     "--values", ""]) == 0
    lines = (tmp_path / "sweep" / "sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("param,value,mono_violations")


def test_sweep_unknown_param_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ORRLAB_THREADS", "1")
    raw = tiny_compact(tmp_path / "sweep")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["sweep", str(cfg_path), "--param", "profile.params.epz",
                     "--values", "1e-6"]) == 2
    assert "epz" in capsys.readouterr().err


def test_sweep_grid_doubling_exposes_orders(tmp_path, monkeypatch):
    monkeypatch.setenv("ORRLAB_THREADS", "2")
    raw = tiny_compact(tmp_path / "sweep",
                       time={"dt": 0.02, "t_end": 1.0, "snapshot_every": 10},
                       diagnostics={"refinement_probe": True})
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["sweep", str(cfg_path), "--param", "channel.n_grid",
                     "--values", "65,129"]) == 0
    import csv

    rows = list(csv.DictReader(open(tmp_path / "sweep" / "sweep.csv")))
    solve = [float(r["solve_probe_error"]) for r in rows]
    trace = [float(r["trace_probe_error"]) for r in rows]
    assert 3.3 <= solve[0] / solve[1] <= 4.7
    assert 13.0 <= trace[0] / trace[1] <= 19.0


def test_run_config_problems_exit_2(tmp_path, capsys):
    cfg_path = tmp_path / "bad.json"
    raw = tiny_compact(tmp_path / "out")
    raw["time"]["dt"] = -0.01
    cfg_path.write_text(json.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert "time.dt" in err[0]


def test_verify_cli_exit_codes(monkeypatch, capsys):
    fake_pass = [checks.CheckResult("a.b", True, "fine")]
    monkeypatch.setattr(checks, "run_quick", lambda: fake_pass)
    assert cli.main(["verify"]) == 0
    assert "PASS a.b" in capsys.readouterr().out
    fake_fail = [checks.CheckResult("a.b", False, "broken")]
    monkeypatch.setattr(checks, "run_quick", lambda: fake_fail)
    assert cli.main(["verify"]) == 1
    assert "FAIL a.b" in capsys.readouterr().out


def test_quick_battery_passes_fast():
    import time

    t0 = time.perf_counter()
    results = checks.run_quick()
    elapsed = time.perf_counter() - t0
    failed = [r for r in results if not r.passed]
    assert not failed, [f"{r.name}: {r.detail}" for r in failed]
    assert elapsed < 60.0


def test_tampered_weight_fails_loudly(monkeypatch):
    orig = orrlab.spectral.a_infinite_factor
    monkeypatch.setattr(orrlab.spectral, "a_infinite_factor",
                        lambda eta, k, t, w: orig(eta, k, -t, w))
    failed = {r.name for r in checks.run_quick() if not r.passed}
    assert "spectral.weight_envelope" in failed
    assert "lyapunov.frozen_energy_monotone" in failed


def test_console_entry_point():
    proc = subprocess.run(["orrlab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "run" in proc.stdout and "sweep" in proc.stdout
