"""One configured run, end to end: build, integrate, diagnose, persist.

Outputs land in the config's output directory: summary.json with the fitted
diagnostics, series.csv with one row per snapshot, config.materialized.json
with every default filled in, and snapshots/ with the raw mode arrays.
Floats are written with Python's shortest round-trip repr, so rerunning the
same config and seed reproduces series.csv bit for bit.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import elliptic, evolve, lyapunov, spectral
from .config import RunConfig, set_in, validate
from .errors import ConfigError, NumericsError
from .profiles import ChannelConfig, build_norm_table, build_profile, smallness_margin


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    summary: dict
    header: list
    rows: list = field(repr=False)
    trajectory: object = field(repr=False)
    profile: object = field(repr=False)


def resolve_weights(cfg, profile):
    """Weight constants with a null C_low replaced by the profile's shear floor."""
    raw = dict(cfg.weights_raw)
    if raw.get("C_low") is None:
        raw["C_low"] = profile.bilip_lower
    return spectral.WeightParams(**raw)


def initial_grid_samples(cfg, channel):
    """Evaluate the configured initial vorticity on the channel grid."""
    spec = cfg.initial_data
    shape = spec["shape"]
    z = channel.z_points()
    if shape == "zero":
        return np.zeros(channel.n_grid, dtype=complex)
    if shape == "mode":
        coeffs = np.zeros(spectral.spectrum_size(channel), dtype=complex)
        eta = spectral.eta_frequencies(channel)
        idx = int(np.argmin(np.abs(eta - spec["eta"])))
        coeffs[idx] = spec["amplitude"] * np.exp(1j * spec["phase"])
        k0 = cfg.mode_ks[0]
        return spectral.from_spectrum(k0, channel, coeffs).grid_values
    if shape == "gaussian":
        u = (z - spec["center"]) / spec["width"]
        return spec["amplitude"] * np.exp(-u * u) * np.exp(1j * spec["oscillation"] * z)
    if shape == "bump":
        u = (z - spec["center"]) / spec["width"]
        out = np.zeros(channel.n_grid, dtype=complex)
        inside = np.abs(u) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return spec["amplitude"] * out * np.exp(1j * spec["oscillation"] * z)
    if shape == "wall_poly":
        p = spec["power"]
        return (spec["amplitude"] * z**p * (1.0 - z) ** p
                * np.exp(1j * spec["oscillation"] * z))
    if shape == "cos_sum":
        out = np.zeros(channel.n_grid, dtype=complex)
        for m, re, im in spec["terms"]:
            out += (re + 1j * im) * np.cos(2.0 * np.pi * m * z)
        return out
    if shape == "noise":
        rng = np.random.default_rng(cfg.seed)
        eta = spectral.eta_frequencies(channel)
        coeffs = rng.standard_normal(eta.size) + 1j * rng.standard_normal(eta.size)
        coeffs[np.abs(eta) > spec["band_limit"]] = 0.0
        k0 = cfg.mode_ks[0]
        return spec["amplitude"] * spectral.from_spectrum(k0, channel, coeffs).grid_values
    raise ValueError(f"unhandled initial data shape {shape!r}")


def _embed_fine(field, channel_fine):
    """The same band-limited function represented on a refined grid.

    Frequencies nest under the doubling used by the refinement probe, and
    the canonical spectrum normalization makes matched coefficients mean
    equal physical values, so this is exact trigonometric interpolation.
    """
    eta_c = field.eta
    eta_f = spectral.eta_frequencies(channel_fine)
    order = np.argsort(eta_f)
    pos = order[np.searchsorted(eta_f[order], eta_c)]
    coeffs = np.zeros(eta_f.size, dtype=complex)
    coeffs[pos] = field.spectrum
    return spectral.from_spectrum(field.k, channel_fine, coeffs, t_stamp=field.t_stamp)


def refinement_probe(cfg, profile, channel, field0):
    """Solve the same initial data on a doubled grid and report the gaps.

    Returns (solve_error, trace_error); trace_error is None off the finite
    channel. The gaps shrink like h^2 and h^4 respectively, so a sweep over
    n_grid doublings exposes the convergence orders as row ratios.
    """
    if channel.kind == "finite":
        n_fine = 2 * channel.n_grid - 1
        channel_fine = ChannelConfig.finite(
            n_fine, x_period=channel.x_period,
            support_interval=channel.support_interval, vanish_order=channel.vanish_order)
    else:
        n_fine = 2 * channel.n_grid
        channel_fine = ChannelConfig.infinite(
            n_fine, half_width=channel.z_max, x_period=channel.x_period,
            support_interval=channel.support_interval, vanish_order=channel.vanish_order)
    profile_fine = build_profile(cfg.profile_name, channel_fine, cfg.profile_params)
    k = cfg.mode_ks[0]
    op_c = elliptic.assemble_conjugated_operator(profile, channel, k)
    op_f = elliptic.assemble_conjugated_operator(profile_fine, channel_fine, k)
    fine0 = _embed_fine(field0, channel_fine)
    psi_c = elliptic.solve_stream(op_c, field0, 0.0)
    psi_f = elliptic.solve_stream(op_f, fine0, 0.0)
    solve_err = float(np.max(np.abs(psi_c.grid_values - psi_f.grid_values[::2])))
    trace_err = None
    if channel.kind == "finite":
        # stencil error against a fixed analytic reference; run data may
        # legitimately vanish at the walls, which would leave only noise
        z = channel.z_points()
        probe = spectral.ModeField(k, channel, np.sin(np.pi * z) * np.exp(0.3 * z) + 0j)
        tr = elliptic.neumann_data_fd(probe)
        trace_err = float(abs(tr.neumann_0 - math.pi)
                          + abs(tr.neumann_1 + math.pi * math.exp(0.3)))
    return solve_err, trace_err


def _mode_label(m):
    return f"k{m}" if m > 0 else f"km{-m}"


def perform(cfg):
    """Run the configured simulation and compute every enabled diagnostic."""
    t_start = time.perf_counter()
    channel = cfg.channel
    profile = build_profile(cfg.profile_name, channel, cfg.profile_params)
    w = resolve_weights(cfg, profile)
    table = build_norm_table(profile)
    samples = initial_grid_samples(cfg, channel)
    initial_modes = {k: samples.copy() for k in cfg.mode_ks}
    state = evolve.build_state(profile, channel, initial_modes)
    state, traj = evolve.integrate(state, cfg.t_end, dt=cfg.dt,
                                   snapshot_every=cfg.snapshot_every)

    J = cfg.ladder_J
    diag = cfg.diagnostics
    times = traj.times
    n_snap = len(times)
    labels = [_mode_label(m) for m in cfg.modes]
    ops = {k: elliptic.assemble_conjugated_operator(profile, channel, k)
           for k in cfg.mode_ks}

    header = ["t"]
    for lab in labels:
        header += [f"{lab}_h{j}" for j in range(J + 1)]
        header += [f"{lab}_psi_l2", f"{lab}_dpsi_l2"]
        if diag.boundary_traces:
            header += [f"{lab}_neumann0_abs", f"{lab}_neumann1_abs"]
    header += [f"E{j}" for j in range(J + 1)]
    support_cols = diag.support_check and channel.support_interval is not None
    if support_cols:
        header += [f"{lab}_support_drift" for lab in labels]

    if support_cols:
        z = channel.z_points()
        a, b = channel.support_interval
        outside = (z < a) | (z > b)

    ladder = lyapunov.ladder_series(traj, table, w, J=J,
                                    ladder_constant=cfg.ladder_constant, channel=channel)

    rows = []
    hj_series = np.zeros((n_snap, J + 1))
    psi_series = np.zeros(n_snap)
    dpsi_series = np.zeros(n_snap)
    for i, t in enumerate(times):
        row = [float(t)]
        snap = traj.snapshots[i]
        for m, k in zip(cfg.modes, cfg.mode_ks):
            omega = spectral.ModeField(k, channel, snap[k], t_stamp=t)
            hj = [spectral.hj_norm(omega, j, homogeneous=False) for j in range(J + 1)]
            psi = elliptic.solve_stream(ops[k], omega, t)
            psi_l2 = spectral.l2_norm(psi)
            dpsi_l2 = spectral.l2_norm(spectral.shifted_derivative(psi, t))
            row += [float(v) for v in hj] + [float(psi_l2), float(dpsi_l2)]
            if diag.boundary_traces:
                tr = elliptic.neumann_data_fd(psi)
                row += [abs(tr.neumann_0), abs(tr.neumann_1)]
            hj_series[i] += np.asarray(hj) ** 2
            psi_series[i] += psi_l2**2
            dpsi_series[i] += dpsi_l2**2
        row += [float(v) for v in ladder.energies[i]]
        if support_cols:
            for k in cfg.mode_ks:
                drift = float(np.max(np.abs(snap[k][outside]
                                            - traj.snapshots[0][k][outside])))
                row.append(drift)
        rows.append(row)
    hj_series = np.sqrt(hj_series)
    psi_series = np.sqrt(psi_series)
    dpsi_series = np.sqrt(dpsi_series)

    summary = {
        "schema_version": cfg.schema_version,
        "run": {
            "profile": cfg.profile_name,
            "params": cfg.profile_params,
            "channel_kind": channel.kind,
            "n_grid": channel.n_grid,
            "modes": list(cfg.modes),
            "dt": traj.metadata["dt"],
            "n_steps": traj.metadata["n_steps"],
            "snapshot_every": cfg.snapshot_every,
            "t_end": cfg.t_end,
            "seed": cfg.seed,
            "smallness_margin": smallness_margin(profile),
        },
        "weights": {"c_exp": w.c_exp, "C_low_effective": w.C_low,
                    "beta": w.beta, "gamma": w.gamma, "delta": w.delta},
        "decay_alpha_psi": None,
        "decay_alpha_dpsi": None,
        "gevrey_C_of_t": None,
        "gevrey_C_ratio_max": None,
        "mono_max_increment_j": None,
        "mono_violations": None,
        "mono_first_violation_t": None,
        "dissipation_C_fit": None,
        "dissipation_C_fit_unbounded": False,
        "dissipation_residual_max": None,
        "boundary_slope_h2": None,
        "support_drift_max": None,
        "solve_probe_error": None,
        "trace_probe_error": None,
        "growth_constant_fit": None,
        "errors": [],
    }

    mono = lyapunov.monotonicity_report(traj, table, w, J=J,
                                        ladder_constant=cfg.ladder_constant,
                                        tol_mono=cfg.tol_mono, channel=channel)
    summary["mono_max_increment_j"] = [float(v) for v in mono.max_increment]
    summary["mono_violations"] = bool(mono.violations)
    summary["mono_first_violation_t"] = [None if v is None else float(v)
                                         for v in mono.first_violation]

    if diag.decay_window is not None:
        for key, series in (("decay_alpha_psi", psi_series),
                            ("decay_alpha_dpsi", dpsi_series)):
            try:
                fit = lyapunov.decay_fit(times, series, window=diag.decay_window)
                summary[key] = fit.alpha
            except ValueError as exc:
                summary["errors"].append(f"{key}: {exc}")

    gevrey = [lyapunov.gevrey_constant_fit(hj_series[i], diag.gevrey_s)
              for i in range(n_snap)]
    summary["gevrey_C_of_t"] = [float(c) for c in gevrey]
    if gevrey[0] > 0:
        summary["gevrey_C_ratio_max"] = float(max(gevrey) / gevrey[0])

    if diag.dissipation:
        try:
            dis = lyapunov.dissipation_residual(traj, w, channel=channel)
            unbounded = math.isinf(dis.c_fit)
            summary["dissipation_C_fit"] = None if unbounded else float(dis.c_fit)
            summary["dissipation_C_fit_unbounded"] = unbounded
            summary["dissipation_residual_max"] = float(np.max(dis.residual))
        except (NumericsError, ValueError) as exc:
            summary["errors"].append(f"dissipation: {exc}")

    if diag.boundary_traces:
        growth = lyapunov.boundary_trace_growth(traj, profile, channel=channel,
                                                window=diag.decay_window)
        summary["boundary_slope_h2"] = float(growth.slope_h2)

    if support_cols:
        drifts = [row[-len(labels):] for row in rows]
        summary["support_drift_max"] = float(np.max(drifts))

    if diag.refinement_probe:
        field0 = spectral.ModeField(cfg.mode_ks[0], channel,
                                    traj.snapshots[0][cfg.mode_ks[0]], t_stamp=0.0)
        solve_err, trace_err = refinement_probe(cfg, profile, channel, field0)
        summary["solve_probe_error"] = solve_err
        summary["trace_probe_error"] = trace_err

    # single growth constant: smallest C with |w(t)|_{H^j} <= C^{1+j} |w(0)|_{H^j}
    base = hj_series[0]
    if np.all(base > 0):
        ratios = hj_series / base
        powers = 1.0 / (1.0 + np.arange(J + 1))
        summary["growth_constant_fit"] = float(np.max(ratios**powers))

    summary["energy_initial"] = [float(v) for v in ladder.energies[0]]
    summary["energy_final"] = [float(v) for v in ladder.energies[-1]]
    summary["ladder_trustworthy"] = [bool(v) for v in ladder.trustworthy[0]]
    summary["runtime_seconds"] = time.perf_counter() - t_start
    return RunResult(config=cfg, summary=summary, header=header, rows=rows,
                     trajectory=traj, profile=profile)


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_series(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(result, base_dir=None):
    """Persist summary.json, series.csv, the materialized config, snapshots/."""
    cfg = result.config
    out = Path(cfg.output_dir)
    if base_dir is not None and not out.is_absolute():
        out = Path(base_dir) / out
    out.mkdir(parents=True, exist_ok=True)
    write_series(out / "series.csv", result.header, result.rows)
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
    with open(out / "config.materialized.json", "w") as fh:
        json.dump(cfg.materialized, fh, indent=2, allow_nan=False)
        fh.write("\n")
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    if cfg.diagnostics.save_snapshots:
        traj = result.trajectory
        for i, t in enumerate(traj.times):
            arrays = {"t": np.asarray(t)}
            for m, k in zip(cfg.modes, cfg.mode_ks):
                arrays[_mode_label(m)] = traj.snapshots[i][k]
            np.savez(snap_dir / f"snap_{i:05d}.npz", **arrays)
    return out


def run(cfg, base_dir=None):
    result = perform(cfg)
    out = write_outputs(result, base_dir=base_dir)
    result.summary["output_dir"] = str(out)
    return result


_SWEEP_COLUMNS = [
    "mono_violations",
    "mono_max_increment_max",
    "dissipation_C_fit",
    "decay_alpha_psi",
    "decay_alpha_dpsi",
    "gevrey_C_ratio_max",
    "growth_constant_fit",
    "boundary_slope_h2",
    "support_drift_max",
    "solve_probe_error",
    "trace_probe_error",
]


def sweep_row(value, summary):
    row = {"value": value}
    for col in _SWEEP_COLUMNS:
        if col == "mono_violations":
            row[col] = summary["mono_violations"]
        elif col == "mono_max_increment_max":
            incs = summary["mono_max_increment_j"]
            row[col] = max(incs) if incs else None
        else:
            row[col] = summary.get(col)
    return row


def sweep_cell(raw_json, dotted, value, cell_dir, base_dir):
    """One sweep cell, importable so a process pool can run it."""
    raw = json.loads(raw_json)
    set_in(raw, dotted, value)
    raw["output_dir"] = cell_dir
    cfg = validate(raw)
    result = run(cfg, base_dir=base_dir)
    return sweep_row(value, result.summary)


def read_series(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.asarray([[float(x) for x in line.split(",")] for line in lines[1:]])
    return header, data


def refit_directory(run_dir, window=None, s=None):
    """Recompute the decay and Gevrey fits of a finished run from its series.

    No re-simulation: everything comes from series.csv. The updated numbers
    are written back into summary.json together with the window and s used.
    Raises ConfigError when required columns are missing, ValueError when the
    stored series cannot support a fit (e.g. identically zero).
    """
    run_dir = Path(run_dir)
    problems = []
    for name in ("series.csv", "summary.json", "config.materialized.json"):
        if not (run_dir / name).exists():
            problems.append(f"{run_dir / name}: missing")
    if problems:
        raise ConfigError(problems)
    header, data = read_series(run_dir / "series.csv")
    with open(run_dir / "summary.json") as fh:
        summary = json.load(fh)
    with open(run_dir / "config.materialized.json") as fh:
        materialized = json.load(fh)
    diag = materialized["diagnostics"]
    if window is None:
        window = diag.get("decay_window")
    if s is None:
        s = diag.get("gevrey_s", 1.0)

    if "t" not in header:
        problems.append("series.csv: no t column")
    psi_cols = [i for i, name in enumerate(header) if name.endswith("_psi_l2")
                and not name.endswith("_dpsi_l2")]
    dpsi_cols = [i for i, name in enumerate(header) if name.endswith("_dpsi_l2")]
    if not psi_cols:
        problems.append("series.csv: no *_psi_l2 columns")
    if not dpsi_cols:
        problems.append("series.csv: no *_dpsi_l2 columns")
    h_cols = []
    j = 0
    while True:
        cols = [i for i, name in enumerate(header) if name.endswith(f"_h{j}")]
        if not cols:
            break
        h_cols.append(cols)
        j += 1
    if not h_cols:
        problems.append("series.csv: no *_h<j> norm columns")
    if problems:
        raise ConfigError(problems)

    times = data[:, header.index("t")]
    if data.shape[0] < 3:
        raise ValueError(f"series has {data.shape[0]} rows; need at least 3 to fit")

    summary["fit"] = {"window": list(window) if window else None, "s": s}
    if window is not None:
        psi = np.sqrt(np.sum(data[:, psi_cols] ** 2, axis=1))
        dpsi = np.sqrt(np.sum(data[:, dpsi_cols] ** 2, axis=1))
        summary["decay_alpha_psi"] = lyapunov.decay_fit(times, psi, window=window).alpha
        summary["decay_alpha_dpsi"] = lyapunov.decay_fit(times, dpsi, window=window).alpha
    gevrey = []
    for i in range(data.shape[0]):
        norms = np.asarray([math.sqrt(float(np.sum(data[i, cols] ** 2)))
                            for cols in h_cols])
        gevrey.append(float(lyapunov.gevrey_constant_fit(norms, s)))
    summary["gevrey_C_of_t"] = gevrey
    if gevrey[0] > 0:
        summary["gevrey_C_ratio_max"] = float(max(gevrey) / gevrey[0])
    else:
        if all(v == 0 for v in gevrey):
            raise ValueError("stored norm series is identically zero; nothing to fit")
        summary["gevrey_C_ratio_max"] = None
    with open(run_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False)
        fh.write("\n")
    return summary
