"""The acceptance battery behind `orrlab verify --full`.

Nine numbered criteria, each returning (passed, detail). Expensive
simulations are cached and shared between criteria, so the whole battery
runs in well under two minutes. Thresholds are stated inline next to each
gate; details always carry the measured numbers so a failure is debuggable
from the one-line report.
"""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np

from . import elliptic, evolve, lyapunov
from . import spectral as sp
from .profiles import (ChannelConfig, build_norm_table, build_profile,
                       smallness_margin, vanishing_order)

_W = sp.WeightParams()


def _bump_data(channel, center, width, oscillation):
    z = channel.z_points()
    u = (z - center) / width
    out = np.zeros(channel.n_grid, dtype=complex)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out * np.exp(1j * oscillation * z)


def _single_bin(channel, k, eta_target, amp=1.0):
    coeffs = np.zeros(sp.spectrum_size(channel), dtype=complex)
    eta = sp.eta_frequencies(channel)
    idx = int(np.argmin(np.abs(eta - eta_target)))
    coeffs[idx] = amp
    return sp.from_spectrum(k, channel, coeffs)


def _canonical_fields(channel, k, seeds, band_steps=16):
    """Seeded draws on the shared low-frequency bins of nested finite grids."""
    eta = sp.eta_frequencies(channel)
    order = np.argsort(eta)
    targets = 2.0 * np.pi * np.arange(-band_steps, band_steps + 1)
    pos = order[np.searchsorted(eta[order], targets)]
    fields = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal(targets.size) + 1j * rng.standard_normal(targets.size)
        coeffs = np.zeros(eta.size, dtype=complex)
        coeffs[pos] = draws
        fields.append(sp.from_spectrum(k, channel, coeffs))
    return fields


@lru_cache(maxsize=None)
def _couette_frozen_run():
    ch = ChannelConfig.infinite(1024, half_width=8.0)
    profile = build_profile("couette", ch)
    z = ch.z_points()
    data = np.exp(-(z**2)) * np.exp(1j * z)
    t0 = time.perf_counter()
    state = evolve.build_state(profile, ch, {1.0: data})
    state, traj = evolve.integrate(state, 100.0, dt=0.05, snapshot_every=400)
    op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
    spectrum_rel = 0.0
    for i, t in enumerate(traj.times):
        field = sp.ModeField(1.0, ch, traj.snapshots[i][1.0], t_stamp=t)
        psi = elliptic.solve_stream(op, field, float(t))
        expected = -field.spectrum / (1.0 + (field.eta - 1.0 * float(t)) ** 2)
        spectrum_rel = max(spectrum_rel,
                           float(np.max(np.abs(psi.spectrum - expected))
                                 / np.max(np.abs(expected))))
    runtime = time.perf_counter() - t0
    drift = max(float(np.max(np.abs(traj.snapshots[i][1.0] - data)))
                for i in range(len(traj.times)))
    scale = float(np.max(np.abs(data)))
    return {"drift_rel": drift / scale, "spectrum_rel": spectrum_rel,
            "runtime": runtime, "diagonal": op.diagonal}


def criterion_1():
    """Couette transport: frozen vorticity and the explicit stream spectrum."""
    run = _couette_frozen_run()
    ok = (run["drift_rel"] <= 1e-10 and run["spectrum_rel"] <= 1e-8
          and run["runtime"] <= 10.0)
    detail = (f"freeze rel drift {run['drift_rel']:.2e} (<= 1e-10), "
              f"stream spectrum rel err {run['spectrum_rel']:.2e} (<= 1e-8), "
              f"runtime {run['runtime']:.1f}s (<= 10), diagonal route "
              f"{run['diagonal']}")
    return ok, detail


def criterion_2():
    """Orr rates: single-frequency stream decay t^-2, shifted gradient t^-1."""
    ch = ChannelConfig.infinite(256, half_width=8.0)
    profile = build_profile("couette", ch)
    op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
    # a low bin keeps the whole fit window in the asymptotic regime
    field = _single_bin(ch, 1.0, np.pi / 4.0)
    ts = np.linspace(10.0, 100.0, 31)
    psi_l2 = np.zeros(ts.size)
    dpsi_l2 = np.zeros(ts.size)
    for i, t in enumerate(ts):
        psi = elliptic.solve_stream(op, field, float(t))
        psi_l2[i] = sp.l2_norm(psi)
        dpsi_l2[i] = sp.l2_norm(sp.shifted_derivative(psi, float(t)))
    a_psi = lyapunov.decay_fit(ts, psi_l2, window=(10.0, 100.0)).alpha
    a_dpsi = lyapunov.decay_fit(ts, dpsi_l2, window=(10.0, 100.0)).alpha
    ok = abs(a_psi + 2.0) <= 0.2 and abs(a_dpsi + 1.0) <= 0.2
    return ok, (f"alpha(psi) {a_psi:.3f} (want -2 +- 0.2), "
                f"alpha(shifted grad psi) {a_dpsi:.3f} (want -1 +- 0.2)")


@lru_cache(maxsize=None)
def _bump_run():
    ch = ChannelConfig.infinite(1024, half_width=10.0)
    profile = build_profile("couette_bump", ch, {"eps": 8e-6, "y0": 0.0, "w": 1.0})
    z = ch.z_points()
    data = np.exp(-(z**2)) * np.exp(1j * z)
    t0 = time.perf_counter()
    state = evolve.build_state(profile, ch, {1.0: data})
    state, traj = evolve.integrate(state, 50.0, dt=0.01, snapshot_every=10)
    table = build_norm_table(profile)
    mono = lyapunov.monotonicity_report(traj, table, _W, J=4, tol_mono=1e-6,
                                        channel=ch)
    dis = lyapunov.dissipation_residual(traj, _W, channel=ch)
    runtime = time.perf_counter() - t0
    return {"margin": smallness_margin(profile), "mono": mono, "dis": dis,
            "runtime": runtime}


def criterion_3():
    """Perturbed shear, whole line: ladder monotone, dissipation inequality."""
    run = _bump_run()
    mono, dis = run["mono"], run["dis"]
    max_inc = float(np.max(mono.max_increment))
    res_max = float(np.max(dis.residual))
    ok = (run["margin"] <= 0.01 and max_inc <= 1e-6 and res_max <= 0.0
          and dis.c_fit > 0.0 and run["runtime"] <= 120.0)
    return ok, (f"margin {run['margin']:.4f} (<= 0.01), max ladder increment "
                f"{max_inc:.2e} (<= 1e-6), dissipation residual max {res_max:.2e} "
                f"(<= 0) at C_fit {dis.c_fit:.3f} (> 0), runtime "
                f"{run['runtime']:.1f}s (<= 120)")


@lru_cache(maxsize=None)
def _compact_run():
    ch = ChannelConfig.finite(513, support_interval=(0.3, 0.7))
    profile = build_profile("couette_bump", ch, {"eps": 6e-8, "y0": 0.5, "w": 0.2})
    data = _bump_data(ch, 0.5, 0.12, 2.0 * np.pi)
    state = evolve.build_state(profile, ch, {1.0: data})
    state, traj = evolve.integrate(state, 50.0, dt=0.01, snapshot_every=10)
    table = build_norm_table(profile)
    mono = lyapunov.monotonicity_report(traj, table, _W, J=4, tol_mono=1e-6,
                                        channel=ch)
    z = ch.z_points()
    outside = (z < 0.3) | (z > 0.7)
    drift = max(float(np.max(np.abs(traj.snapshots[i][1.0][outside]
                                    - traj.snapshots[0][1.0][outside])))
                for i in range(len(traj.times)))
    gevrey = []
    for i, t in enumerate(traj.times):
        field = sp.ModeField(1.0, ch, traj.snapshots[i][1.0], t_stamp=t)
        norms = np.asarray([sp.hj_norm(field, j, homogeneous=False)
                            for j in range(5)])
        gevrey.append(lyapunov.gevrey_constant_fit(norms, s=1.0))
    growth = lyapunov.boundary_trace_growth(traj, profile, channel=ch,
                                            window=(10.0, 50.0))
    return {"margin": smallness_margin(profile), "mono": mono, "drift": drift,
            "gevrey_ratio": float(max(gevrey) / gevrey[0]),
            "slope_h2": growth.slope_h2}


def criterion_4():
    """Compact perturbation in a finite channel: monotone, Gevrey-stable, localized."""
    run = _compact_run()
    ok = (run["margin"] <= 0.01 and not run["mono"].violations
          and run["gevrey_ratio"] <= 2.0 and run["drift"] <= 1e-8)
    return ok, (f"margin {run['margin']:.4f} (<= 0.01), ladder violations "
                f"{run['mono'].violations} (want none), Gevrey C(t)/C(0) max "
                f"{run['gevrey_ratio']:.4f} (<= 2), support drift {run['drift']:.2e} "
                f"(<= 1e-8)")


def criterion_5():
    """Quartic wall-degenerate profile: uniform Sobolev growth constant."""
    ch = ChannelConfig.finite(513)
    profile = build_profile("couette_quartic", ch, {"eps": 0.005})
    z = ch.z_points()
    data = (z**2 * (1.0 - z) ** 2).astype(complex) * np.exp(2j * np.pi * z)
    state = evolve.build_state(profile, ch, {1.0: data})
    state, traj = evolve.integrate(state, 50.0, dt=0.01, snapshot_every=25)
    vanish = bool(np.all(vanishing_order(profile.f_samples, 1)))
    growth = 0.0
    base = None
    for i, t in enumerate(traj.times):
        field = sp.ModeField(1.0, ch, traj.snapshots[i][1.0], t_stamp=t)
        norms = np.asarray([sp.hj_norm(field, j, homogeneous=False)
                            for j in range(2)])
        if base is None:
            base = norms
        powers = 1.0 / (1.0 + np.arange(2))
        growth = max(growth, float(np.max((norms / base) ** powers)))
    ok = vanish and growth <= 10.0
    return ok, (f"f vanishes to order 1 at the walls: {vanish}, fitted "
                f"growth constant {growth:.3f} (<= 10) for H^0, H^1 over [0, 50]")


@lru_cache(maxsize=None)
def _trace_route_gaps():
    gaps = {}
    for n in (128, 256, 512):
        ch = ChannelConfig.finite(n)
        profile = build_profile("couette", ch)
        op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
        z = ch.z_points()
        omega = sp.ModeField(1.0, ch, z**2 * (1 - z) ** 2 * np.exp(2j * np.pi * z))
        psi = elliptic.solve_stream(op, omega, 3.0)
        fd = elliptic.neumann_data_fd(psi)
        u0, u1 = elliptic.homogeneous_solutions(profile, ch, 1.0, 3.0)
        integral = elliptic.neumann_data_integral(omega, u0, u1, profile)
        gaps[n] = max(abs(fd.neumann_0 - integral.neumann_0),
                      abs(fd.neumann_1 - integral.neumann_1))
    return gaps


def criterion_6():
    """Wall trace routes agree, converge at h^2, and decay in time."""
    gaps = _trace_route_gaps()
    orders = [math.log2(gaps[128] / gaps[256]), math.log2(gaps[256] / gaps[512])]
    ch = ChannelConfig.finite(512)
    profile = build_profile("couette", ch)
    op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
    field = _single_bin(ch, 1.0, 2.0 * np.pi)
    ts = np.linspace(10.0, 100.0, 31)
    traces = np.zeros(ts.size)
    for i, t in enumerate(ts):
        psi = elliptic.solve_stream(op, field, float(t))
        fd = elliptic.neumann_data_fd(psi)
        traces[i] = abs(fd.neumann_0) + abs(fd.neumann_1)
    slope = lyapunov.decay_fit(ts, traces, window=(10.0, 100.0)).alpha
    ok = (gaps[512] <= 1e-4 and all(o >= 1.7 for o in orders) and slope <= -0.8)
    return ok, (f"route gap at n=512: {gaps[512]:.2e} (<= 1e-4), refinement "
                f"orders {orders[0]:.2f}, {orders[1]:.2f} (>= 1.7), trace decay "
                f"exponent {slope:.2f} (<= -0.8)")


@lru_cache(maxsize=None)
def _norm_constants(n_grid):
    ch = ChannelConfig.finite(n_grid)
    k = 1.0
    times = [float(t) for t in range(10)]
    fields = _canonical_fields(ch, k, seeds=range(300, 400))
    fw = 0.0
    for u in fields:
        for t in times:
            dual = elliptic.hm1t_dual_norm(u, t, _W)[0]
            fourier = sp.hm1t_weight_norm(u, t, _W)
            fw = max(fw, (dual / fourier) ** 2)
    duality = 0.0
    for i in range(50):
        u, v = fields[i], fields[50 + i]
        for t in times:
            pairing = abs(sp.inner_product(u, v))
            bound = (elliptic.h1t_staggered_norm(u, t, _W)
                     * elliptic.hm1t_dual_norm(v, t, _W)[0])
            duality = max(duality, pairing / bound)
    return {"fw": fw, "duality": duality}


def criterion_7():
    """Dual-norm constants are stable under grid doubling (100 seeded fields)."""
    c256 = _norm_constants(257)
    c512 = _norm_constants(513)
    fw_rel = abs(c256["fw"] - c512["fw"]) / c512["fw"]
    du_rel = abs(c256["duality"] - c512["duality"]) / c512["duality"]
    ok = (fw_rel <= 0.10 and du_rel <= 0.10 and c512["duality"] <= 1.0 + 1e-9
          and 0.1 <= c512["fw"] <= 1.2)
    return ok, (f"Fourier-weight constant {c256['fw']:.4f} -> {c512['fw']:.4f} "
                f"(rel gap {fw_rel:.3f}, <= 0.1), duality constant "
                f"{c256['duality']:.6f} -> {c512['duality']:.6f} "
                f"(rel gap {du_rel:.3f}, <= 0.1)")


def criterion_8():
    """Discretization orders: h^2 solver, 4th-order RK4, 4th-order traces."""
    solve_errs = []
    for n in (129, 257):
        ch_c = ChannelConfig.finite(n)
        ch_f = ChannelConfig.finite(2 * n - 1)
        params = {"eps": 0.05, "y0": 0.5, "w": 0.2}
        prof_c = build_profile("couette_bump", ch_c, params)
        prof_f = build_profile("couette_bump", ch_f, params)
        op_c = elliptic.assemble_conjugated_operator(prof_c, ch_c, 1.0)
        op_f = elliptic.assemble_conjugated_operator(prof_f, ch_f, 1.0)
        psi_c = elliptic.solve_stream(
            op_c, sp.ModeField(1.0, ch_c, np.sin(np.pi * ch_c.z_points()) + 0j), 1.0)
        psi_f = elliptic.solve_stream(
            op_f, sp.ModeField(1.0, ch_f, np.sin(np.pi * ch_f.z_points()) + 0j), 1.0)
        solve_errs.append(float(np.max(np.abs(psi_c.grid_values
                                              - psi_f.grid_values[::2]))))
    solve_order = math.log2(solve_errs[0] / solve_errs[1])

    ch = ChannelConfig.infinite(256, half_width=8.0)
    profile = build_profile("couette_bump", ch, {"eps": 0.2, "y0": 0.0, "w": 1.0})
    z = ch.z_points()
    data = np.exp(-(z**2)) * np.exp(1j * z)
    finals = []
    for dt in (0.2, 0.1, 0.05):
        state = evolve.build_state(profile, ch, {1.0: data})
        state, _ = evolve.integrate(state, 1.0, dt=dt, snapshot_every=10**9)
        finals.append(state.modes[1.0].grid_values)
    e1 = float(np.max(np.abs(finals[0] - finals[1])))
    e2 = float(np.max(np.abs(finals[1] - finals[2])))
    rk4_order = math.log2(e1 / e2)

    trace_errs = []
    for n in (64, 128, 256):
        chn = ChannelConfig.finite(n)
        zz = chn.z_points()
        psi = sp.ModeField(1.0, chn, np.sin(np.pi * zz) * np.exp(0.3 * zz) + 0j)
        fd = elliptic.neumann_data_fd(psi)
        exact0 = np.pi
        exact1 = -np.pi * math.exp(0.3)
        trace_errs.append(max(abs(fd.neumann_0 - exact0), abs(fd.neumann_1 - exact1)))
    t_orders = [math.log2(trace_errs[0] / trace_errs[1]),
                math.log2(trace_errs[1] / trace_errs[2])]
    trace_order = float(np.mean(t_orders))

    ok = (abs(solve_order - 2.0) <= 0.2 and abs(rk4_order - 4.0) <= 0.3
          and abs(trace_order - 4.0) <= 0.5)
    return ok, (f"solver order {solve_order:.2f} (2 +- 0.2), RK4 order "
                f"{rk4_order:.2f} (4 +- 0.3), trace stencil order "
                f"{trace_order:.2f} (4 +- 0.5)")


@lru_cache(maxsize=None)
def _sin_run():
    ch = ChannelConfig.finite(513)
    profile = build_profile("couette_sin", ch, {"eps": 0.05})
    z = ch.z_points()
    data = np.cos(2.0 * np.pi * z).astype(complex)
    state = evolve.build_state(profile, ch, {1.0: data})
    state, traj = evolve.integrate(state, 50.0, dt=0.01, snapshot_every=10)
    growth = lyapunov.boundary_trace_growth(traj, profile, channel=ch,
                                            window=(10.0, 50.0))
    return {"slope_h2": growth.slope_h2}


def criterion_9():
    """Boundary effects: H^2 grows for the sine profile, stays flat for compact."""
    slope_sin = _sin_run()["slope_h2"]
    slope_compact = _compact_run()["slope_h2"]
    ok = slope_sin >= 0.05 and abs(slope_compact) <= 0.05
    return ok, (f"sine profile H^2 slope {slope_sin:.3f} (>= 0.05), compact "
                f"profile slope {slope_compact:.2e} (|.| <= 0.05) over [10, 50]")


_CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
             criterion_6, criterion_7, criterion_8, criterion_9]


def run_all():
    """Evaluate all nine criteria; a crash counts as a failure."""
    rows = []
    for i, fn in enumerate(_CRITERIA, start=1):
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        rows.append((f"criterion_{i}", ok, detail))
    return rows
