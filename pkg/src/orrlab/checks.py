"""Fast self-check battery behind `orrlab verify`.

Each check exercises one module invariant with fixed seeds and small grids,
so the whole battery stays well under a minute. Checks deliberately reach
the weight functions through the spectral module namespace: if someone
patches or breaks a multiplier there, the envelope and frozen-energy checks
fail loudly instead of silently using a stale binding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import elliptic, evolve, lyapunov
from . import spectral as sp
from .profiles import ChannelConfig, build_norm_table, build_profile, pair_norm


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name, passed, detail):
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _seeded_field(channel, k, seed, band=None):
    rng = np.random.default_rng(seed)
    eta = sp.eta_frequencies(channel)
    coeffs = rng.standard_normal(eta.size) + 1j * rng.standard_normal(eta.size)
    if band is not None:
        coeffs[np.abs(eta) > band] = 0.0
    return sp.from_spectrum(k, channel, coeffs)


def check_norm_table():
    ch = ChannelConfig.infinite(128, half_width=8.0)
    profile = build_profile("couette", ch)
    table = build_norm_table(profile)
    pairs = [pair_norm(table, j) for j in range(4)]
    ok = (np.allclose(table.f_norms, 0.0) and abs(table.g_norms[0] - 1.0) < 1e-12
          and np.allclose(table.g_norms[1:], 0.0) and pairs == [2.0, 3.0, 4.0, 5.0])
    return _result("profiles.norm_table", ok,
                   f"couette pair norms {pairs} (want [2.0, 3.0, 4.0, 5.0])")


def check_parseval():
    ch = ChannelConfig.infinite(128, half_width=6.0)
    u = _seeded_field(ch, 1.0, seed=11)
    direct = sp.l2_norm(u) ** 2
    plancherel = float(np.sum(np.abs(u.spectrum) ** 2))
    back = sp.from_spectrum(u.k, ch, u.spectrum)
    round_trip = float(np.max(np.abs(back.grid_values - u.grid_values)))
    ok = abs(direct - plancherel) <= 1e-10 * direct and round_trip <= 1e-10
    return _result("spectral.parseval", ok,
                   f"|l2^2 - sum|s|^2| = {abs(direct - plancherel):.3e}, "
                   f"round trip {round_trip:.3e}")


def check_weight_envelope():
    w = sp.WeightParams()
    eta = np.linspace(-40.0, 40.0, 401)
    lo = math.exp(-w.c_exp * math.pi / 2.0)
    hi = math.exp(w.c_exp * math.pi / 2.0)
    bounded = True
    decreasing = True
    prev = None
    for t in np.linspace(0.0, 30.0, 61):
        a = sp.a_infinite_factor(eta, 1.0, float(t), w)
        bounded &= bool(np.all(a >= lo * (1 - 1e-12)) and np.all(a <= hi * (1 + 1e-12)))
        if prev is not None:
            decreasing &= bool(np.all(a <= prev * (1 + 1e-12)))
        prev = a
    ok = bounded and decreasing
    return _result("spectral.weight_envelope", ok,
                   f"bounded in [{lo:.4f}, {hi:.4f}]: {bounded}, "
                   f"pointwise non-increasing in t: {decreasing}")


def check_dissipation_sign():
    w = sp.WeightParams()
    eta = np.linspace(-40.0, 40.0, 401)
    worst = 0.0
    for t in np.linspace(0.0, 30.0, 31):
        d = sp.a_infinite_dissipation(eta, 1.0, float(t), w)
        worst = min(worst, float(np.min(d)))
    ok = worst >= -1e-14
    return _result("spectral.dissipation_sign", ok,
                   f"min dissipation density {worst:.3e} (want >= 0)")


def check_duality():
    ch = ChannelConfig.finite(129)
    w = sp.WeightParams()
    worst = 0.0
    for seed in range(10):
        u = _seeded_field(ch, 1.0, seed=100 + seed)
        v = _seeded_field(ch, 1.0, seed=200 + seed)
        for t in (0.0, 2.5, 7.0):
            pairing = abs(sp.inner_product(u, v))
            bound = (elliptic.h1t_staggered_norm(u, t, w)
                     * elliptic.hm1t_dual_norm(v, t, w)[0])
            if bound > 0:
                worst = max(worst, pairing / bound)
    ok = worst <= 1.0 + 1e-9
    return _result("elliptic.duality_pairing", ok,
                   f"max |<u,v>| / (h1t* x hm1t) = {worst:.6f} (want <= 1)")


def check_couette_analytic():
    ch = ChannelConfig.finite(513)
    profile = build_profile("couette", ch)
    op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
    z = ch.z_points()
    omega = sp.ModeField(1.0, ch, np.sin(np.pi * z).astype(complex))
    psi = elliptic.solve_stream(op, omega, 0.0)
    exact = -np.sin(np.pi * z) / (1.0 + np.pi**2)
    err = float(np.max(np.abs(psi.grid_values - exact)))
    ok = err <= 1e-5
    return _result("elliptic.couette_analytic", ok,
                   f"max error vs -sin(pi z)/(1+pi^2): {err:.3e} (want <= 1e-5)")


def check_neumann_routes():
    ch = ChannelConfig.finite(512)
    profile = build_profile("couette", ch)
    op = elliptic.assemble_conjugated_operator(profile, ch, 1.0)
    z = ch.z_points()
    omega = sp.ModeField(1.0, ch, (z**2 * (1 - z) ** 2 * np.exp(2j * np.pi * z)))
    t = 3.0
    psi = elliptic.solve_stream(op, omega, t)
    fd = elliptic.neumann_data_fd(psi)
    u0, u1 = elliptic.homogeneous_solutions(profile, ch, 1.0, t)
    integral = elliptic.neumann_data_integral(omega, u0, u1, profile)
    diff = max(abs(fd.neumann_0 - integral.neumann_0),
               abs(fd.neumann_1 - integral.neumann_1))
    ok = diff <= 1e-4
    return _result("elliptic.neumann_routes", ok,
                   f"fd vs integral trace gap {diff:.3e} (want <= 1e-4)")


def check_frozen_energy_monotone():
    # Couette transport is a frozen spectrum, so the weighted energy
    # E_0(t) = sum A(eta, k, t) |s|^2 must be non-increasing in t exactly.
    ch = ChannelConfig.infinite(256, half_width=8.0)
    u = _seeded_field(ch, 1.0, seed=7, band=10.0)
    w = sp.WeightParams()
    s2 = np.abs(u.spectrum) ** 2
    values = []
    for t in np.linspace(0.0, 12.0, 25):
        a = sp.a_infinite_factor(u.eta, u.k, float(t), w)
        values.append(float(np.sum(a * s2)))
    values = np.asarray(values)
    worst = float(np.max(np.diff(values) / values[:-1]))
    ok = worst <= 1e-12
    return _result("lyapunov.frozen_energy_monotone", ok,
                   f"max relative increment {worst:.3e} (want <= 0)")


def check_couette_freeze():
    ch = ChannelConfig.infinite(128, half_width=6.0)
    profile = build_profile("couette", ch)
    z = ch.z_points()
    data = np.exp(-(z**2)) * np.exp(1j * z)
    state = evolve.build_state(profile, ch, {1.0: data})
    state, _ = evolve.integrate(state, 5.0, dt=0.05, snapshot_every=100)
    drift = float(np.max(np.abs(state.modes[1.0].grid_values - data)))
    ok = drift == 0.0
    return _result("evolve.couette_freeze", ok,
                   f"max |w(5) - w(0)| = {drift:.3e} (want exactly 0)")


def check_support_preservation():
    ch = ChannelConfig.finite(257, support_interval=(0.3, 0.7))
    profile = build_profile("couette_bump", ch, {"eps": 1e-6, "y0": 0.5, "w": 0.2})
    z = ch.z_points()
    u = (z - 0.5) / 0.12
    data = np.zeros(ch.n_grid, dtype=complex)
    inside = np.abs(u) < 1.0
    data[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    data *= np.exp(2j * np.pi * z)
    state = evolve.build_state(profile, ch, {1.0: data})
    state, _ = evolve.integrate(state, 2.0, dt=0.02, snapshot_every=100)
    outside = (z < 0.3) | (z > 0.7)
    drift = float(np.max(np.abs(state.modes[1.0].grid_values[outside] - data[outside])))
    ok = drift == 0.0
    return _result("evolve.support_preservation", ok,
                   f"drift outside the carrier {drift:.3e} (want exactly 0)")


def check_ladder_sandwich():
    ch = ChannelConfig.infinite(256, half_width=8.0)
    profile = build_profile("couette", ch)
    table = build_norm_table(profile)
    w = sp.WeightParams()
    u = _seeded_field(ch, 1.0, seed=21, band=12.0)
    ok = True
    for t in (0.0, 4.0):
        ladder = lyapunov.energy_ladder(u, table, w, J=3, t=t)
        ok &= bool(np.all(ladder.lower <= ladder.values * (1 + 1e-12)))
        ok &= bool(np.all(ladder.values <= ladder.upper * (1 + 1e-12)))
    return _result("lyapunov.ladder_sandwich", ok,
                   "lower <= E_j <= upper at t in {0, 4}: " + str(ok))


def check_decay_fit():
    ts = np.linspace(5.0, 60.0, 23)
    fit = lyapunov.decay_fit(ts, 3.0 * ts**-2.0)
    ok = abs(fit.alpha + 2.0) <= 1e-9
    return _result("lyapunov.decay_fit", ok,
                   f"fitted alpha {fit.alpha:.6f} on exact t^-2 data (want -2)")


def check_gevrey_closed_form():
    norms = np.array([2.0 ** (1 + j) * (1 + j) ** float(j) for j in range(5)])
    fitted = lyapunov.gevrey_constant_fit(norms, s=1.0)
    ok = abs(fitted - 2.0) <= 1e-9
    return _result("lyapunov.gevrey_closed_form", ok,
                   f"fitted constant {fitted:.6f} on a synthetic s=1 family (want 2)")


def check_solve_refinement():
    errs = []
    for n in (129, 257):
        ch = ChannelConfig.finite(2 * n - 1)
        ch_c = ChannelConfig.finite(n)
        profile_f = build_profile("couette_bump", ch, {"eps": 0.05, "y0": 0.5, "w": 0.2})
        profile_c = build_profile("couette_bump", ch_c, {"eps": 0.05, "y0": 0.5, "w": 0.2})
        z_c = ch_c.z_points()
        data_c = np.sin(np.pi * z_c).astype(complex)
        z_f = ch.z_points()
        data_f = np.sin(np.pi * z_f).astype(complex)
        op_c = elliptic.assemble_conjugated_operator(profile_c, ch_c, 1.0)
        op_f = elliptic.assemble_conjugated_operator(profile_f, ch, 1.0)
        psi_c = elliptic.solve_stream(op_c, sp.ModeField(1.0, ch_c, data_c), 1.0)
        psi_f = elliptic.solve_stream(op_f, sp.ModeField(1.0, ch, data_f), 1.0)
        errs.append(float(np.max(np.abs(psi_c.grid_values - psi_f.grid_values[::2]))))
    order = math.log2(errs[0] / errs[1])
    ok = 1.6 <= order <= 2.4
    return _result("elliptic.solve_refinement", ok,
                   f"doubling order {order:.3f} (want about 2)")


_CHECKS = [
    check_norm_table,
    check_parseval,
    check_weight_envelope,
    check_dissipation_sign,
    check_duality,
    check_couette_analytic,
    check_neumann_routes,
    check_frozen_energy_monotone,
    check_couette_freeze,
    check_support_preservation,
    check_ladder_sandwich,
    check_decay_fit,
    check_gevrey_closed_form,
    check_solve_refinement,
]


def run_quick():
    """Run the whole battery; a check that raises is reported as failed."""
    results = []
    for fn in _CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a broken invariant must not hide behind a crash
            name = fn.__name__.replace("check_", "", 1)
            results.append(_result(name, False, f"raised {type(exc).__name__}: {exc}"))
    return results
