"""Tests for the RK4 mode integrator."""

import numpy as np
import pytest

from orrlab.errors import NumericsError
from orrlab.evolve import build_state, default_dt, integrate, rhs, step_rk4
from orrlab.profiles import ChannelConfig, build_profile, vanishing_order
from orrlab.spectral import ModeField, l2_norm
from orrlab.elliptic import solve_stream


def gaussian_packet(channel):
    z = channel.z_points()
    return np.exp(-(z**2)) * np.exp(1j * z)


def interior_bump(channel, center=0.5, width=0.12):
    z = channel.z_points()
    r = (z - center) / width
    core = np.where(np.abs(r) < 1.0, np.exp(-1.0 / np.maximum(1.0 - r**2, 1e-300)), 0.0)
    return core * np.exp(2j * np.pi * z)


def test_couette_freeze_is_exact():
    # f == 0 short-circuits the rhs, so omega never changes a single bit.
    ch = ChannelConfig.finite(129)
    pr = build_profile("couette", ch)
    z = ch.z_points()
    data = np.sin(np.pi * z) * np.exp(2j * z)
    data[0] = data[-1] = 0.0
    state = build_state(pr, ch, {1.0: data, 2.0: 0.5 * data})
    final, traj = integrate(state, 5.0, dt=0.05, snapshot_every=20)
    for k in (1.0, 2.0):
        assert np.array_equal(final.modes[k].grid_values, state.modes[k].grid_values)
    assert final.t == pytest.approx(5.0, abs=1e-12)
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(5.0, abs=1e-12)


def test_rhs_zero_and_magnitude_bound():
    ch = ChannelConfig.infinite(128, half_width=6.0)
    pr0 = build_profile("couette", ch)
    w = gaussian_packet(ch)
    state0 = build_state(pr0, ch, {1.0: w})
    out = rhs(state0)
    assert np.all(out[1.0] == 0.0)
    # ||rhs||_L2 <= |k| d_0(f) ||psi||_L2 pointwise in the product.
    pr = build_profile("couette_bump", ch, {"eps": 0.3, "y0": 0.0, "w": 1.0})
    k = 2.0
    state = build_state(pr, ch, {k: w}, t0=1.3)
    out = rhs(state)
    psi = solve_stream(state.operators[k], state.modes[k], 1.3)
    lhs = l2_norm(ModeField(k=k, channel=ch, grid_values=out[k]))
    assert lhs <= abs(k) * pr.f_deriv_sup[0] * l2_norm(psi) * (1.0 + 1e-12)
    # and the rhs is literally the composition -i k f psi on the grid
    assert np.max(np.abs(out[k] - (-1j * k) * pr.f_samples * psi.grid_values)) == 0.0


def test_rk4_self_convergence_order():
    ch = ChannelConfig.infinite(256, half_width=8.0)
    pr = build_profile("couette_bump", ch, {"eps": 0.2, "y0": 0.0, "w": 1.0})
    w0 = gaussian_packet(ch)
    finals = {}
    for dt in (0.2, 0.1, 0.05):
        state = build_state(pr, ch, {1.0: w0})
        final, _ = integrate(state, 1.0, dt=dt, snapshot_every=10**9)
        finals[dt] = final.modes[1.0].grid_values
    e_coarse = np.max(np.abs(finals[0.2] - finals[0.1]))
    e_fine = np.max(np.abs(finals[0.1] - finals[0.05]))
    order = np.log2(e_coarse / e_fine)
    assert 3.5 < order < 4.5


def test_l2_drift_small_perturbation():
    # The norm change of the true flow is O(eps^2); at eps = 1e-4 everything
    # visible is far below the 1e-6 gate.
    ch = ChannelConfig.infinite(256, half_width=8.0)
    pr = build_profile("couette_bump", ch, {"eps": 1e-4, "y0": 0.0, "w": 1.0})
    w0 = gaussian_packet(ch)
    state = build_state(pr, ch, {1.0: w0})
    base = l2_norm(state.modes[1.0])
    final, _ = integrate(state, 50.0, dt=0.05, snapshot_every=10**9)
    assert abs(l2_norm(final.modes[1.0]) - base) / base < 1e-6


def test_conjugate_mode_mirror():
    ch = ChannelConfig.infinite(128, half_width=6.0)
    pr = build_profile("couette_bump", ch, {"eps": 0.1, "y0": 0.0, "w": 1.0})
    w0 = gaussian_packet(ch)
    state = build_state(pr, ch, {1.0: w0, -1.0: np.conj(w0)})
    final, _ = integrate(state, 2.0, dt=0.05, snapshot_every=10**9)
    mirror = np.conj(final.modes[1.0].grid_values)
    assert np.max(np.abs(final.modes[-1.0].grid_values - mirror)) < 1e-12


def test_mode_decoupling():
    ch = ChannelConfig.finite(129)
    pr = build_profile("couette_quartic", ch, {"eps": 0.1})
    w1 = interior_bump(ch)
    w2 = 0.3 * interior_bump(ch, center=0.45)
    joint, _ = integrate(build_state(pr, ch, {1.0: w1, 2.0: w2}), 2.0, dt=0.05,
                         snapshot_every=10**9)
    solo, _ = integrate(build_state(pr, ch, {1.0: w1}), 2.0, dt=0.05, snapshot_every=10**9)
    assert np.array_equal(joint.modes[1.0].grid_values, solo.modes[1.0].grid_values)


def test_support_and_vanishing_preservation():
    ch = ChannelConfig.finite(257, support_interval=(0.3, 0.7))
    pr = build_profile("couette_bump", ch, {"eps": 0.05, "y0": 0.5, "w": 0.2})
    w0 = interior_bump(ch)
    state = build_state(pr, ch, {1.0: w0})
    final, _ = integrate(state, 3.0, dt=0.05, snapshot_every=10**9)
    z = ch.z_points()
    outside = (z <= 0.3) | (z >= 0.7)
    diff = final.modes[1.0].grid_values - w0
    # f vanishes identically outside its support, so the drift there is 0.0
    assert np.max(np.abs(diff[outside])) == 0.0
    assert all(vanishing_order(diff, 3))


def test_zero_data_stays_zero():
    ch = ChannelConfig.finite(65)
    pr = build_profile("couette_sin", ch, {"eps": 0.05})
    state = build_state(pr, ch, {1.0: np.zeros(65, dtype=complex)})
    final, traj = integrate(state, 1.0, dt=0.05)
    assert np.all(final.modes[1.0].grid_values == 0.0)
    assert all(np.all(s[1.0] == 0.0) for s in traj.snapshots)


def test_nan_halts_with_diagnostics():
    ch = ChannelConfig.finite(65)
    pr = build_profile("couette_sin", ch, {"eps": 0.05})
    bad = interior_bump(ch)
    bad[32] = np.nan
    state = build_state(pr, ch, {1.0: bad})
    with pytest.raises(NumericsError, match="k=1"):
        step_rk4(state, 0.05)


def test_integrate_bookkeeping():
    ch = ChannelConfig.finite(65)
    pr = build_profile("couette", ch)
    z = ch.z_points()
    data = np.sin(np.pi * z) + 0j
    state = build_state(pr, ch, {1.0: data})
    final, traj = integrate(state, 1.0, dt=0.1, snapshot_every=3,
                            diagnostic_fns={"l2": lambda s: l2_norm(s.modes[1.0])})
    # steps 0,3,6,9,10: cadence plus the forced final step
    assert traj.times.size == 5
    assert np.all(np.diff(traj.times) > 0)
    assert traj.series("l2").shape == traj.times.shape
    assert traj.mode_ks == (1.0,)
    assert traj.metadata["n_steps"] == 10
    assert traj.metadata["profile"] == "couette"
    with pytest.raises(ValueError):
        integrate(final, 0.5)
    with pytest.raises(ValueError):
        step_rk4(final, -0.1)
    assert default_dt([1.0, -3.0]) == pytest.approx(0.01 / 3.0)
