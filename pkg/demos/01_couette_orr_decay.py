"""Couette transport in sheared coordinates: frozen vorticity, decaying stream.

In the sheared frame the plain Couette flow moves nothing: the vorticity
modes are constants of motion, and the whole evolution lives in the stream
function solve, whose spectrum is the explicit rational multiplier
-s0 / (k^2 + (eta - k t)^2). This script checks the freeze bit for bit and
then measures the two classic Orr rates on a single frequency: the stream
function decays like t^-2, and its time-shifted gradient like t^-1.
"""

import numpy as np

from orrlab import elliptic, evolve, lyapunov, spectral
from orrlab.profiles import ChannelConfig, build_profile

channel = ChannelConfig.infinite(256, half_width=8.0)
profile = build_profile("couette", channel)

z = channel.z_points()
packet = np.exp(-(z**2)) * np.exp(1j * z)
state = evolve.build_state(profile, channel, {1.0: packet})
state, traj = evolve.integrate(state, 40.0, dt=0.05, snapshot_every=100)

drift = max(float(np.max(np.abs(traj.snapshots[i][1.0] - packet)))
            for i in range(len(traj.times)))
print(f"vorticity drift over t in [0, 40]: {drift:.1e} (exactly zero)")

op = elliptic.assemble_conjugated_operator(profile, channel, 1.0)
print(f"solver took the diagonal Fourier route: {op.diagonal}")

field = spectral.ModeField(1.0, channel, packet, t_stamp=20.0)
psi = elliptic.solve_stream(op, field, 20.0)
expected = -field.spectrum / (1.0 + (field.eta - 20.0) ** 2)
gap = np.max(np.abs(psi.spectrum - expected)) / np.max(np.abs(expected))
print(f"stream spectrum vs the rational multiplier at t=20: rel err {gap:.1e}")

# one frequency, so the asymptotic rates are clean over a decade of time
single = np.zeros(spectral.spectrum_size(channel), dtype=complex)
eta = spectral.eta_frequencies(channel)
single[int(np.argmin(np.abs(eta - np.pi / 4)))] = 1.0
bin_field = spectral.from_spectrum(1.0, channel, single)

ts = np.linspace(10.0, 100.0, 31)
psi_l2 = np.zeros(ts.size)
dpsi_l2 = np.zeros(ts.size)
for i, t in enumerate(ts):
    psi = elliptic.solve_stream(op, bin_field, float(t))
    psi_l2[i] = spectral.l2_norm(psi)
    dpsi_l2[i] = spectral.l2_norm(spectral.shifted_derivative(psi, float(t)))

alpha_psi = lyapunov.decay_fit(ts, psi_l2).alpha
alpha_dpsi = lyapunov.decay_fit(ts, dpsi_l2).alpha
print(f"stream decay exponent:          {alpha_psi:+.3f}  (Orr rate -2)")
print(f"shifted gradient decay exponent: {alpha_dpsi:+.3f}  (Orr rate -1)")
