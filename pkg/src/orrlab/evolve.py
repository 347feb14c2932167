"""Time integration of the mode-decoupled vorticity equation.

In the sheared frame each x-mode obeys d/dt omega_k = -i k f(z) psi_k with
psi_k the stream solve of omega_k at the current time. The modes never
couple, so a state is a map k -> ModeField advanced independently by a
classical explicit RK4 step that re-solves psi at every stage time.

For an unperturbed shear (f identically zero) the right-hand side is exact
zero and the vorticity samples are carried through each step bitwise
unchanged; the Couette freeze is not an approximation here.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import assemble_conjugated_operator, solve_stream
from .errors import NumericsError
from .spectral import ModeField


@dataclass(frozen=True, eq=False)
class SimulationState:
    """One time slice of a run: vorticity modes plus the frozen solve data.

    modes and operators are keyed by the wavenumber k. The mode set is
    fixed for the lifetime of a run; operators are assembled once since
    only the unimodular conjugation inside solve_stream depends on t.
    """

    t: float
    modes: dict
    profile: object
    channel: object
    operators: dict
    f_samples: np.ndarray
    f_is_zero: bool


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots and diagnostic series of one integration.

    times holds the snapshot stamps (strictly increasing), snapshots one
    dict k -> complex samples per stamp, diagnostics one scalar series per
    registered name. metadata records everything needed to replay the run.
    """

    times: np.ndarray
    mode_ks: tuple
    snapshots: list
    diagnostics: dict
    metadata: dict = field(default_factory=dict)

    def series(self, name):
        return np.asarray(self.diagnostics[name])


def build_state(profile, channel, initial_modes, t0=0.0):
    """Assemble operators for every requested mode and wrap the initial data.

    initial_modes maps k to complex samples (or ModeField instances, which
    are re-stamped). Wall values are taken as given; the elliptic solve
    imposes its own Dirichlet conditions on psi, not on omega.
    """

    modes = {}
    operators = {}
    for k, data in initial_modes.items():
        values = data.grid_values if isinstance(data, ModeField) else data
        modes[k] = ModeField(k=k, channel=channel, grid_values=np.asarray(values, dtype=complex),
                             t_stamp=t0)
        operators[k] = assemble_conjugated_operator(profile, channel, k)
    f = np.asarray(profile.f_samples, dtype=float)
    return SimulationState(
        t=t0,
        modes=modes,
        profile=profile,
        channel=channel,
        operators=operators,
        f_samples=f,
        f_is_zero=bool(np.all(f == 0.0)),
    )


def default_dt(mode_ks):
    return 0.01 / max(abs(float(k)) for k in mode_ks)


def _rhs_arrays(state, arrays, t):
    out = {}
    for k, w in arrays.items():
        if state.f_is_zero:
            out[k] = np.zeros_like(w)
            continue
        # the banded solve rejects non-finite input with a bare ValueError,
        # so catch it here where k and t are known
        if not np.all(np.isfinite(w)):
            raise NumericsError(f"non-finite vorticity in mode k={k} at t={t}")
        psi = solve_stream(state.operators[k],
                           ModeField(k=k, channel=state.channel, grid_values=w, t_stamp=t), t)
        out[k] = (-1j * k) * state.f_samples * psi.grid_values
    return out


def rhs(state):
    """Map k -> -i k f psi_k evaluated at the state's own time."""
    return _rhs_arrays(state, {k: m.grid_values for k, m in state.modes.items()}, state.t)


def step_rk4(state, dt):
    """Advance every mode by one classical RK4 step of size dt.

    Each stage re-solves the stream function at the stage time; nothing is
    frozen across stages. A NaN in any advanced mode aborts the run with
    the offending k and time in the message.
    """

    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    t = state.t
    w0 = {k: m.grid_values for k, m in state.modes.items()}
    k1 = _rhs_arrays(state, w0, t)
    k2 = _rhs_arrays(state, {k: w0[k] + 0.5 * dt * k1[k] for k in w0}, t + 0.5 * dt)
    k3 = _rhs_arrays(state, {k: w0[k] + 0.5 * dt * k2[k] for k in w0}, t + 0.5 * dt)
    k4 = _rhs_arrays(state, {k: w0[k] + dt * k3[k] for k in w0}, t + dt)
    modes = {}
    for k in w0:
        advanced = w0[k] + (dt / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
        if not np.all(np.isfinite(advanced)):
            raise NumericsError(
                f"non-finite vorticity in mode k={k} stepping t={t} by dt={dt}; "
                f"max finite |omega| was {np.max(np.abs(w0[k])):.3e}"
            )
        modes[k] = ModeField(k=k, channel=state.channel, grid_values=advanced, t_stamp=t + dt)
    return replace(state, t=t + dt, modes=modes)


def integrate(state, t_end, dt=None, snapshot_every=1, diagnostic_fns=None):
    """Run fixed-step RK4 from state.t to t_end and collect snapshots.

    dt defaults to 0.01 / max|k| and is shrunk slightly so an integer
    number of steps lands exactly on t_end. Snapshots (field dumps plus the
    registered diagnostics) are taken at step 0, every snapshot_every-th
    step, and at the final step.
    """

    if t_end <= state.t:
        raise ValueError(f"t_end={t_end} must exceed the state time {state.t}")
    if dt is None:
        dt = default_dt(state.modes.keys())
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if snapshot_every < 1:
        raise ValueError(f"snapshot_every must be >= 1, got {snapshot_every}")
    span = t_end - state.t
    n_steps = max(1, int(np.ceil(span / dt - 1e-12)))
    dt = span / n_steps
    fns = diagnostic_fns or {}

    times = []
    snapshots = []
    diagnostics = {name: [] for name in fns}

    def record(s):
        times.append(s.t)
        snapshots.append({k: m.grid_values.copy() for k, m in s.modes.items()})
        for name, fn in fns.items():
            diagnostics[name].append(fn(s))

    record(state)
    for i in range(n_steps):
        state = step_rk4(state, dt)
        if (i + 1) % snapshot_every == 0 or i + 1 == n_steps:
            record(state)

    meta = {
        "profile": state.profile.name,
        "params": dict(state.profile.params),
        "channel_kind": state.channel.kind,
        "n_grid": state.channel.n_grid,
        "z_min": state.channel.z_min,
        "z_max": state.channel.z_max,
        "x_period": state.channel.x_period,
        "support_interval": state.channel.support_interval,
        "vanish_order": state.channel.vanish_order,
        "dt": dt,
        "n_steps": n_steps,
        "snapshot_every": snapshot_every,
        "t_end": t_end,
    }
    return state, Trajectory(
        times=np.asarray(times),
        mode_ks=tuple(sorted(state.modes.keys())),
        snapshots=snapshots,
        diagnostics={name: np.asarray(vals) for name, vals in diagnostics.items()},
        metadata=meta,
    )
