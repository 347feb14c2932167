"""Energy ladders, dissipation checks, decay fits, and Gevrey diagnostics.

The central object is the recursive ladder

    E_0 = <omega, A omega>,
    E_{j+1} = 2 <d^{j+1} omega, A d^{j+1} omega>
              + 4 C sum_{j1+j2=j} ||(f,g)||_{j1}^2 E_{j2},

with d the spectral y-derivative and A the channel's multiplier weight.
When the shear is close enough to Couette the ladder is non-increasing in
time; everything else here measures how close "close enough" is: maximal
relative increments, the largest dissipation constant the data supports,
algebraic decay exponents, and Gevrey-constant fits.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from ._stencils import edge_derivative
from .elliptic import assemble_conjugated_operator, solve_stream
from .errors import NumericsError, ProfileError
from .profiles import ChannelConfig, pair_norm
from .spectral import (
    ModeField,
    TimeWeightTable,
    a_finite_factor,
    a_infinite_factor,
    eta_frequencies,
    hj_norm,
    hm1t_weight_norm,
    tail_fraction,
    weight_integral,
)

_TOL_MONO = 1e-8
_TAIL_LIMIT = 0.01


@dataclass(frozen=True)
class EnergyLadder:
    """Ladder values of one mode at one time, with sandwich bounds.

    values[j] is E_j; lower and upper are the channel-constant sandwich
    c_j ||omega||_{Hdot^j}^2 <= E_j <= (recursion with the max weight).
    trustworthy[j] is False when the spectral tail at order j carries more
    than one percent of the energy, meaning E_j is under-resolved.
    """

    J: int
    ladder_constant: float
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    trustworthy: np.ndarray
    pair_sq: np.ndarray


@dataclass(frozen=True)
class LadderSeries:
    times: np.ndarray
    energies: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    trustworthy: np.ndarray


@dataclass(frozen=True)
class MonotonicityReport:
    """Per-order maximal relative increments of the ladder along a run."""

    times: np.ndarray
    energies: np.ndarray
    max_increment: np.ndarray
    first_violation: tuple
    violations: bool
    tol_mono: float
    ladder_constant: float


@dataclass(frozen=True)
class DissipationReport:
    """Centered-difference check of d/dt E_0 + C ||omega||_{H^-1_t}^2 <= 0.

    c_fit is the largest nonnegative constant keeping the residual
    nonpositive at every interior snapshot; +inf when the norm term
    vanishes identically (nothing constrains C), 0.0 when E_0 grows
    somewhere so no constant works.
    """

    times: np.ndarray
    derivative: np.ndarray
    norm_sq: np.ndarray
    c_fit: float
    residual: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    residual: float
    window: tuple
    n_points: int


@dataclass(frozen=True)
class GevreyScan:
    lambdas: np.ndarray
    log_sums: np.ndarray
    sums: np.ndarray


@dataclass(frozen=True)
class BoundaryGrowth:
    times: np.ndarray
    h2_series: np.ndarray
    trace_lower: np.ndarray
    trace_upper: np.ndarray
    slope_h2: float
    window: tuple


@lru_cache(maxsize=64)
def _finite_weight_sup(channel, k, w):
    eta = eta_frequencies(channel)
    return max(weight_integral(float(r), math.inf, w) for r in eta / k)


def _weight_bounds(channel, k, w):
    """Uniform-in-(t, eta) bounds of the multiplier weight A."""
    if channel.kind == "infinite":
        half = w.c_exp * math.pi / 2.0
        return math.exp(-half), math.exp(half)
    sup_w = _finite_weight_sup(channel, k, w)
    return math.exp(-math.pi / 2.0 - sup_w), math.exp(math.pi / 2.0)


def _a_values(field, t, w, time_table=None):
    eta = eta_frequencies(field.channel)
    if field.channel.kind == "infinite":
        return a_infinite_factor(eta, field.k, t, w)
    return a_finite_factor(eta, field.k, t, w, table=time_table)


def energy_ladder(field, table, w, J, t=None, ladder_constant=1.0, time_table=None):
    """Evaluate E_0..E_J of one mode, with sandwich bounds and tail flags."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    if t is None:
        t = field.t_stamp
    eta = eta_frequencies(field.channel)
    a = _a_values(field, t, w, time_table=time_table)
    power = np.abs(field.spectrum) ** 2
    heads = np.array([np.sum(a * eta ** (2 * j) * power) for j in range(J + 1)])
    hdots = np.array([np.sum(eta ** (2 * j) * power) for j in range(J + 1)])
    pair_sq = np.array([pair_norm(table, j) ** 2 for j in range(J + 1)])

    a_lo, a_hi = _weight_bounds(field.channel, field.k, w)
    values = np.empty(J + 1)
    upper = np.empty(J + 1)
    values[0] = heads[0]
    upper[0] = a_hi * hdots[0]
    for j in range(J):
        ladder = 4.0 * ladder_constant * sum(
            pair_sq[j1] * values[j - j1] for j1 in range(j + 1)
        )
        values[j + 1] = 2.0 * heads[j + 1] + ladder
        upper[j + 1] = 2.0 * a_hi * hdots[j + 1] + 4.0 * ladder_constant * sum(
            pair_sq[j1] * upper[j - j1] for j1 in range(j + 1)
        )
    lower = a_lo * hdots * np.where(np.arange(J + 1) == 0, 1.0, 2.0)
    trustworthy = np.array([tail_fraction(field, j) < _TAIL_LIMIT for j in range(J + 1)])
    return EnergyLadder(
        J=J,
        ladder_constant=ladder_constant,
        values=values,
        lower=lower,
        upper=upper,
        trustworthy=trustworthy,
        pair_sq=pair_sq,
    )


def channel_of(trajectory):
    """Rebuild the ChannelConfig a trajectory was produced on."""
    m = trajectory.metadata
    return ChannelConfig(
        kind=m["channel_kind"],
        n_grid=m["n_grid"],
        z_min=m["z_min"],
        z_max=m["z_max"],
        x_period=m["x_period"],
        support_interval=m.get("support_interval"),
        vanish_order=m.get("vanish_order"),
    )


def _time_tables(trajectory, channel, w):
    if channel.kind == "infinite":
        return {k: None for k in trajectory.mode_ks}
    stations = np.asarray(trajectory.times, dtype=float)
    if stations[0] != 0.0:
        stations = np.concatenate([[0.0], stations])
    tables = {}
    for k in trajectory.mode_ks:
        rays = eta_frequencies(channel) / k
        tables[k] = TimeWeightTable.build(rays, stations, w)
    return tables


def ladder_series(trajectory, table, w, J=4, ladder_constant=1.0, channel=None):
    """Ladder values summed over modes at every snapshot of a trajectory."""
    if channel is None:
        channel = channel_of(trajectory)
    tables = _time_tables(trajectory, channel, w)
    n_t = len(trajectory.times)
    energies = np.zeros((n_t, J + 1))
    lower = np.zeros((n_t, J + 1))
    upper = np.zeros((n_t, J + 1))
    trustworthy = np.ones((n_t, J + 1), dtype=bool)
    for i, (t, snap) in enumerate(zip(trajectory.times, trajectory.snapshots)):
        for k, values in snap.items():
            field = ModeField(k=k, channel=channel, grid_values=values, t_stamp=t)
            lad = energy_ladder(field, table, w, J, t=t,
                                ladder_constant=ladder_constant, time_table=tables[k])
            energies[i] += lad.values
            lower[i] += lad.lower
            upper[i] += lad.upper
            trustworthy[i] &= lad.trustworthy
    return LadderSeries(times=np.asarray(trajectory.times), energies=energies,
                        lower=lower, upper=upper, trustworthy=trustworthy)


def monotonicity_report(trajectory, table, w, J=4, ladder_constant=1.0,
                        tol_mono=_TOL_MONO, channel=None):
    """Largest relative ladder increments and the first violation times."""
    series = ladder_series(trajectory, table, w, J=J,
                           ladder_constant=ladder_constant, channel=channel)
    energies = series.energies
    times = series.times
    max_inc = np.zeros(J + 1)
    first = [None] * (J + 1)
    for j in range(J + 1):
        e = energies[:, j]
        prev = e[:-1]
        ok = prev > 0.0
        rel = np.zeros(prev.size)
        rel[ok] = (e[1:][ok] - prev[ok]) / prev[ok]
        if rel.size:
            max_inc[j] = float(np.max(rel))
            bad = np.nonzero(rel > tol_mono)[0]
            if bad.size:
                first[j] = float(times[1:][bad[0]])
    return MonotonicityReport(
        times=times,
        energies=energies,
        max_increment=max_inc,
        first_violation=tuple(first),
        violations=any(v is not None for v in first),
        tol_mono=tol_mono,
        ladder_constant=ladder_constant,
    )


def dissipation_residual(trajectory, w, channel=None):
    """Centered-difference residual of the j=0 dissipation inequality."""
    if channel is None:
        channel = channel_of(trajectory)
    times = np.asarray(trajectory.times, dtype=float)
    if times.size < 3:
        raise NumericsError("need at least 3 snapshots for centered differences")
    tables = _time_tables(trajectory, channel, w)
    e0 = np.zeros(times.size)
    n2 = np.zeros(times.size)
    for i, (t, snap) in enumerate(zip(times, trajectory.snapshots)):
        for k, values in snap.items():
            field = ModeField(k=k, channel=channel, grid_values=values, t_stamp=t)
            a = _a_values(field, t, w, time_table=tables[k])
            e0[i] += float(np.sum(a * np.abs(field.spectrum) ** 2))
            n2[i] += hm1t_weight_norm(field, t, w) ** 2

    de = (e0[2:] - e0[:-2]) / (times[2:] - times[:-2])
    # Richardson estimate of the FD error: the doubled-stencil derivative
    # differs from de by ~3x the centered-difference error.
    if times.size >= 5:
        de2 = (e0[4:] - e0[:-4]) / (times[4:] - times[:-4])
        inner = de[1:-1]
        scale = np.max(np.abs(de)) if np.max(np.abs(de)) > 0 else 0.0
        if scale > 0.0:
            sig = np.abs(inner) > 1e-6 * scale
            if np.any(sig):
                rel = np.abs(de2[sig] - inner[sig]) / (3.0 * np.abs(inner[sig]))
                if float(np.max(rel)) > 0.10:
                    raise NumericsError(
                        f"snapshot cadence too coarse for the dissipation derivative: "
                        f"relative FD error estimate {float(np.max(rel)):.2e} > 0.1"
                    )
    norm_sq = n2[1:-1]
    if np.all(norm_sq == 0.0):
        c_fit = math.inf
        residual = de.copy()
    else:
        pos = norm_sq > 0.0
        ratios = -de[pos] / norm_sq[pos]
        c_fit = max(0.0, float(np.min(ratios)))
        residual = de + c_fit * norm_sq
    return DissipationReport(
        times=times[1:-1],
        derivative=de,
        norm_sq=norm_sq,
        c_fit=c_fit,
        residual=residual,
    )


def decay_fit(times, values, window=None):
    """Least-squares exponent alpha of value ~ t^alpha on a time window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    t_a, t_b = window
    mask = (times >= t_a) & (times <= t_b)
    t_sel = times[mask]
    v_sel = values[mask]
    if t_sel.size < 3:
        raise ValueError(f"window {window} selects {t_sel.size} points; need at least 3")
    if np.any(t_sel <= 0.0) or np.any(v_sel <= 0.0):
        raise ValueError("decay fits need strictly positive times and values")
    log_t = np.log(t_sel)
    log_v = np.log(v_sel)
    alpha, intercept = np.polyfit(log_t, log_v, 1)
    resid = log_v - (alpha * log_t + intercept)
    return DecayFit(
        alpha=float(alpha),
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t_a), float(t_b)),
        n_points=int(t_sel.size),
    )


def gevrey_constant_fit(norms, s):
    """Smallest C with ||omega||_{H^j} <= C^{1+j} (1+j)^{j s} for all j."""
    if s <= 0.0:
        raise ValueError("the Gevrey index s must be positive")
    norms = np.asarray(norms, dtype=float)
    if np.any(norms < 0.0):
        raise ValueError("norms must be nonnegative")
    best = 0.0
    for j, value in enumerate(norms):
        best = max(best, (value / (1.0 + j) ** (j * s)) ** (1.0 / (1.0 + j)))
    return float(best)


def gevrey_radius_scan(field, s, lambdas):
    """Truncated sums of exp(lambda <eta>^{1/s}) |spectrum|^2 per lambda."""
    if s <= 0.0:
        raise ValueError("the Gevrey index s must be positive")
    lambdas = np.asarray(lambdas, dtype=float)
    eta = eta_frequencies(field.channel)
    power = np.abs(field.spectrum) ** 2
    active = power > 0.0
    if not np.any(active):
        log_sums = np.full(lambdas.shape, -math.inf)
        return GevreyScan(lambdas=lambdas, log_sums=log_sums, sums=np.zeros(lambdas.shape))
    bracket = np.sqrt(1.0 + eta[active] ** 2) ** (1.0 / s)
    log_power = np.log(power[active])
    log_sums = np.array([logsumexp(lam * bracket + log_power) for lam in lambdas])
    with np.errstate(over="ignore"):
        sums = np.exp(log_sums)
    return GevreyScan(lambdas=lambdas, log_sums=log_sums, sums=sums)


def boundary_trace_growth(trajectory, profile, channel=None, window=None):
    """H^2 growth fit plus wall traces of d/dy (f psi) along a run.

    The H^2 norm of a wall-bounded run only grows when f psi feeds the
    boundary; compactly supported forcing keeps the fitted slope at zero.
    """

    if channel is None:
        channel = channel_of(trajectory)
    if channel.kind != "finite":
        raise ProfileError("boundary traces are defined on the finite channel")
    times = np.asarray(trajectory.times, dtype=float)
    ops = {k: assemble_conjugated_operator(profile, channel, k) for k in trajectory.mode_ks}
    f = np.asarray(profile.f_samples, dtype=float)
    h = channel.spacing
    h2 = np.zeros(times.size)
    tr0 = np.zeros(times.size)
    tr1 = np.zeros(times.size)
    for i, (t, snap) in enumerate(zip(times, trajectory.snapshots)):
        sq = 0.0
        for k, values in snap.items():
            field = ModeField(k=k, channel=channel, grid_values=values, t_stamp=t)
            sq += hj_norm(field, 2, homogeneous=False) ** 2
            psi = solve_stream(ops[k], field, t)
            forced = f * psi.grid_values
            tr0[i] += abs(edge_derivative(forced, h, 1, 6, "left"))
            tr1[i] += abs(edge_derivative(forced, h, 1, 6, "right"))
        h2[i] = math.sqrt(sq)
    if window is None:
        start = times[1] if times[0] <= 0.0 else times[0]
        window = (float(start), float(times[-1]))
    if np.max(h2) == 0.0:
        slope = 0.0
    else:
        slope = decay_fit(times, h2, window=window).alpha
    return BoundaryGrowth(
        times=times,
        h2_series=h2,
        trace_lower=tr0,
        trace_upper=tr1,
        slope_h2=slope,
        window=window,
    )
