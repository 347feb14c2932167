"""Mode-resolved fields, their spectra, and the time-adapted norms and weights.

Everything here treats one x-wavenumber k at a time. A field lives on the
channel's z-grid; its spectrum is the DFT of the periodized samples with a
normalization chosen so the spectral l2 sum equals the grid L2 integral
(Parseval holds exactly):

    spectrum = fft(u[:m]) * sqrt(h / m),   eta = 2 pi fftfreq(m, d=h)

where m excludes the duplicate right wall on the finite channel. Finite
channel spectra are Fourier series of the 1-periodic extension; they serve
the diagnostic norms only, never the elliptic solve.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import NumericsError
from .profiles import ChannelConfig


@dataclass(frozen=True)
class WeightParams:
    """Constants of the multiplier weights and time-adapted norms.

    c_exp is the arctan exponent of the infinite-channel weight, C_low the
    constant standing in for the lower bound of g, beta and gamma the
    finite-channel weight exponents, delta the boundary-decay reserve.
    """

    c_exp: float = 0.5
    C_low: float = 1.0
    beta: float = 0.25
    gamma: float = 0.25
    delta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.c_exp < 1.0:
            raise ValueError(f"c_exp must lie in (0,1), got {self.c_exp}")
        if self.C_low <= 0.0:
            raise ValueError(f"C_low must be positive, got {self.C_low}")
        if self.beta <= 0.0 or self.gamma <= 0.0:
            raise ValueError(f"beta, gamma must be positive, got {self.beta}, {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")


def spectrum_size(channel):
    return channel.n_grid - (1 if channel.kind == "finite" else 0)


def eta_frequencies(channel):
    m = spectrum_size(channel)
    return 2.0 * np.pi * np.fft.fftfreq(m, d=channel.spacing)


@dataclass(frozen=True, eq=False)
class ModeField:
    """One x-mode of a field: complex samples on the z-grid plus a time stamp.

    The spectrum is cached on first access. k must be a nonzero point of the
    2 pi / x_period wavenumber lattice; the mean mode k = 0 plays no role in
    the mode-decoupled dynamics and is rejected.
    """

    k: float
    channel: ChannelConfig
    grid_values: np.ndarray
    t_stamp: float = 0.0

    def __post_init__(self):
        lattice = self.k * self.channel.x_period / (2.0 * np.pi)
        if self.k == 0.0 or abs(lattice - round(lattice)) > 1e-9:
            raise ValueError(
                f"k={self.k} is not a nonzero multiple of 2 pi / x_period "
                f"(x_period={self.channel.x_period})"
            )
        v = np.asarray(self.grid_values, dtype=complex)
        if v.shape != (self.channel.n_grid,):
            raise ValueError(
                f"grid_values has shape {v.shape}, channel expects ({self.channel.n_grid},)"
            )
        object.__setattr__(self, "grid_values", v)
        object.__setattr__(self, "_spec", None)

    @property
    def eta(self):
        return eta_frequencies(self.channel)

    @property
    def spectrum(self):
        s = object.__getattribute__(self, "_spec")
        if s is None:
            m = spectrum_size(self.channel)
            h = self.channel.spacing
            s = np.fft.fft(self.grid_values[:m]) * math.sqrt(h / m)
            object.__setattr__(self, "_spec", s)
        return s


def to_spectrum(field):
    return field.spectrum.copy()


def from_spectrum(k, channel, spectrum, t_stamp=0.0):
    m = spectrum_size(channel)
    s = np.asarray(spectrum, dtype=complex)
    if s.shape != (m,):
        raise ValueError(f"spectrum has shape {s.shape}, channel expects ({m},)")
    u = np.fft.ifft(s / math.sqrt(channel.spacing / m))
    if channel.kind == "finite":
        u = np.concatenate([u, u[:1]])
    return ModeField(k=k, channel=channel, grid_values=u, t_stamp=t_stamp)


def l2_norm(field):
    return float(np.linalg.norm(field.spectrum))


def inner_product(u, v):
    """L2 pairing <u, v> = sum_eta u_hat conj(v_hat) = h sum_z u conj(v)."""
    return complex(np.sum(u.spectrum * np.conj(v.spectrum)))


def hj_norm(field, j, homogeneous=True):
    if j < 0:
        raise ValueError(f"Sobolev order must be nonnegative, got {j}")
    eta = field.eta
    base = field.k ** 2 + eta ** 2
    if not homogeneous:
        base = 1.0 + base
    return float(np.sqrt(np.sum(base ** j * np.abs(field.spectrum) ** 2)))


def h1t_norm(field, t, w):
    eta = field.eta
    wgt = field.k ** 2 + w.C_low ** 2 * (eta - field.k * t) ** 2
    return float(np.sqrt(np.sum(wgt * np.abs(field.spectrum) ** 2)))


def hm1t_weight_norm(field, t, w):
    eta = field.eta
    wgt = field.k ** 2 + w.C_low ** 2 * (eta - field.k * t) ** 2
    return float(np.sqrt(np.sum(np.abs(field.spectrum) ** 2 / wgt)))


def orr_multiplier(k, eta, t):
    if k == 0:
        raise ValueError("the stream multiplier is undefined at k=0")
    return k / (k ** 2 + (np.asarray(eta, dtype=float) - k * t) ** 2)


def spectral_derivative(field, j):
    """j-th z-derivative through the spectrum: multiply by (i eta)^j."""
    s = (1j * field.eta) ** j * field.spectrum
    return from_spectrum(field.k, field.channel, s, field.t_stamp)


def shifted_derivative(field, t):
    """(d/dz - ikt) u through the spectrum."""
    s = 1j * (field.eta - field.k * t) * field.spectrum
    return from_spectrum(field.k, field.channel, s, field.t_stamp)


def tail_fraction(field, j):
    """Energy fraction of the order-j derivative above 0.8 of the Nyquist frequency."""
    eta = field.eta
    density = np.abs(eta) ** (2 * j) * np.abs(field.spectrum) ** 2
    total = density.sum()
    if total == 0.0:
        return 0.0
    cutoff = 0.8 * np.pi / field.channel.spacing
    return float(density[np.abs(eta) >= cutoff].sum() / total)


def a_infinite_factor(eta, k, t, w):
    """Infinite-channel multiplier exp(c arctan(C sgn(k)(eta - kt))).

    The sgn(k) mirror keeps the factor non-increasing in t for every k and
    makes conjugate mode pairs carry identical weights.
    """
    arg = w.C_low * np.sign(k) * (np.asarray(eta, dtype=float) - k * t)
    return np.exp(w.c_exp * np.arctan(arg))


def apply_A_infinite(field, t, w):
    s = a_infinite_factor(field.eta, field.k, t, w) * field.spectrum
    return from_spectrum(field.k, field.channel, s, field.t_stamp)


def a_infinite_dissipation(eta, k, t, w):
    """Pointwise -dA/dt of the infinite-channel weight (frozen spectrum)."""
    arg = w.C_low * np.sign(k) * (np.asarray(eta, dtype=float) - k * t)
    a = np.exp(w.c_exp * np.arctan(arg))
    return a * w.c_exp * w.C_low * abs(k) / (1.0 + arg ** 2)


def _weight_integrand(tau, r, beta, gamma):
    return (1.0 + tau ** 2) ** (-beta) * (1.0 + (r - tau) ** 2) ** (-2.0 * gamma)


@lru_cache(maxsize=200000)
def _weight_integral_cached(r, t, beta, gamma):
    if t == 0.0:
        return 0.0
    kw = dict(epsabs=1e-11, epsrel=1e-11, limit=200)
    if math.isinf(t):
        val, err = quad(_weight_integrand, 0.0, np.inf, args=(r, beta, gamma), **kw)
    else:
        pts = [r] if 0.0 < r < t else None
        val, err = quad(_weight_integrand, 0.0, t, args=(r, beta, gamma), points=pts, **kw)
    if err > max(1e-8, 1e-8 * abs(val)):
        raise NumericsError(f"weight integral did not converge at r={r}, t={t}: err={err}")
    return val


def weight_integral(eta_over_k, t, w):
    """W(t; r) = integral_0^t <tau>^(-2 beta) (1+(r-tau)^2)^(-2 gamma) d tau.

    Nondecreasing in t and finite at t = inf for 2 beta + 4 gamma > 1; adaptive
    quadrature, cached per (r, t, beta, gamma).
    """
    if t < 0:
        raise ValueError(f"weight integral needs t >= 0, got {t}")
    return _weight_integral_cached(float(eta_over_k), float(t), w.beta, w.gamma)


_G8 = np.polynomial.legendre.leggauss(8)
_G16 = np.polynomial.legendre.leggauss(16)


def _gauss_panel(a, b, r, beta, gamma, rule):
    nodes, wts = rule
    tau = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    vals = _weight_integrand(tau[:, None], r[None, :], beta, gamma)
    return 0.5 * (b - a) * (wts @ vals)


def _adaptive_panel(a, b, r, beta, gamma, tol=1e-11):
    out = np.zeros(r.shape)
    stack = [(a, b)]
    spent = 0
    while stack:
        lo, hi = stack.pop()
        spent += 1
        if spent > 20000:
            raise NumericsError(f"weight quadrature did not converge on [{a}, {b}]")
        c8 = _gauss_panel(lo, hi, r, beta, gamma, _G8)
        c16 = _gauss_panel(lo, hi, r, beta, gamma, _G16)
        if np.max(np.abs(c16 - c8)) <= tol * max(1.0, hi - lo) or (hi - lo) < 1e-12:
            out += c16
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid))
            stack.append((mid, hi))
    return out


@dataclass(frozen=True, eq=False)
class TimeWeightTable:
    """Cumulative W(t; r) on a station lattice, shared across all eta bins of a mode.

    values(t) is exact up to quadrature tolerance: the query time is bridged
    from the nearest lower station by one more adaptive panel, so
    finite-difference probes in t see the true integrand, not interpolation
    kinks. values_interp(t) is the cheap piecewise-linear variant.
    """

    r_values: np.ndarray
    stations: np.ndarray
    beta: float
    gamma: float
    cumulative: np.ndarray

    @staticmethod
    def build(r_values, stations, w):
        r = np.asarray(r_values, dtype=float).ravel()
        st = np.asarray(stations, dtype=float)
        if st.ndim != 1 or st.size < 1 or st[0] != 0.0 or np.any(np.diff(st) <= 0):
            raise ValueError("stations must be increasing and start at 0")
        cum = np.zeros((st.size, r.size))
        for i in range(1, st.size):
            cum[i] = cum[i - 1] + _adaptive_panel(st[i - 1], st[i], r, w.beta, w.gamma)
        return TimeWeightTable(
            r_values=r, stations=st, beta=w.beta, gamma=w.gamma, cumulative=cum
        )

    def _station_below(self, t):
        if t < 0 or t > self.stations[-1] + 1e-9:
            raise ValueError(f"t={t} outside table range [0, {self.stations[-1]}]")
        return int(np.searchsorted(self.stations, min(t, self.stations[-1]), side="right") - 1)

    def values(self, t):
        i = self._station_below(t)
        out = self.cumulative[i].copy()
        if t > self.stations[i]:
            out += _adaptive_panel(self.stations[i], t, self.r_values, self.beta, self.gamma)
        return out

    def values_interp(self, t):
        i = self._station_below(t)
        if i == self.stations.size - 1:
            return self.cumulative[i].copy()
        frac = (t - self.stations[i]) / (self.stations[i + 1] - self.stations[i])
        return (1 - frac) * self.cumulative[i] + frac * self.cumulative[i + 1]


def a_finite_factor(eta, k, t, w, table=None):
    """Finite-channel multiplier exp(arctan(eta/k - t) - W(t; eta/k))."""
    r = np.asarray(eta, dtype=float) / k
    if table is not None:
        if r.shape != table.r_values.shape or not np.allclose(r, table.r_values):
            raise ValueError("weight table was built for different eta/k rays")
        wint = table.values(t)
    else:
        wint = np.array([weight_integral(ri, t, w) for ri in np.atleast_1d(r)])
        wint = wint.reshape(np.shape(r))
    return np.exp(np.arctan(r - t) - wint)


def apply_A_finite(field, t, w, table=None):
    s = a_finite_factor(field.eta, field.k, t, w, table=table) * field.spectrum
    return from_spectrum(field.k, field.channel, s, field.t_stamp)


def finite_dissipation_density(eta, k, t, w):
    """Per-bin dissipation rate of the finite-channel weight, without the A factor.

    1/(1+(eta/k-t)^2) + <t>^(-2 beta) (1+(eta/k-t)^2)^(-2 gamma); the actual
    -dA/dt equals this density times the multiplier itself.
    """
    r = np.asarray(eta, dtype=float) / k
    return 1.0 / (1.0 + (r - t) ** 2) + _weight_integrand(float(t), r, w.beta, w.gamma)


def dump_spectrum(field, path):
    """Write eta, re, im rows sorted by eta; header documents the normalization."""
    eta = field.eta
    order = np.argsort(eta)
    s = field.spectrum
    with open(path, "w") as fh:
        fh.write(
            "# eta,re,im with spectrum = fft(u[:m]) * sqrt(h/m); "
            f"m={spectrum_size(field.channel)}, h={field.channel.spacing!r}, k={field.k!r}\n"
        )
        fh.write("eta,re,im\n")
        for i in order:
            fh.write(f"{float(eta[i])!r},{float(s[i].real)!r},{float(s[i].imag)!r}\n")
