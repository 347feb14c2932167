"""Stream-function solves in sheared coordinates, homogeneous solutions, wall traces.

The mode equation couples omega to a stream function through the operator
-k^2 + (g (d/dz - ikt))^2 with Dirichlet conditions. Conjugating by e^{iktz}
removes every trace of t: psi = e^{iktz} phi where

    (-k^2 + g d/dz (g d/dz)) phi = e^{-iktz} omega

so one factorization per (k, profile, channel) serves all times and all RK
stages. Dividing the interior rows by g symmetrizes the system into an SPD
banded matrix (k^2/g) I - d/dz(g d/dz), solved by a real banded Cholesky
factor against complex right-hand sides.

For the infinite channel with constant g the operator diagonalizes in
frequency instead and the solve is the exact multiplier -1/(k^2+g^2(eta-kt)^2).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from ._stencils import edge_derivative
from .errors import NumericsError, ProfileError
from .spectral import ModeField, from_spectrum

_CONSTANT_G_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """Factorized conjugated stream operator for one (k, profile, channel).

    diagonal is the exact Fourier route, taken when the channel is infinite
    and g is constant to round-off; cho_factor is the banded upper Cholesky
    factor of the symmetrized interior system otherwise.
    """

    k: float
    channel: object
    g_samples: np.ndarray
    g_mid: np.ndarray
    h: float
    diagonal: bool
    g0: float
    cho_factor: np.ndarray

    def solve_conjugated(self, rho):
        """phi with zero boundary values solving the time-independent system."""
        phi = np.zeros_like(rho, dtype=complex)
        rhs = -rho[1:-1] / self.g_samples[1:-1]
        phi[1:-1] = cho_solve_banded((self.cho_factor, False), rhs)
        return phi

    def apply_conjugated(self, phi):
        """(-k^2 + g d/dz(g d/dz)) phi with identity boundary rows."""
        out = np.array(phi, dtype=complex)
        flux = self.g_mid * np.diff(phi) / self.h
        out[1:-1] = -self.k ** 2 * phi[1:-1] + self.g_samples[1:-1] * np.diff(flux) / self.h
        return out


def assemble_conjugated_operator(profile, channel, k):
    if k == 0:
        raise ValueError("k=0 has no stream solve; modes are nonzero")
    z = channel.z_points()
    h = channel.spacing
    g = np.asarray(profile.g_samples, dtype=float)
    if g.shape != z.shape:
        raise ProfileError("profile samples do not match the channel grid")
    y_mid = profile.inverse(z[:-1] + 0.5 * h)
    g_mid = profile.eval_deriv("g", 0, y_mid)

    g0 = float(g.mean())
    diagonal = channel.kind == "infinite" and float(np.max(np.abs(g - g0))) < _CONSTANT_G_TOL

    n = z.size
    # symmetrized interior system: (k^2/g) I - d/dz(g d/dz), SPD for k != 0
    diag = k ** 2 / g[1:-1] + (g_mid[:-1] + g_mid[1:]) / h ** 2
    ab = np.zeros((2, n - 2))
    ab[0, 1:] = -g_mid[1:-1] / h ** 2
    ab[1, :] = diag
    try:
        cho = cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"stream operator factorization failed at k={k}: {exc}") from None
    return EllipticOperator(
        k=float(k),
        channel=channel,
        g_samples=g,
        g_mid=np.asarray(g_mid, dtype=float),
        h=h,
        diagonal=diagonal,
        g0=g0,
        cho_factor=cho,
    )


def _check_match(op, field):
    if field.channel != op.channel:
        raise ValueError("field grid does not match the operator's channel")
    if field.k != op.k:
        raise ValueError(f"field k={field.k} does not match operator k={op.k}")


def solve_stream(op, omega, t):
    """psi = e^{iktz} phi with phi from the factorized solve; Dirichlet data zero."""
    _check_match(op, omega)
    if op.diagonal:
        eta = omega.eta
        mult = -1.0 / (op.k ** 2 + op.g0 ** 2 * (eta - op.k * t) ** 2)
        return from_spectrum(op.k, op.channel, mult * omega.spectrum, t_stamp=t)
    z = op.channel.z_points()
    phase = np.exp(-1j * op.k * t * z)
    phi = op.solve_conjugated(phase * omega.grid_values)
    return ModeField(k=op.k, channel=op.channel, grid_values=np.conj(phase) * phi, t_stamp=t)


def apply_stream_operator(op, psi, t):
    """Forward apply of -k^2 + (g(d/dz - ikt))^2, the inverse of solve_stream."""
    _check_match(op, psi)
    if op.diagonal:
        eta = psi.eta
        mult = -(op.k ** 2 + op.g0 ** 2 * (eta - op.k * t) ** 2)
        return from_spectrum(op.k, op.channel, mult * psi.spectrum, t_stamp=t)
    z = op.channel.z_points()
    phase = np.exp(-1j * op.k * t * z)
    out = op.apply_conjugated(phase * psi.grid_values)
    return ModeField(k=op.k, channel=op.channel, grid_values=np.conj(phase) * out, t_stamp=t)


def homogeneous_solutions(profile, channel, k, t):
    """The two oscillatory kernel elements of the adjoint operator, finite channel.

    u_0 carries boundary values (-1, 0) and u_1 carries (0, 1); both have
    t-independent modulus. Shapes are sinh profiles of the flow coordinate
    w = U^{-1}(z), divided by g and modulated by the wall-anchored phases.
    """
    if channel.kind != "finite":
        raise ProfileError("homogeneous boundary solutions exist on the finite channel only")
    z = channel.z_points()
    w = profile.inverse(z)
    a = float(profile.inverse(0.0))
    b = float(profile.inverse(1.0))
    if abs(k * (a - b)) < 1e-8:
        raise NumericsError(f"degenerate sinh denominator at k={k}: |k (a-b)| ~ 0")
    g = profile.g_samples
    g_at_0 = g[0]
    g_at_1 = g[-1]
    q0 = -g_at_0 * np.sinh(k * (w - b)) / np.sinh(k * (a - b))
    q1 = g_at_1 * np.sinh(k * (w - a)) / np.sinh(k * (b - a))
    u0 = np.exp(-1j * k * t * z) * q0 / g
    u1 = np.exp(-1j * k * t * (z - 1.0)) * q1 / g
    return (
        ModeField(k=k, channel=channel, grid_values=u0, t_stamp=t),
        ModeField(k=k, channel=channel, grid_values=u1, t_stamp=t),
    )


def adjoint_apply(profile, channel, k, t, u):
    """-k^2 u + (d/dz + ikt)(g (d/dz + ikt)(g u)) on interior nodes.

    Conjugation by e^{-iktz} reduces it to the t-free flux form
    d/dz(g d/dz(g chi)); staggered second-order differences. Returns the
    interior values (ends trimmed), near zero for kernel elements.
    """
    z = channel.z_points()
    h = channel.spacing
    chi = np.exp(1j * k * t * z) * u.grid_values
    m = profile.g_samples * chi
    y_mid = profile.inverse(z[:-1] + 0.5 * h)
    g_mid = profile.eval_deriv("g", 0, y_mid)
    flux = g_mid * np.diff(m) / h
    return -k ** 2 * chi[1:-1] + np.diff(flux) / h


@dataclass(frozen=True)
class BoundaryData:
    """Wall derivative traces of the stream function, with the method that made them."""

    neumann_0: complex
    neumann_1: complex
    t_stamp: float
    method: str


def neumann_data_fd(psi):
    """One-sided 4th-order wall derivatives of psi; needs at least 6 grid points."""
    if psi.channel.kind != "finite":
        raise ProfileError("wall traces are defined on the finite channel")
    if psi.channel.n_grid < 6:
        raise ProfileError(f"need at least 6 grid points for the trace stencil, got {psi.channel.n_grid}")
    h = psi.channel.spacing
    v = psi.grid_values
    return BoundaryData(
        neumann_0=complex(edge_derivative(v, h, 1, 5, "left")),
        neumann_1=complex(edge_derivative(v, h, 1, 5, "right")),
        t_stamp=psi.t_stamp,
        method="finite-difference",
    )


def neumann_data_integral(omega, u0, u1, profile):
    """Trace identity route: neumann_j = (integral of u_j omega) / g(wall_j)^2.

    The pairing is the plain bilinear integral (no conjugate), trapezoid rule.
    """
    if omega.channel.kind != "finite":
        raise ProfileError("wall traces are defined on the finite channel")
    h = omega.channel.spacing
    p0 = np.trapezoid(u0.grid_values * omega.grid_values, dx=h)
    p1 = np.trapezoid(u1.grid_values * omega.grid_values, dx=h)
    g = profile.g_samples
    return BoundaryData(
        neumann_0=complex(p0 / g[0] ** 2),
        neumann_1=complex(p1 / g[-1] ** 2),
        t_stamp=omega.t_stamp,
        method="integral-formula",
    )


@lru_cache(maxsize=64)
def _lambda_operator(k, n_grid, c):
    """Constant-coefficient finite-channel operator with g replaced by c."""
    from .profiles import ChannelConfig, build_profile

    channel = ChannelConfig.finite(n_grid)
    z = channel.z_points()
    g = np.full(z.size, c)
    h = channel.spacing
    diag = k ** 2 / g[1:-1] + 2.0 * c / h ** 2
    ab = np.zeros((2, z.size - 2))
    ab[0, 1:] = -c / h ** 2
    ab[1, :] = diag
    cho = cholesky_banded(ab, lower=False)
    return EllipticOperator(
        k=float(k),
        channel=channel,
        g_samples=g,
        g_mid=np.full(z.size - 1, c),
        h=h,
        diagonal=False,
        g0=float(c),
        cho_factor=cho,
    )


def lambda_solve(u, t, w, channel=None):
    """Solve (-k^2 + c^2 (d/dz - ikt)^2) Lambda = u with c = C_low, Dirichlet walls."""
    channel = channel or u.channel
    if channel.kind != "finite":
        raise ProfileError("the dual-norm solve is defined on the finite channel")
    op = _lambda_operator(float(u.k), channel.n_grid, float(w.C_low))
    return solve_stream(op, u, t)


def h1t_staggered_norm(field, t, w):
    """Grid-side H^1_t via the conjugated gradient: the exact discrete partner of lambda_solve."""
    z = field.channel.z_points()
    h = field.channel.spacing
    phi = np.exp(-1j * field.k * t * z) * field.grid_values
    grad_sq = np.sum(np.abs(np.diff(phi) / h) ** 2)
    val = h * (field.k ** 2 * np.sum(np.abs(phi) ** 2) + w.C_low ** 2 * grad_sq)
    return float(np.sqrt(val))


def hm1t_dual_norm(u, t, w, channel=None):
    """Dual norm through the constant-coefficient solve.

    Returns (primary, alternative): primary^2 = -Re<Lambda, u> with the plain
    h-weighted pairing, alternative the staggered H^1_t of Lambda. The two are
    equal by discrete summation by parts up to round-off; a pairing more
    negative than round-off tolerance flags a discretization failure.
    """
    lam = lambda_solve(u, t, w, channel)
    h = u.channel.spacing
    pairing = h * np.sum(lam.grid_values * np.conj(u.grid_values))
    val = -pairing.real
    scale = h * float(np.sum(np.abs(u.grid_values) ** 2))
    if val < -1e-12 * max(scale, 1e-300):
        raise NumericsError(f"dual pairing came out negative: {val}")
    return float(np.sqrt(max(val, 0.0))), h1t_staggered_norm(lam, t, w)
