"""Shear profiles and the coefficients the sheared-coordinate evolution actually sees.

A background flow U(y) enters the mode equations only through
f(z) = U''(U^{-1}(z)) and g(z) = U'(U^{-1}(z)), together with sup-norm
tables of their z-derivatives. Those tables feed the composite norms that
weight the energy-ladder coefficients, the smallness margin, and the
boundary vanishing checks.

Profiles come from a small named registry; each entry is Couette plus a
parametric perturbation. The z-derivative chains F_{i+1} = F_i' / U' are
generated symbolically, but in a closed "atom" algebra per family (e.g. the
bump profile closes over r, 1/(1-r^2), the exponential, and 1/U'), so each
chain entry stays a small polynomial instead of a nested quotient tree.
Sup norms are then taken over dense evaluation grids.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp

from ._stencils import fd_weights
from .errors import NumericsError, ProfileError

# hard bilipschitz bracket for U'
BILIP_MIN = 0.5
BILIP_MAX = 2.0

_SUP_GRID_N = 4097
_DEFAULT_JMAX = 6

# compact support half-width shrink: keeps the rational atoms finite at the edge
_SUPPORT_SHRINK = float(np.sqrt(1.0 - 1e-9))

_EPS, _Y0, _W = sp.symbols("eps y0 w", real=True)
_AY, _AR, _AV, _AE, _AG, _AS, _AC = sp.symbols("ay ar av aE aG as_ ac", real=True)


@dataclass(frozen=True)
class _Family:
    """Symbolic closure data for one registry entry.

    atoms are the generators every chain entry is a polynomial in; rules maps
    each atom to its y-derivative written in the atoms again. F0 is U'' and
    G0 is U', both in atoms. atom_eval produces the numeric atom arrays.
    """

    param_syms: tuple
    defaults: dict
    atoms: tuple
    rules: dict
    U_pert: sp.Expr
    F0: sp.Expr
    G0: sp.Expr
    compact: bool
    atom_eval: Callable


def _bump_family():
    # atoms: y, r=(y-y0)/w, v=1/(1-r^2), E=exp(-v), G=1/U'
    db_dy = -2 * _AR * _AV ** 2 * _AE / _W
    d2b = -2 * _AE / _W ** 2 * (_AV ** 2 + 4 * _AR ** 2 * _AV ** 3 - 2 * _AR ** 2 * _AV ** 4)
    F0 = _EPS * d2b
    rules = {
        _AY: sp.Integer(1),
        _AR: 1 / _W,
        _AV: 2 * _AR * _AV ** 2 / _W,
        _AE: -2 * _AR * _AV ** 2 * _AE / _W,
        _AG: -F0 * _AG ** 2,
    }

    def atom_eval(y, p):
        r = (y - p["y0"]) / p["w"]
        v = 1.0 / (1.0 - r ** 2)
        E = np.exp(-v)
        G = 1.0 / (1.0 - 2.0 * p["eps"] * r * v ** 2 * E / p["w"])
        return [y, r, v, E, G]

    return _Family(
        param_syms=(_EPS, _Y0, _W),
        defaults={"eps": 0.0, "y0": 0.5, "w": 0.2},
        atoms=(_AY, _AR, _AV, _AE, _AG),
        rules=rules,
        U_pert=_AE,
        F0=F0,
        G0=1 + _EPS * db_dy,
        compact=True,
        atom_eval=atom_eval,
    )


def _sin_family():
    # atoms: y, s=sin(2 pi y), c=cos(2 pi y), G=1/U'
    F0 = -4 * sp.pi ** 2 * _EPS * _AS
    rules = {
        _AY: sp.Integer(1),
        _AS: 2 * sp.pi * _AC,
        _AC: -2 * sp.pi * _AS,
        _AG: -F0 * _AG ** 2,
    }

    def atom_eval(y, p):
        s = np.sin(2 * np.pi * y)
        c = np.cos(2 * np.pi * y)
        G = 1.0 / (1.0 + 2 * np.pi * p["eps"] * c)
        return [y, s, c, G]

    return _Family(
        param_syms=(_EPS,),
        defaults={"eps": 0.0},
        atoms=(_AY, _AS, _AC, _AG),
        rules=rules,
        U_pert=_AS,
        F0=F0,
        G0=1 + 2 * sp.pi * _EPS * _AC,
        compact=False,
        atom_eval=atom_eval,
    )


def _quartic_family():
    # U'' = eps * y^2 (1-y)^2, the minimal wall-vanishing perturbation;
    # the linear term in B keeps U(1) = 1.
    B = _AY ** 4 / 12 - _AY ** 5 / 10 + _AY ** 6 / 30 - _AY / 60
    dB = sp.diff(B, _AY)
    F0 = _EPS * _AY ** 2 * (1 - _AY) ** 2
    rules = {
        _AY: sp.Integer(1),
        _AG: -F0 * _AG ** 2,
    }

    def atom_eval(y, p):
        dB_num = y ** 3 / 3 - y ** 4 / 2 + y ** 5 / 5 - 1.0 / 60.0
        G = 1.0 / (1.0 + p["eps"] * dB_num)
        return [y, G]

    return _Family(
        param_syms=(_EPS,),
        defaults={"eps": 0.0},
        atoms=(_AY, _AG),
        rules=rules,
        U_pert=B,
        F0=F0,
        G0=1 + _EPS * dB,
        compact=False,
        atom_eval=atom_eval,
    )


def _couette_family():
    return _Family(
        param_syms=(),
        defaults={},
        atoms=(_AY,),
        rules={_AY: sp.Integer(1)},
        U_pert=sp.Integer(0),
        F0=sp.Integer(0),
        G0=sp.Integer(1),
        compact=False,
        atom_eval=lambda y, p: [y],
    )


_FAMILY_BUILDERS = {
    "couette": _couette_family,
    "couette_bump": _bump_family,
    "couette_sin": _sin_family,
    "couette_quartic": _quartic_family,
}


@lru_cache(maxsize=None)
def _family(name):
    if name not in _FAMILY_BUILDERS:
        known = ", ".join(sorted(_FAMILY_BUILDERS))
        raise ProfileError(f"unknown profile {name!r}; registry has: {known}")
    return _FAMILY_BUILDERS[name]()


def _d(expr, fam):
    out = sp.Integer(0)
    for a, da in fam.rules.items():
        out += expr.diff(a) * da
    return out


@lru_cache(maxsize=None)
def _compiled_chain(name, j_max):
    """Lambdified derivative chains of f and g plus the perturbation, in atoms.

    F_0 = U'', G_0 = U', and each next entry is the y-derivative times 1/U'
    (the aG atom), expanded to polynomial normal form. Compiled once per
    (name, j_max); parameter values are passed at call time so amplitude
    sweeps reuse the compilation.
    """
    fam = _family(name)
    f_chain = [sp.expand(fam.F0)]
    g_chain = [sp.expand(fam.G0)]
    for _ in range(j_max):
        f_chain.append(sp.expand(_d(f_chain[-1], fam) * _AG))
        g_chain.append(sp.expand(_d(g_chain[-1], fam) * _AG))
    args = fam.atoms + fam.param_syms
    lam = [sp.lambdify(args, e, modules="numpy") for e in f_chain + g_chain + [fam.U_pert]]
    return {
        "f": lam[: j_max + 1],
        "g": lam[j_max + 1 : 2 * j_max + 2],
        "pert": lam[-1],
    }


def registry_names():
    return sorted(_FAMILY_BUILDERS)


@dataclass(frozen=True)
class ChannelConfig:
    """Geometry of the z-domain and the x-period the wavenumbers live on.

    kind "finite" is the wall-bounded channel on [0, 1]; "infinite" is a large
    periodic-style box [-Z, Z) truncating the line. n_grid counts collocation
    points (walls included in the finite case). support_interval optionally
    records the open interval the data is promised to live in; vanish_order the
    number of wall derivatives required to vanish.
    """

    kind: str
    n_grid: int
    z_min: float = 0.0
    z_max: float = 1.0
    x_period: float = 2 * np.pi
    support_interval: Optional[tuple] = None
    vanish_order: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("finite", "infinite"):
            raise ProfileError(f"channel kind must be 'finite' or 'infinite', got {self.kind!r}")
        if self.kind == "finite" and (self.z_min, self.z_max) != (0.0, 1.0):
            raise ProfileError("finite channel forces z_min=0, z_max=1")
        if self.z_max <= self.z_min:
            raise ProfileError("need z_max > z_min")
        if self.n_grid < 8:
            raise ProfileError(f"n_grid must be at least 8, got {self.n_grid}")
        if self.x_period <= 0:
            raise ProfileError("x_period must be positive")
        if self.support_interval is not None:
            object.__setattr__(
                self, "support_interval", tuple(float(v) for v in self.support_interval)
            )
            a, b = self.support_interval
            if not (self.z_min < a < b < self.z_max):
                raise ProfileError(
                    f"support_interval {self.support_interval} must be strictly inside "
                    f"({self.z_min}, {self.z_max})"
                )

    @staticmethod
    def finite(n_grid, **kw):
        return ChannelConfig(kind="finite", n_grid=n_grid, z_min=0.0, z_max=1.0, **kw)

    @staticmethod
    def infinite(n_grid, half_width=10.0, **kw):
        return ChannelConfig(
            kind="infinite", n_grid=n_grid, z_min=-float(half_width), z_max=float(half_width), **kw
        )

    @property
    def spacing(self):
        if self.kind == "finite":
            return (self.z_max - self.z_min) / (self.n_grid - 1)
        return (self.z_max - self.z_min) / self.n_grid

    def z_points(self):
        if self.kind == "finite":
            return np.linspace(self.z_min, self.z_max, self.n_grid)
        # periodic-style box: right endpoint omitted
        return self.z_min + self.spacing * np.arange(self.n_grid)


@dataclass(frozen=True, eq=False)
class ShearProfile:
    """A registry flow with its sheared-coordinate samples and derivative tables.

    f_samples and g_samples live on the channel's z-grid. f_deriv_sup[i] and
    g_deriv_sup[i] hold sup_z of the i-th z-derivative of f and g over the
    channel, taken on a dense evaluation grid. U, dU, d2U are vectorized
    callables in the flow coordinate y; inverse maps z back to y.
    """

    name: str
    params: dict
    channel: ChannelConfig
    f_samples: np.ndarray
    g_samples: np.ndarray
    f_deriv_sup: np.ndarray
    g_deriv_sup: np.ndarray
    bilip_lower: float
    bilip_upper: float
    U: Callable = field(repr=False)
    dU: Callable = field(repr=False)
    d2U: Callable = field(repr=False)
    inverse: Callable = field(repr=False)
    eval_deriv: Callable = field(repr=False)

    @property
    def j_max(self):
        return len(self.f_deriv_sup) - 1

    def norm_table(self, j_max=None):
        return build_norm_table(self, j_max)


def _resolve_params(name, params):
    fam = _family(name)
    params = dict(params or {})
    # eps is accepted (and inert) for plain couette so sweeps can share configs
    allowed = set(fam.defaults) | {"eps"}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ProfileError(f"profile {name!r} does not take parameters: {', '.join(unknown)}")
    filled = dict(fam.defaults)
    filled.update({k: float(v) for k, v in params.items() if k in fam.defaults})
    if "w" in filled and filled["w"] <= 0:
        raise ProfileError(f"bump width must be positive, got {filled['w']}")
    return filled


def build_profile(name, channel, params=None, j_max=_DEFAULT_JMAX):
    """Construct a ShearProfile on the channel grid.

    Rejects parameters that push U' outside the [0.5, 2] bilipschitz bracket,
    reporting the offending min/max.
    """
    fam = _family(name)
    filled = _resolve_params(name, params)
    chain = _compiled_chain(name, j_max)
    param_args = tuple(filled[str(s)] for s in fam.param_syms)

    if fam.compact:
        half = filled["w"] * _SUPPORT_SHRINK
        support = (filled["y0"] - half, filled["y0"] + half)
    else:
        support = None

    def eval_entries(entries_with_fills, y):
        """Evaluate chain entries at y, atoms computed once, support masked.

        Outside a compact support every perturbation derivative vanishes
        identically, so the fill is exact there; evaluating the raw atoms
        instead would overflow at the support edge.
        """
        y = np.asarray(y, dtype=float)
        if support is None:
            atoms = fam.atom_eval(y, filled)
            out = []
            for fn, _fill in entries_with_fills:
                v = np.asarray(fn(*atoms, *param_args), dtype=float)
                out.append(np.broadcast_to(v, y.shape).astype(float, copy=True))
            return out
        lo, hi = support
        inside = (y > lo) & (y < hi)
        outs = [np.full(y.shape, fill, dtype=float) for _, fill in entries_with_fills]
        if inside.any():
            atoms = fam.atom_eval(y[inside], filled)
            for o, (fn, _fill) in zip(outs, entries_with_fills):
                v = np.asarray(fn(*atoms, *param_args), dtype=float)
                o[inside] = np.broadcast_to(v, y[inside].shape)
        return outs

    eps = filled.get("eps", 0.0)

    def U_full(y):
        y = np.asarray(y, dtype=float)
        (pert,) = eval_entries([(chain["pert"], 0.0)], y)
        return y + eps * pert

    # |U(y) - y| bound gives the per-point bisection bracket half-width
    if name == "couette":
        dev = 0.0
    else:
        probe = np.linspace(*support, 2001) if support else np.linspace(-1.0, 2.0, 2001)
        dev = float(np.max(np.abs(U_full(probe) - probe)))

    def inverse(z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        zv = np.atleast_1d(z).astype(float)
        lo = zv - dev - 1e-9
        hi = zv + dev + 1e-9
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            high = U_full(mid) > zv
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out

    def eval_deriv(which, i, y):
        """i-th z-derivative of f or g, as a function of the flow coordinate y."""
        fill = 1.0 if (which == "g" and i == 0) else 0.0
        (v,) = eval_entries([(chain[which][i], fill)], y)
        return v

    z = channel.z_points()
    y_grid = inverse(z)
    f_samples, g_samples = eval_entries(
        [(chain["f"][0], 0.0), (chain["g"][0], 1.0)], y_grid
    )

    # dense grid in y spanning exactly what the channel sees
    y_dense = np.linspace(inverse(channel.z_min), inverse(channel.z_max), _SUP_GRID_N)
    entries = [(chain["f"][i], 0.0) for i in range(j_max + 1)]
    entries += [(chain["g"][i], 1.0 if i == 0 else 0.0) for i in range(j_max + 1)]
    dense_vals = eval_entries(entries, y_dense)
    f_dense = dense_vals[: j_max + 1]
    g_dense = dense_vals[j_max + 1 :]

    g_min = float(min(g_dense[0].min(), g_samples.min()))
    g_max = float(max(g_dense[0].max(), g_samples.max()))
    if g_min < BILIP_MIN or g_max > BILIP_MAX:
        raise ProfileError(
            f"profile {name!r} with params {filled} is not bilipschitz: "
            f"U' ranges over [{g_min:.6g}, {g_max:.6g}], allowed [{BILIP_MIN}, {BILIP_MAX}]"
        )

    f_deriv_sup = np.array([np.max(np.abs(v)) for v in f_dense])
    g_deriv_sup = np.array([np.max(np.abs(v)) for v in g_dense])
    if not (np.all(np.isfinite(f_deriv_sup)) and np.all(np.isfinite(g_deriv_sup))):
        raise NumericsError(f"profile {name!r}: derivative table evaluation overflowed")

    return ShearProfile(
        name=name,
        params=filled,
        channel=channel,
        f_samples=f_samples,
        g_samples=g_samples,
        f_deriv_sup=f_deriv_sup,
        g_deriv_sup=g_deriv_sup,
        bilip_lower=g_min,
        bilip_upper=g_max,
        U=U_full,
        dU=lambda y: eval_deriv("g", 0, y),
        d2U=lambda y: eval_deriv("f", 0, y),
        inverse=inverse,
        eval_deriv=eval_deriv,
    )


def composite_norm(deriv_sup, j):
    """Sup over compositions of j into positive parts of the product of part sup-norms.

    Dynamic programming: m_0 = 1, m_n = max_{1<=i<=n} d_i * m_{n-i}; the whole
    part i = j is included automatically. Order zero returns d_0 itself.
    """
    d = np.asarray(deriv_sup, dtype=float)
    if j < 0:
        raise ValueError(f"order must be nonnegative, got {j}")
    if d.size < j + 1:
        raise ValueError(f"derivative table has {d.size} entries, need {j + 1}")
    if np.any(d[: j + 1] < 0):
        raise ProfileError("derivative sup-norms must be nonnegative")
    if j == 0:
        return float(d[0])
    m = np.zeros(j + 1)
    m[0] = 1.0
    for n in range(1, j + 1):
        m[n] = max(d[i] * m[n - i] for i in range(1, n + 1))
    return float(m[j])


@dataclass(frozen=True)
class CompositeNormTable:
    """Composite norms of f and g up to j_max plus their convolution pair norms."""

    j_max: int
    f_norms: np.ndarray
    g_norms: np.ndarray
    pair_norms: np.ndarray

    def validate(self, rtol=1e-12):
        """Submultiplicativity of the composite norms.

        Products over positive parts concatenate, so orders >= 1 always obey
        the inequality; order 0 participates only when the zeroth sup is <= 1,
        the one case where it cannot inflate a product.
        """
        for norms in (self.f_norms, self.g_norms):
            start = 0 if norms[0] <= 1.0 else 1
            for j1 in range(start, self.j_max + 1):
                for j2 in range(max(j1, 1), self.j_max + 1 - j1):
                    if norms[j1] * norms[j2] > norms[j1 + j2] * (1.0 + rtol):
                        raise NumericsError(
                            f"composite norms not submultiplicative at ({j1},{j2}): "
                            f"{norms[j1] * norms[j2]} > {norms[j1 + j2]}"
                        )
        return True


def build_norm_table(profile, j_max=None):
    jm = profile.j_max if j_max is None else j_max
    if jm > profile.j_max:
        raise ValueError(f"profile tables stop at order {profile.j_max}, requested {jm}")
    f_norms = np.array([composite_norm(profile.f_deriv_sup, j) for j in range(jm + 1)])
    g_norms = np.array([composite_norm(profile.g_deriv_sup, j) for j in range(jm + 1)])
    pair = np.array(
        [
            sum((1.0 + f_norms[j1]) * (1.0 + g_norms[j - j1]) for j1 in range(j + 1))
            for j in range(jm + 1)
        ]
    )
    table = CompositeNormTable(j_max=jm, f_norms=f_norms, g_norms=g_norms, pair_norms=pair)
    table.validate()
    return table


def pair_norm(table, j):
    """Convolution sum over splits j1 + j2 = j of (1 + |f|_{j1})(1 + |g|_{j2})."""
    if j < 0 or j > table.j_max:
        raise ValueError(f"order {j} outside table range 0..{table.j_max}")
    return float(table.pair_norms[j])


def smallness_margin(profile, channel=None):
    """(d_0(f) + d_1(f)) times the x-period; callers compare against a threshold."""
    ch = channel or profile.channel
    return float((profile.f_deriv_sup[0] + profile.f_deriv_sup[1]) * ch.x_period)


def vanishing_order(h_samples, N, tol=1e-6):
    """Endpoint vanishing flags for orders 0..N on a uniform [0, 1] grid.

    Order j passes when one-sided derivative estimates at both walls stay below
    tol times the sample sup. Stencils use j + N + 2 nodes, giving O(h^(N+2))
    truncation error; grids too coarse for that are rejected.
    """
    h_samples = np.asarray(h_samples)
    n = h_samples.size
    if N < 0:
        raise ValueError("N must be nonnegative")
    npoints_max = 2 * N + 2
    if n < 2 * npoints_max:
        raise ProfileError(
            f"grid too coarse for vanishing order {N}: need n_grid >= {2 * npoints_max}, got {n}"
        )
    h = 1.0 / (n - 1)
    scale = max(float(np.max(np.abs(h_samples))), 1e-300)
    flags = []
    for j in range(N + 1):
        npts = j + N + 2
        if j == 0:
            left, right = h_samples[0], h_samples[-1]
        else:
            w = fd_weights(0.0, np.arange(npts, dtype=float), j) / h ** j
            left = (w * h_samples[:npts]).sum()
            right = (-1.0) ** j * (w * h_samples[-npts:][::-1]).sum()
        flags.append(bool(max(abs(left), abs(right)) <= tol * scale))
    return np.array(flags, dtype=bool)
