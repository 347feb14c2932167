"""Tests for the conjugated elliptic solver, boundary traces, and dual norms."""

import numpy as np
import pytest

from orrlab._stencils import edge_derivative
from orrlab.elliptic import (
    EllipticOperator,
    adjoint_apply,
    apply_stream_operator,
    assemble_conjugated_operator,
    h1t_staggered_norm,
    hm1t_dual_norm,
    homogeneous_solutions,
    lambda_solve,
    neumann_data_fd,
    neumann_data_integral,
    solve_stream,
)
from orrlab.errors import NumericsError, ProfileError
from orrlab.profiles import ChannelConfig, build_profile
from orrlab.spectral import (
    ModeField,
    WeightParams,
    eta_frequencies,
    from_spectrum,
    l2_norm,
    to_spectrum,
)


def unit_interior(channel, index):
    u = np.zeros(channel.n_grid, dtype=complex)
    u[index] = 1.0
    return ModeField(k=1.0, channel=channel, grid_values=u)


def test_constant_coefficient_rows():
    # For g == 1, k == 1 the conjugated operator rows must be the plain
    # second difference minus identity on interior nodes.
    ch = ChannelConfig.finite(33)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    h = ch.spacing
    rng = np.random.default_rng(3)
    phi = np.zeros(ch.n_grid, dtype=complex)
    phi[1:-1] = rng.standard_normal(ch.n_grid - 2) + 1j * rng.standard_normal(ch.n_grid - 2)
    out = op.apply_conjugated(phi)
    manual = (phi[:-2] - 2.0 * phi[1:-1] + phi[2:]) / h**2 - phi[1:-1]
    assert np.max(np.abs(out[1:-1] - manual)) < 1e-11 * np.max(np.abs(manual))
    # wall rows are identity
    assert out[0] == phi[0] and out[-1] == phi[-1]


def test_apply_solve_round_trip():
    rng = np.random.default_rng(11)
    cases = [
        ("couette_sin", {"eps": 0.03}, ChannelConfig.finite(257), 2.0),
        ("couette_quartic", {"eps": 0.1}, ChannelConfig.finite(129), 1.0),
        ("couette_bump", {"eps": 0.05, "y0": 0.0, "w": 1.0}, ChannelConfig.infinite(256, half_width=6.0), 3.0),
    ]
    for name, params, ch, k in cases:
        pr = build_profile(name, ch, params)
        op = assemble_conjugated_operator(pr, ch, k)
        data = rng.standard_normal(ch.n_grid) + 1j * rng.standard_normal(ch.n_grid)
        if ch.kind == "finite":
            data[0] = data[-1] = 0.0
        omega = ModeField(k=k, channel=ch, grid_values=data)
        for t in (0.0, 3.7):
            psi = solve_stream(op, omega, t)
            back = apply_stream_operator(op, psi, t)
            # rows 0 and n-1 are boundary rows on both channel kinds (the
            # infinite box imposes Dirichlet data at its truncation edges)
            resid = back.grid_values[1:-1] - omega.grid_values[1:-1]
            scale = np.max(np.abs(omega.grid_values[1:-1]))
            assert np.max(np.abs(resid)) < 1e-9 * scale


def test_solve_refinement_second_order():
    # Nested grids 129/257/513 share nodes, so the Richardson ratio of the
    # coarse-minus-fine errors estimates the convergence order directly.
    params = {"eps": 0.05, "y0": 0.5, "w": 0.2}
    sols = {}
    for n in (129, 257, 513):
        ch = ChannelConfig.finite(n)
        pr = build_profile("couette_bump", ch, params)
        op = assemble_conjugated_operator(pr, ch, 1.0)
        z = ch.z_points()
        data = np.sin(np.pi * z) ** 2 * np.exp(2j * np.pi * z)
        psi = solve_stream(op, ModeField(k=1.0, channel=ch, grid_values=data), 2.0)
        sols[n] = psi.grid_values
    d_coarse = np.max(np.abs(sols[129] - sols[257][::2]))
    d_fine = np.max(np.abs(sols[257] - sols[513][::2]))
    order = np.log2(d_coarse / d_fine)
    assert 1.7 < order < 2.3


def test_couette_finite_analytic_solution():
    # omega = sin(pi y) at t = 0, k = 1 gives psi = -sin(pi y)/(1 + pi^2).
    ch = ChannelConfig.finite(513)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    z = ch.z_points()
    omega = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) + 0j)
    psi = solve_stream(op, omega, 0.0)
    exact = -np.sin(np.pi * z) / (1.0 + np.pi**2)
    assert np.max(np.abs(psi.grid_values - exact)) < 1e-6
    bd = neumann_data_fd(psi)
    assert bd.neumann_0 == pytest.approx(-np.pi / (1.0 + np.pi**2), abs=1e-5)
    assert bd.neumann_1 == pytest.approx(np.pi / (1.0 + np.pi**2), abs=1e-5)
    assert bd.t_stamp == 0.0 and bd.method == "finite-difference"


def test_infinite_constant_g_diagonal_route():
    ch = ChannelConfig.infinite(512, half_width=8.0)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 2.0)
    assert op.diagonal
    # Single-frequency data: the solve must match the closed resolvent formula.
    eta = eta_frequencies(ch)
    spec = np.zeros(eta.size, dtype=complex)
    spec[17] = 1.3 - 0.4j
    omega = from_spectrum(2.0, ch, spec)
    for t in (0.0, 4.2):
        psi = solve_stream(op, omega, t)
        expect = -spec / (4.0 + (eta - 2.0 * t) ** 2)
        assert np.max(np.abs(to_spectrum(psi) - expect)) < 1e-12
    # A perturbed profile must not take the diagonal shortcut.
    prb = build_profile("couette_bump", ch, {"eps": 0.01, "y0": 0.0, "w": 1.0})
    assert not assemble_conjugated_operator(prb, ch, 2.0).diagonal


def test_single_frequency_decay_rate():
    # With one active frequency, ||psi||_L2 ~ t^-2 once |eta - k t| >> k.
    ch = ChannelConfig.infinite(256, half_width=8.0)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    eta = eta_frequencies(ch)
    spec = np.zeros(eta.size, dtype=complex)
    spec[np.argmin(np.abs(eta - 2.0))] = 1.0
    omega = from_spectrum(1.0, ch, spec)
    ts = np.linspace(20.0, 120.0, 12)
    norms = [l2_norm(solve_stream(op, omega, t)) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.1)


def test_truncation_doubling_infinite():
    # Doubling the box at fixed spacing must leave the solution unchanged
    # near the data support (k = 2 keeps the image terms ~ e^{-4 (Z - 2)}).
    sols = {}
    for half_width, n in ((8.0, 256), (16.0, 512)):
        ch = ChannelConfig.infinite(n, half_width=half_width)
        pr = build_profile("couette_bump", ch, {"eps": 1e-3, "y0": 0.0, "w": 1.0})
        op = assemble_conjugated_operator(pr, ch, 2.0)
        z = ch.z_points()
        omega = ModeField(k=2.0, channel=ch, grid_values=np.exp(-(z**2)) * np.exp(1j * z))
        sols[half_width] = (z, solve_stream(op, omega, 2.0).grid_values)
    z8, s8 = sols[8.0]
    z16, s16 = sols[16.0]
    start = np.searchsorted(z16, z8[0])
    diff = np.abs(s8 - s16[start : start + z8.size])
    assert np.max(diff[np.abs(z8) <= 2.0]) < 1e-8


def test_homogeneous_solutions_boundary_values():
    ch = ChannelConfig.finite(1025)
    pr = build_profile("couette_sin", ch, {"eps": 0.03})
    for t in (0.0, 5.0):
        u0, u1 = homogeneous_solutions(pr, ch, 1.0, t)
        assert u0.grid_values[0] == pytest.approx(-1.0, abs=1e-13)
        assert abs(u0.grid_values[-1]) < 1e-13
        assert abs(u1.grid_values[0]) < 1e-13
        assert u1.grid_values[-1] == pytest.approx(1.0, abs=1e-13)
    # |u0| is t-independent: the conjugation only rotates the phase.
    a0 = np.abs(homogeneous_solutions(pr, ch, 1.0, 0.0)[0].grid_values)
    a1 = np.abs(homogeneous_solutions(pr, ch, 1.0, 9.0)[0].grid_values)
    assert np.max(np.abs(a0 - a1)) < 1e-12


def test_homogeneous_kernel_residual():
    # Couette: the sinh formula is exact, so the interior residual is pure
    # discretization noise. Max-norm bottoms out at the eps/h^2 round-off
    # floor, so the grid L2 norm is the meaningful interior measure.
    ch = ChannelConfig.finite(4097)
    pr = build_profile("couette", ch)
    u0, u1 = homogeneous_solutions(pr, ch, 1.0, 2.0)
    for u in (u0, u1):
        resid = adjoint_apply(pr, ch, 1.0, 2.0, u)
        assert np.sqrt(ch.spacing * np.sum(np.abs(resid) ** 2)) < 1e-8
    # Coarser grids sit in the truncation regime: max-norm halves like h^2.
    maxes = []
    for n in (1025, 2049):
        chc = ChannelConfig.finite(n)
        prc = build_profile("couette", chc)
        w0, _ = homogeneous_solutions(prc, chc, 1.0, 2.0)
        maxes.append(np.max(np.abs(adjoint_apply(prc, chc, 1.0, 2.0, w0))))
    assert 2.5 < maxes[0] / maxes[1] < 6.0
    # Variable g: same h^2 rate, larger constant.
    resids = []
    for n in (2049, 4097):
        chv = ChannelConfig.finite(n)
        prv = build_profile("couette_sin", chv, {"eps": 0.03})
        v0, _ = homogeneous_solutions(prv, chv, 1.0, 2.0)
        resids.append(np.max(np.abs(adjoint_apply(prv, chv, 1.0, 2.0, v0))))
    assert resids[1] < 8e-7
    assert 2.5 < resids[0] / resids[1] < 6.0


def test_homogeneous_degenerate_separation():
    # A near-zero k * (wall separation) makes sinh(k (a - b)) vanish.
    ch = ChannelConfig.finite(65, x_period=1e10)
    pr = build_profile("couette", ch)
    k = 2.0 * np.pi / 1e10
    with pytest.raises(NumericsError):
        homogeneous_solutions(pr, ch, k, 0.0)
    with pytest.raises(ProfileError):
        homogeneous_solutions(pr, ChannelConfig.infinite(64, half_width=4.0), 1.0, 0.0)


def test_neumann_fd_stencil_order():
    results = []
    for n in (65, 129, 257):
        ch = ChannelConfig.finite(n)
        z = ch.z_points()
        psi = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) * np.exp(0.3 * z))
        bd = neumann_data_fd(psi)
        results.append((abs(bd.neumann_0 - np.pi), abs(bd.neumann_1 - (-np.pi * np.exp(0.3)))))
    for side in (0, 1):
        errs = [r[side] for r in results]
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(3.5 < o < 4.5 for o in orders)
    zero = ModeField(k=1.0, channel=ChannelConfig.finite(65), grid_values=np.zeros(65, dtype=complex))
    bd0 = neumann_data_fd(zero)
    assert bd0.neumann_0 == 0.0 and bd0.neumann_1 == 0.0


def test_neumann_routes_agree():
    # Both traces of the same solve: direct stencil vs adjoint integral.
    ch = ChannelConfig.finite(512)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    z = ch.z_points()
    omega = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) + 0j)
    t = 0.0
    psi = solve_stream(op, omega, t)
    fd = neumann_data_fd(psi)
    u0, u1 = homogeneous_solutions(pr, ch, 1.0, t)
    integ = neumann_data_integral(omega, u0, u1, pr)
    assert integ.method == "integral-formula"
    assert abs(fd.neumann_0 - integ.neumann_0) < 1e-4
    assert abs(fd.neumann_1 - integ.neumann_1) < 1e-4
    assert integ.neumann_0 == pytest.approx(-np.pi / (1.0 + np.pi**2), abs=1e-4)
    # omega == 0 gives exactly zero traces.
    zero = ModeField(k=1.0, channel=ch, grid_values=np.zeros(ch.n_grid, dtype=complex))
    bz = neumann_data_integral(zero, u0, u1, pr)
    assert bz.neumann_0 == 0.0 and bz.neumann_1 == 0.0


def test_neumann_route_difference_shrinks_quadratically():
    diffs = []
    for n in (128, 256, 512):
        ch = ChannelConfig.finite(n)
        pr = build_profile("couette_sin", ch, {"eps": 0.03})
        op = assemble_conjugated_operator(pr, ch, 1.0)
        z = ch.z_points()
        omega = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) ** 2 * np.exp(2j * np.pi * z))
        psi = solve_stream(op, omega, 1.5)
        fd = neumann_data_fd(psi)
        u0, u1 = homogeneous_solutions(pr, ch, 1.0, 1.5)
        integ = neumann_data_integral(omega, u0, u1, pr)
        diffs.append(max(abs(fd.neumann_0 - integ.neumann_0), abs(fd.neumann_1 - integ.neumann_1)))
    slopes = [np.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
    assert diffs[-1] < 1e-4
    assert all(s > 1.7 for s in slopes)


def test_neumann_integral_decays_in_k():
    # Data supported away from the walls reaches the boundary only through
    # the sinh kernel, so the trace shrinks as k grows.
    ch = ChannelConfig.finite(513)
    pr = build_profile("couette", ch)
    z = ch.z_points()
    r = (z - 0.5) / 0.2
    data = np.where(np.abs(r) < 1.0, np.exp(-1.0 / np.maximum(1.0 - r**2, 1e-300)), 0.0) + 0j
    traces = {}
    for k in (1.0, 4.0):
        omega = ModeField(k=k, channel=ch, grid_values=data)
        u0, u1 = homogeneous_solutions(pr, ch, k, 0.0)
        traces[k] = abs(neumann_data_integral(omega, u0, u1, pr).neumann_0)
    assert traces[4.0] < 0.5 * traces[1.0]


def test_static_trace_decay_rates():
    # Frozen data, growing t: wall traces of the solve decay algebraically.
    ch = ChannelConfig.finite(512)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    z = ch.z_points()
    u0, u1 = None, None
    cases = {
        "plain": (np.sin(np.pi * z) + 0j, -1.0),
        "vanishing": (z**2 * (1.0 - z) ** 2 * np.exp(2j * np.pi * z), -2.0),
    }
    ts = np.linspace(10.0, 100.0, 31)
    for data, gate in cases.values():
        omega = ModeField(k=1.0, channel=ch, grid_values=data)
        vals = []
        for t in ts:
            u0, u1 = homogeneous_solutions(pr, ch, 1.0, t)
            bd = neumann_data_integral(omega, u0, u1, pr)
            vals.append(abs(bd.neumann_0))
        slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
        assert slope <= gate


def test_higher_trace_recursion_ratios():
    # |psi^(j)(0)| stays within a fixed multiple of
    # (1 + |g|_j) <t>^{j-1} |psi'(0)| for j = 2, 3.
    for name, params in (("couette", None), ("couette_quartic", {"eps": 0.1})):
        ch = ChannelConfig.finite(1025)
        pr = build_profile(name, ch, params)
        op = assemble_conjugated_operator(pr, ch, 1.0)
        z = ch.z_points()
        omega = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) + 0j)
        norms = pr.norm_table().g_norms
        for t in (5.0, 15.0, 40.0):
            psi = solve_stream(op, omega, t)
            h = ch.spacing
            bracket = np.sqrt(1.0 + t * t)
            d1 = abs(edge_derivative(psi.grid_values, h, 1, 6, "left"))
            d2 = abs(edge_derivative(psi.grid_values, h, 2, 7, "left"))
            d3 = abs(edge_derivative(psi.grid_values, h, 3, 8, "left"))
            assert d2 <= 3.0 * (1.0 + norms[2]) * bracket * d1
            assert d3 <= 3.0 * (1.0 + norms[3]) * bracket**2 * d1
    # Couette at large t: psi''(0) = 2 i k t psi'(0) exactly, so the ratio
    # |psi''| / (t |psi'|) approaches 2|k|.
    assert d2 / (40.0 * d1) == pytest.approx(2.0, abs=0.1)


def test_lambda_solve_matches_couette_solve():
    ch = ChannelConfig.finite(257)
    pr = build_profile("couette", ch)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    w = WeightParams(C_low=1.0)
    rng = np.random.default_rng(7)
    data = rng.standard_normal(257) + 1j * rng.standard_normal(257)
    data[0] = data[-1] = 0.0
    u = ModeField(k=1.0, channel=ch, grid_values=data)
    for t in (0.0, 6.3):
        a = lambda_solve(u, t, w).grid_values
        b = solve_stream(op, u, t).grid_values
        assert np.array_equal(a, b)


def test_dual_norm_eigenfunction_value():
    # u = sin(pi y), k = 1, t = 0: Lambda u = -u/(1 + pi^2) and the dual
    # norm is sqrt(<u, u>_h / (1 + pi^2)) = sqrt(1 / (2 (1 + pi^2))).
    ch = ChannelConfig.finite(513)
    z = ch.z_points()
    u = ModeField(k=1.0, channel=ch, grid_values=np.sin(np.pi * z) + 0j)
    w = WeightParams(C_low=1.0)
    lam = lambda_solve(u, 0.0, w)
    assert np.max(np.abs(lam.grid_values + np.sin(np.pi * z) / (1.0 + np.pi**2))) < 1e-6
    primary, alternative = hm1t_dual_norm(u, 0.0, w)
    expect = np.sqrt(1.0 / (2.0 * (1.0 + np.pi**2)))
    assert primary == pytest.approx(expect, abs=1e-5)
    assert alternative == pytest.approx(primary, rel=1e-8)


def test_dual_norm_positivity_and_identity():
    # -<Lambda u, u> is a positive quadratic form and exactly equals the
    # squared staggered H^1_t norm of Lambda u, by discrete summation by parts.
    ch = ChannelConfig.finite(129)
    w = WeightParams(C_low=0.8)
    rng = np.random.default_rng(21)
    for _ in range(30):
        data = rng.standard_normal(129) + 1j * rng.standard_normal(129)
        data[0] = data[-1] = 0.0
        u = ModeField(k=2.0, channel=ch, grid_values=data)
        t = rng.uniform(0.0, 20.0)
        primary, alternative = hm1t_dual_norm(u, t, w)
        assert primary >= 0.0
        assert alternative == pytest.approx(primary, rel=1e-8)


def test_dual_norm_fourier_weight_comparison():
    # The dual norm is equivalent to the weighted spectral sum
    # sum |u_hat|^2 / (1 + (eta/k - t)^2); the fitted upper constant is
    # order one and stable under grid doubling.
    w = WeightParams(C_low=1.0)
    rng = np.random.default_rng(5)
    etas_c = 2.0 * np.pi * np.arange(-16, 17)
    coeffs = rng.standard_normal((40, etas_c.size)) + 1j * rng.standard_normal((40, etas_c.size))
    fitted = {}
    for n in (257, 513):
        ch = ChannelConfig.finite(n)
        eta = eta_frequencies(ch)
        idx = np.searchsorted(eta[np.argsort(eta)], etas_c)
        order = np.argsort(eta)
        ratios = []
        for row in coeffs:
            spec = np.zeros(eta.size, dtype=complex)
            spec[order[idx]] = row
            u = from_spectrum(1.0, ch, spec)
            for t in (0.5, 3.0, 12.0):
                primary, _ = hm1t_dual_norm(u, t, w)
                s = to_spectrum(u)
                fw = np.sqrt(np.sum(np.abs(s) ** 2 / (1.0 + (eta_frequencies(ch) / 1.0 - t) ** 2)))
                ratios.append((primary / fw) ** 2)
        fitted[n] = max(ratios)
    assert 0.1 < fitted[513] < 1.2
    assert abs(fitted[257] - fitted[513]) <= 0.1 * fitted[513]


def test_elliptic_energy_estimate():
    # ||psi||_{H^1_t} <= kappa ||omega||_{H^-1_t} with kappa controlled by
    # the C^1 size of 1/g.
    w = WeightParams(C_low=1.0)
    rng = np.random.default_rng(9)
    for name, params in (("couette", None), ("couette_sin", {"eps": 0.03})):
        ch = ChannelConfig.finite(257)
        pr = build_profile(name, ch, params)
        op = assemble_conjugated_operator(pr, ch, 1.0)
        eta = eta_frequencies(ch)
        kappa = 0.0
        for _ in range(20):
            s = rng.standard_normal(256) + 1j * rng.standard_normal(256)
            s *= np.exp(-np.abs(eta) / (2.0 * np.pi * 8.0))
            u = from_spectrum(1.0, ch, s)
            for t in (0.0, 2.5, 11.0):
                psi = solve_stream(op, u, t)
                primary, _ = hm1t_dual_norm(u, t, w)
                kappa = max(kappa, h1t_staggered_norm(psi, t, w) / primary)
        bound = 1.0 / pr.bilip_lower + pr.g_deriv_sup[1] / pr.bilip_lower**2
        assert kappa <= bound * 1.05


def test_operator_input_validation():
    ch = ChannelConfig.finite(129)
    pr = build_profile("couette", ch)
    with pytest.raises(ValueError):
        assemble_conjugated_operator(pr, ch, 0.0)
    other = ChannelConfig.finite(257)
    with pytest.raises(ProfileError):
        assemble_conjugated_operator(pr, other, 1.0)
    op = assemble_conjugated_operator(pr, ch, 1.0)
    wrong_k = ModeField(k=2.0, channel=ch, grid_values=np.zeros(129, dtype=complex))
    with pytest.raises(ValueError):
        solve_stream(op, wrong_k, 0.0)
    wrong_grid = ModeField(k=1.0, channel=other, grid_values=np.zeros(257, dtype=complex))
    with pytest.raises(ValueError):
        solve_stream(op, wrong_grid, 0.0)
    with pytest.raises(ProfileError):
        lambda_solve(ModeField(k=1.0, channel=ChannelConfig.infinite(64, half_width=4.0),
                               grid_values=np.zeros(64, dtype=complex)), 0.0, WeightParams())
    with pytest.raises(ProfileError):
        neumann_data_fd(ModeField(k=1.0, channel=ChannelConfig.infinite(64, half_width=4.0),
                                  grid_values=np.zeros(64, dtype=complex)))
