"""Finite-difference weights on arbitrary nodes (Fornberg recursion) and one-sided edge derivatives."""

import numpy as np


def fd_weights(x0, x, m):
    """Weights w such that sum(w * f(x)) approximates the m-th derivative of f at x0.

    Exact for polynomials of degree len(x) - 1, so the truncation error is
    O(h^(len(x) - m)) on smooth data with node spacing h.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if m < 0:
        raise ValueError(f"derivative order must be nonnegative, got {m}")
    if m >= n:
        raise ValueError(f"need at least {m + 1} nodes for derivative order {m}, got {n}")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    orders = np.arange(1, m + 1)
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                c[i, 1:mn + 1] = c1 * (orders[:mn] * c[i - 1, 0:mn] - c5 * c[i - 1, 1:mn + 1]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            c[j, 1:mn + 1] = (c4 * c[j, 1:mn + 1] - orders[:mn] * c[j, 0:mn]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def edge_derivative(values, h, order, npoints, side):
    """One-sided estimate of the order-th derivative at one end of uniformly spaced samples.

    side is "left" (first npoints samples) or "right" (last npoints). Accuracy
    O(h^(npoints - order)).
    """
    values = np.asarray(values)
    if npoints > values.size:
        raise ValueError(f"stencil needs {npoints} samples, array has {values.size}")
    w = fd_weights(0.0, np.arange(npoints, dtype=float), order) / h ** order
    if side == "left":
        return (w * values[:npoints]).sum()
    if side == "right":
        # reversed coordinate flips odd derivatives
        return (-1.0) ** order * (w * values[-npoints:][::-1]).sum()
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")
