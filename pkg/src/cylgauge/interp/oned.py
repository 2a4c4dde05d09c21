"""One-dimensional comparator interpolants and the linear axial extrapolation.

``spline_1d_c2`` and ``pchip_1d`` are the curve fits the natural-neighbour
engine is compared against; ``spiral_fit`` is the r(phi) model that cannot
follow local anomalies.
"""

from __future__ import annotations

import numpy as np

from ..errors import GeometryError, OutOfDomainError


def _knots(knots, minimum):
    k = np.asarray(knots, dtype=float)
    if k.ndim != 2 or k.shape[1] != 2:
        raise ValueError("knots must be (x, y) pairs")
    if len(k) < minimum:
        raise ValueError(f"need at least {minimum} knots")
    x, y = k[:, 0], k[:, 1]
    dx = np.diff(x)
    if np.any(dx == 0):
        raise ValueError("duplicate knot x")
    if np.any(dx < 0):
        raise ValueError("knot x must be strictly increasing")
    return x, y


def _locate(x, queries, period=None):
    q = np.asarray(queries, dtype=float)
    if period is None:
        if q.size and (q.min() < x[0] or q.max() > x[-1]):
            raise OutOfDomainError(f"query outside knot span [{x[0]:g}, {x[-1]:g}]")
    else:
        q = x[0] + np.mod(q - x[0], period)
    i = np.clip(np.searchsorted(x, q, side="right") - 1, 0, len(x) - 2)
    return q, i


def _hermite(x, y, m, q, i):
    h = x[i + 1] - x[i]
    t = (q - x[i]) / h
    t2 = t * t
    t3 = t2 * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1]


def _solve_tridiagonal(sub, diag, sup, rhs):
    """Thomas algorithm; sub[0] and sup[-1] are ignored."""
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    c[0] = sup[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for k in range(1, n):
        den = diag[k] - sub[k] * c[k - 1]
        c[k] = sup[k] / den if k < n - 1 else 0.0
        d[k] = (rhs[k] - sub[k] * d[k - 1]) / den
    out = np.empty(n)
    out[-1] = d[-1]
    for k in range(n - 2, -1, -1):
        out[k] = d[k] - c[k] * out[k + 1]
    return out


def spline_second_derivatives(x, y, bc="natural", period=None):
    """Knot second derivatives of the C2 cubic spline through (x, y).

    ``bc="natural"`` pins the end second derivatives to zero.  With
    ``bc="periodic"`` the knots cover one period (``x[-1] < x[0] + period``)
    and the curve closes smoothly onto itself.
    """
    n = len(x)
    if bc == "natural":
        if n == 2:
            return np.zeros(2)
        h = np.diff(x)
        s = np.diff(y) / h
        sub = np.r_[0.0, h[1:-1]]
        diag = 2.0 * (h[:-1] + h[1:])
        sup = np.r_[h[1:-1], 0.0]
        rhs = 6.0 * np.diff(s)
        return np.r_[0.0, _solve_tridiagonal(sub, diag, sup, rhs), 0.0]
    if bc == "periodic":
        xx = np.r_[x, x[0] + period]
        h = np.diff(xx)
        s = np.diff(np.r_[y, y[0]]) / h
        # cyclic system: row k couples M[k-1], M[k], M[k+1] (indices mod n)
        a = np.zeros((n, n))
        hp = np.roll(h, 1)  # interval ending at knot k
        idx = np.arange(n)
        a[idx, idx] = 2.0 * (hp + h)
        a[idx, (idx - 1) % n] += hp
        a[idx, (idx + 1) % n] += h
        rhs = 6.0 * (s - np.roll(s, 1))
        return np.linalg.solve(a, rhs)
    raise ValueError(f"unknown boundary condition {bc!r}")


def spline_1d_c2(knots, queries, bc="natural", period=None):
    """Evaluate the C2 cubic spline through ``knots`` at ``queries``.

    On interval i the curve is ``a_i + b_i t + c_i t**2 + d_i t**3`` with
    ``t = x - x_i``; second derivatives are continuous at interior knots.
    """
    x, y = _knots(knots, 2 if bc == "natural" else 3)
    if bc == "periodic":
        if period is None or not x[-1] < x[0] + period:
            raise ValueError("periodic spline needs period > knot span")
    m2 = spline_second_derivatives(x, y, bc, period)
    if bc == "periodic":
        x = np.r_[x, x[0] + period]
        y = np.r_[y, y[0]]
        m2 = np.r_[m2, m2[0]]
    q, i = _locate(x, queries, period if bc == "periodic" else None)
    h = x[i + 1] - x[i]
    t = q - x[i]
    a = y[i]
    b = (y[i + 1] - y[i]) / h - h * (2.0 * m2[i] + m2[i + 1]) / 6.0
    c = m2[i] / 2.0
    d = (m2[i + 1] - m2[i]) / (6.0 * h)
    return a + t * (b + t * (c + t * d))


def pchip_slopes(x, y):
    """Knot slopes for the monotone piecewise cubic Hermite interpolant.

    Interior slopes start as the mean of adjacent secants (zero where the
    secants disagree in sign), ends use the shape-preserving three-point
    formula, then each interval is limited so ``alpha**2 + beta**2 <= 9``
    (Fritsch-Carlson).
    """
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    m = np.empty(n)
    if n == 2:
        m[:] = delta[0]
        return m
    m[1:-1] = 0.5 * (delta[:-1] + delta[1:])
    m[1:-1][np.sign(delta[:-1]) != np.sign(delta[1:])] = 0.0
    m[1:-1][(delta[:-1] == 0) | (delta[1:] == 0)] = 0.0
    m[0] = _end_slope(h[0], h[1], delta[0], delta[1])
    m[-1] = _end_slope(h[-1], h[-2], delta[-1], delta[-2])
    for k in range(n - 1):
        if delta[k] == 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        alpha = m[k] / delta[k]
        beta = m[k + 1] / delta[k]
        radius = np.hypot(alpha, beta)
        if radius > 3.0:
            tau = 3.0 / radius
            m[k] = tau * alpha * delta[k]
            m[k + 1] = tau * beta * delta[k]
    return m


def _end_slope(h0, h1, d0, d1):
    m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(m) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(m) > abs(3.0 * d0):
        return 3.0 * d0
    return m


def pchip_1d(knots, queries):
    """Evaluate the monotone (C1) piecewise cubic Hermite interpolant."""
    x, y = _knots(knots, 2)
    m = pchip_slopes(x, y)
    q, i = _locate(x, queries)
    return _hermite(x, y, m, q, i)


def spiral_fit(ring):
    """Least-squares fit of ``r(phi) = a + b*phi`` to (phi [rad], r [mm]) pairs.

    Returns ``(a, b, residuals)``.  A circle gives ``b == 0``.
    """
    pts = np.asarray(ring, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("spiral fit needs at least 3 points")
    phi, r = pts[:, 0], pts[:, 1]
    if np.unique(phi).size != phi.size:
        raise ValueError("spiral fit needs distinct angles")
    design = np.column_stack([np.ones_like(phi), phi])
    (a, b), *_ = np.linalg.lstsq(design, r, rcond=None)
    return float(a), float(b), r - (a + b * phi)


def extrapolate_linear(column_values, target_v):
    """Continue a column linearly beyond its measured height span.

    Below the span the two lowest heights define the line, above it the two
    highest.
    """
    pts = np.asarray(column_values, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("column values must be (v, d) pairs")
    order = np.argsort(pts[:, 0], kind="stable")
    v, d = pts[order, 0], pts[order, 1]
    v, first = np.unique(v, return_index=True)
    d = d[first]
    if v.size < 2:
        raise GeometryError("linear extrapolation needs at least 2 distinct heights")
    if v[0] <= target_v <= v[-1]:
        raise ValueError(f"target height {target_v:g} lies inside the measured span")
    if target_v < v[0]:
        (v0, v1), (d0, d1) = v[:2], d[:2]
    else:
        (v0, v1), (d0, d1) = v[-2:], d[-2:]
    return line_through(v0, d0, v1, d1, target_v)


def line_through(v0, d0, v1, d1, v):
    """Value at ``v`` of the line through (v0, d0) and (v1, d1); broadcasts."""
    return d0 + (d1 - d0) * ((v - v0) / (v1 - v0))
