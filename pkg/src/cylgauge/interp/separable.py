"""Grid interpolation with the 1D comparators: angular pass, then axial pass."""

from __future__ import annotations

import numpy as np

from .natural import arc_length, guard_band, periodic_embed_arrays
from .oned import line_through, pchip_1d, spiral_fit, spline_1d_c2


def _angular_pass(kind, u_knots, d_knots, circumference, u_query):
    if kind == "cubic_spline":
        return spline_1d_c2(np.column_stack([u_knots, d_knots]), u_query,
                            bc="periodic", period=circumference)
    # pchip is local, so guard copies make the seam behave like any other knot
    eu, _, ed, _ = periodic_embed_arrays(u_knots, np.zeros_like(u_knots), d_knots, circumference,
                                         guard_band(u_knots, circumference))
    order = np.argsort(eu, kind="stable")
    return pchip_1d(np.column_stack([eu[order], ed[order]]), u_query)


def _axial_pass(kind, heights, rows, v_query):
    if kind == "cubic_spline":
        # the spline is linear in its ordinates: build the basis once
        basis = np.empty((len(v_query), len(heights)))
        for k in range(len(heights)):
            unit = np.zeros(len(heights))
            unit[k] = 1.0
            basis[:, k] = spline_1d_c2(np.column_stack([heights, unit]), v_query)
        return basis @ rows
    out = np.empty((len(v_query), rows.shape[1]))
    for j in range(rows.shape[1]):
        out[:, j] = pchip_1d(np.column_stack([heights, rows[:, j]]), v_query)
    return out


def separable_interpolate(kind, mset, grid_u, grid_v):
    """Deviation matrix (len(grid_v), len(grid_u)) from per-height then per-column 1D passes.

    ``kind`` is ``"cubic_spline"`` (periodic C2 in angle, natural C2 in
    height) or ``"pchip"``.  Angular rows use only the readings present.
    """
    if kind not in ("cubic_spline", "pchip"):
        raise ValueError(f"separable interpolation does not support {kind!r}")
    grid_u = np.mod(np.asarray(grid_u, dtype=float), mset.circumference)
    grid_v = np.asarray(grid_v, dtype=float)
    rows = np.empty((mset.heights.size, grid_u.size))
    for k in range(mset.heights.size):
        angles, dev = mset.row(k)
        rows[k] = _angular_pass(kind, arc_length(angles, mset.nominal_diameter), dev,
                                mset.circumference, grid_u)
    return _axial_pass(kind, mset.heights, rows, grid_v)


def spiral_interpolate(mset, grid_u, grid_v):
    """Per-height ``r = a + b*phi`` fits, joined linearly between heights.

    A least-squares comparator: it does not pass through the readings.
    """
    grid_u = np.mod(np.asarray(grid_u, dtype=float), mset.circumference)
    grid_v = np.asarray(grid_v, dtype=float)
    radius = mset.nominal_radius
    phi_query = grid_u / radius
    rows = np.empty((mset.heights.size, grid_u.size))
    for k in range(mset.heights.size):
        angles, dev = mset.row(k)
        a, b, _ = spiral_fit(np.column_stack([np.radians(angles), radius + dev]))
        rows[k] = a + b * phi_query - radius
    h = mset.heights
    idx = np.clip(np.searchsorted(h, grid_v, side="right") - 1, 0, h.size - 2)
    return line_through(h[idx, None], rows[idx], h[idx + 1, None], rows[idx + 1], grid_v[:, None])
