"""Dense wall reconstruction and 3D meshing."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import GeometryError
from .interp.natural import arc_length, measured_plane_points, periodic_weights
from .interp.oned import line_through
from .interp.separable import separable_interpolate, spiral_interpolate


def grid_axes(nominal_height, n_theta, z_step):
    """Sample positions of the dense grid.

    Angles are ``360*j/n_theta``.  Heights run from 0 to the nominal height
    inclusive with ``round(H / z_step) + 1`` evenly spaced rows, so the
    realised step is the closest one to ``z_step`` that ends exactly at H.
    """
    theta = 360.0 * np.arange(n_theta) / n_theta
    n_z = max(2, int(round(nominal_height / z_step)) + 1)
    z = np.linspace(0.0, nominal_height, n_z)
    return theta, z


@dataclass(eq=False)
class SurfaceGrid:
    """Unrolled deviation field ``deviations[k, j]`` at ``z[k]``, ``theta[j]`` (mm)."""

    part_id: str
    nominal_radius: float
    theta: np.ndarray
    z: np.ndarray
    deviations: np.ndarray
    extrapolated: np.ndarray  # bool per cell; False means interpolated

    def __post_init__(self):
        shape = (self.z.size, self.theta.size)
        if self.deviations.shape != shape or self.extrapolated.shape != shape:
            raise GeometryError("grid matrices do not match the sample axes")
        if not np.all(np.isfinite(self.deviations)):
            raise GeometryError("grid deviations must be finite")

    @property
    def n_theta(self):
        return self.theta.size

    @property
    def n_z(self):
        return self.z.size

    @property
    def circumference(self):
        return 2.0 * math.pi * self.nominal_radius

    @property
    def arc_step(self):
        return self.circumference / self.n_theta

    @property
    def z_step(self):
        return float(self.z[1] - self.z[0]) if self.n_z > 1 else 0.0

    def provenance(self, k, j):
        return "extrapolated" if self.extrapolated[k, j] else "interpolated"

    def same_geometry(self, other):
        return (self.nominal_radius == other.nominal_radius
                and np.array_equal(self.theta, other.theta)
                and np.array_equal(self.z, other.z))

    def __eq__(self, other):
        if not isinstance(other, SurfaceGrid):
            return NotImplemented
        return (self.part_id == other.part_id and self.same_geometry(other)
                and np.array_equal(self.deviations, other.deviations)
                and np.array_equal(self.extrapolated, other.extrapolated))


def _interpolate(kind, mset, u, v, anchor_heights):
    """Values on the (v x u) block plus the rows at the anchor heights."""
    vv = np.concatenate([v, anchor_heights])
    if kind == "laplace_nn":
        pu, pv, d = measured_plane_points(mset)
        uq = np.tile(u, vv.size)
        vq = np.repeat(vv, u.size)
        w = periodic_weights(pu, pv, mset.circumference, np.column_stack([uq, vq]))
        vals = (w @ d).reshape(vv.size, u.size)
    elif kind == "spiral":
        vals = spiral_interpolate(mset, u, vv)
    else:
        vals = separable_interpolate(kind, mset, u, vv)
    return vals[:v.size], vals[v.size:]


def reconstruct(mset, config):
    """Predict the dense SurfaceGrid of a part from its gauge readings.

    Rows inside the measured height span come from ``config.interpolator``.
    Rows below (above) it continue each angular column along the line
    through the interpolated values at the two lowest (highest) measured
    heights.

    Engines work on residuals from one reference reading, which keeps a
    constant field exact instead of exposing rounding in the weights.
    """
    theta, z = grid_axes(mset.nominal_height, config.n_theta, config.z_step)
    u = arc_length(theta, mset.nominal_diameter)
    h = mset.heights
    lo, hi = h[0], h[-1]
    below = z < lo
    above = z > hi
    inside = ~(below | above)
    anchors = np.array([h[0], h[1], h[-2], h[-1]]) if (below.any() or above.any()) \
        else np.empty(0)
    ref = float(mset.deviations[np.isfinite(mset.deviations)][0])
    resid = replace(mset, deviations=mset.deviations - ref)
    body, ends = _interpolate(config.interpolator, resid, u, z[inside], anchors)

    dev = np.empty((z.size, theta.size))
    dev[inside] = body
    if below.any():
        dev[below] = line_through(h[0], ends[0], h[1], ends[1], z[below, None])
    if above.any():
        dev[above] = line_through(h[-2], ends[2], h[-1], ends[3], z[above, None])
    dev += ref
    extrap = np.broadcast_to((below | above)[:, None], dev.shape).copy()
    return SurfaceGrid(mset.part_id, mset.nominal_radius, theta, z, dev, extrap)


@dataclass
class Mesh:
    vertices: np.ndarray  # (n_z * n_theta, 3)
    faces: np.ndarray  # (n_theta * (n_z - 1), 4), zero-based, outward winding
    lattice: tuple | None = None  # (n_theta, n_z) when faces are lattice_faces()


def lattice_faces(n_theta, n_z):
    """Quad faces over a lattice closed in theta and open in z."""
    j = np.arange(n_theta)
    jn = (j + 1) % n_theta
    k = np.arange(n_z - 1)[:, None]
    faces = np.stack([k * n_theta + j, k * n_theta + jn,
                      (k + 1) * n_theta + jn, (k + 1) * n_theta + j], axis=-1)
    return faces.reshape(-1, 4)


def to_mesh(grid, scale=1.0):
    """Cylindrical mesh with radii ``nominal_radius + scale * deviation``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    if grid.n_theta < 3 or grid.n_z < 2:
        raise GeometryError("mesh needs at least 3 angles and 2 heights")
    r = grid.nominal_radius + scale * grid.deviations
    if np.any(r <= 0):
        raise GeometryError("deviation scale too large: mesh radius would be non-positive")
    t = np.radians(grid.theta)
    x = r * np.cos(t)
    y = r * np.sin(t)
    zz = np.broadcast_to(grid.z[:, None], r.shape)
    vertices = np.column_stack([x.ravel(), y.ravel(), zz.ravel()])
    return Mesh(vertices, lattice_faces(grid.n_theta, grid.n_z), (grid.n_theta, grid.n_z))
