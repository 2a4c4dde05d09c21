"""Laplace (non-Sibsonian) natural-neighbour interpolation on the unrolled wall.

The query point is conceptually inserted into the Delaunay triangulation of
the sites.  Its natural neighbours are the vertices of the Bowyer-Watson
cavity (triangles whose circumcircle contains the query), and the weight of
neighbour ``i`` is ``l_i / h_i`` normalised to one, with ``l_i`` the length
of the Voronoi facet shared by the query cell and site ``i`` and ``h_i`` the
query-site distance.

For the new triangle ``(x, a, b)`` built on a cavity boundary edge, the
facet dual to edge ``x-a`` has length ``h_a (cot A_b + cot A_b') / 2`` where
``A_b`` is the angle at ``b``.  Summing half-cotangents over the boundary
edges therefore gives ``l_i / h_i`` without ever constructing the Voronoi
polygon, and the whole computation vectorises over queries.  Signed
cotangents make the sum additive over triangles, so a triangle whose
circumcircle passes (numerically) through the query contributes nothing
whichever way the in-circle test falls; this is what makes cocircular
gauge lattices safe without a special predicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay, QhullError, cKDTree

from ..errors import GeometryError, OutOfDomainError

COINCIDENCE_TOL = 1e-9  # mm
_HULL_EDGE_TOL = 1e-12  # relative twice-area below which a query sits on a hull edge
_BUCKET_TARGET = 1.0  # average circumdisk bboxes per bucket cell


@dataclass(frozen=True)
class PlanePoint:
    u: float
    v: float
    value: float


@dataclass(frozen=True)
class LaplaceWeights:
    neighbors: tuple
    weights: tuple

    def as_dict(self):
        return dict(zip(self.neighbors, self.weights))


def arc_length(angle_deg, diameter):
    """Unrolled abscissa (mm) of an angle on a cylinder of the given diameter."""
    return np.asarray(angle_deg, dtype=float) * (math.pi * diameter / 360.0)


def periodic_embed(points, circumference, band=None):
    """Replicate points by one period so the seam at u=0 is interior.

    The returned list holds the originals followed by copies shifted by
    ``+circumference`` (those landing in ``[C, C + band)``) and by
    ``-circumference`` (those landing in ``[-band, 0)``).  ``band``
    defaults to half the circumference.
    """
    u = np.array([p.u for p in points], dtype=float)
    v = np.array([p.v for p in points], dtype=float)
    d = np.array([p.value for p in points], dtype=float)
    eu, ev, ed, _ = periodic_embed_arrays(u, v, d, circumference, band)
    return [PlanePoint(float(a), float(b), float(c)) for a, b, c in zip(eu, ev, ed)]


def periodic_embed_arrays(u, v, values, circumference, band=None):
    """Array form of :func:`periodic_embed`; also returns each copy's source index."""
    if not circumference > 0:
        raise ValueError("circumference must be positive")
    if band is None:
        band = 0.5 * circumference
    u = np.asarray(u, dtype=float)
    idx = np.arange(u.size)
    up = u + circumference
    dn = u - circumference
    keep_up = up < circumference + band
    keep_dn = dn >= -band
    src = np.concatenate([idx, idx[keep_up], idx[keep_dn]])
    eu = np.concatenate([u, up[keep_up], dn[keep_dn]])
    return eu, np.asarray(v, dtype=float)[src], np.asarray(values, dtype=float)[src], src


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


class LaplaceInterpolator:
    """Natural-neighbour (Laplace) weights for many queries against fixed sites.

    Parameters
    ----------
    sites : array_like, shape (n, 2)
        Site coordinates; at least 3, not all collinear, no duplicates
        closer than the coincidence tolerance.
    """

    def __init__(self, sites):
        sites = np.ascontiguousarray(sites, dtype=float)
        if sites.ndim != 2 or sites.shape[1] != 2 or len(sites) < 3:
            raise GeometryError("need at least 3 two-dimensional sites")
        if not np.all(np.isfinite(sites)):
            raise GeometryError("site coordinates must be finite")
        centred = sites - sites.mean(axis=0)
        span = np.abs(centred).max()
        if span == 0 or np.linalg.svd(centred / span, compute_uv=False)[1] < 1e-12:
            raise GeometryError("all sites are collinear")
        try:
            self._tri = Delaunay(sites)
        except QhullError as exc:
            raise GeometryError(f"triangulation failed: {exc}") from None
        self.sites = sites
        self._kdtree = cKDTree(sites)

        simp = self._tri.simplices.copy()
        nbr = self._tri.neighbors.copy()
        p = sites[simp]
        area2 = _cross(p[:, 1, 0] - p[:, 0, 0], p[:, 1, 1] - p[:, 0, 1],
                       p[:, 2, 0] - p[:, 0, 0], p[:, 2, 1] - p[:, 0, 1])
        flip = area2 < 0
        simp[flip] = simp[flip][:, [0, 2, 1]]
        nbr[flip] = nbr[flip][:, [0, 2, 1]]
        self._simplices = simp
        self._neighbors = nbr
        self._centres, self._r2 = self._circumcircles(sites[simp])
        self._build_buckets()

    @staticmethod
    def _circumcircles(p):
        ax, ay = p[:, 0, 0], p[:, 0, 1]
        bx, by = p[:, 1, 0] - ax, p[:, 1, 1] - ay
        cx, cy = p[:, 2, 0] - ax, p[:, 2, 1] - ay
        d = 2.0 * _cross(bx, by, cx, cy)
        b2 = bx * bx + by * by
        c2 = cx * cx + cy * cy
        ox = (cy * b2 - by * c2) / d
        oy = (bx * c2 - cx * b2) / d
        return np.column_stack([ax + ox, ay + oy]), ox * ox + oy * oy

    def _build_buckets(self):
        lo = self.sites.min(axis=0)
        hi = self.sites.max(axis=0)
        extent = np.maximum(hi - lo, 1e-12)
        ntri = len(self._simplices)
        n_cells = max(1, int(ntri / _BUCKET_TARGET))
        aspect = extent[0] / extent[1]
        nx = int(np.clip(round(math.sqrt(n_cells * aspect)), 1, 4096))
        ny = int(np.clip(round(n_cells / nx), 1, 4096))
        self._grid_lo = lo
        self._grid_shape = (nx, ny)
        self._cell = extent / np.array([nx, ny])

        r = np.sqrt(self._r2) * (1 + 1e-9) + 1e-12
        bmin = np.floor((np.maximum(self._centres - r[:, None], lo) - lo) / self._cell).astype(np.int64)
        bmax = np.floor((np.minimum(self._centres + r[:, None], hi) - lo) / self._cell).astype(np.int64)
        bmin = np.clip(bmin, 0, [nx - 1, ny - 1])
        bmax = np.clip(bmax, 0, [nx - 1, ny - 1])
        wx = bmax[:, 0] - bmin[:, 0] + 1
        wy = bmax[:, 1] - bmin[:, 1] + 1
        count = wx * wy
        tri_rep = np.repeat(np.arange(ntri), count)
        offs = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
        ix = bmin[tri_rep, 0] + offs % wx[tri_rep]
        iy = bmin[tri_rep, 1] + offs // wx[tri_rep]
        cell = ix * ny + iy
        order = np.lexsort((tri_rep, cell))
        self._bucket_tris = tri_rep[order]
        self._bucket_ptr = np.searchsorted(cell[order], np.arange(nx * ny + 1))

    def _bucket_of(self, q):
        nx, ny = self._grid_shape
        ij = np.floor((q - self._grid_lo) / self._cell).astype(np.int64)
        ij[:, 0] = np.clip(ij[:, 0], 0, nx - 1)
        ij[:, 1] = np.clip(ij[:, 1], 0, ny - 1)
        return ij[:, 0] * ny + ij[:, 1]

    def _in_cavity(self, qx, qy, tri):
        c = self._centres[tri]
        dx = qx - c[:, 0]
        dy = qy - c[:, 1]
        return dx * dx + dy * dy < self._r2[tri]

    def weights(self, queries):
        """Sparse weight matrix, shape (n_queries, n_sites), rows summing to one.

        Raises OutOfDomainError if any query lies outside the convex hull.
        """
        q = np.ascontiguousarray(queries, dtype=float).reshape(-1, 2)
        nq = len(q)
        ns = len(self.sites)
        if nq == 0:
            return sparse.csr_matrix((0, ns))
        if not np.all(np.isfinite(q)):
            raise OutOfDomainError("query coordinates must be finite")
        outside = self._tri.find_simplex(q) < 0
        if np.any(outside):
            first = q[np.flatnonzero(outside)[0]]
            raise OutOfDomainError(
                f"query ({first[0]:.6g}, {first[1]:.6g}) lies outside the convex hull of the sites")

        dist, nearest = self._kdtree.query(q)
        coincident = dist < COINCIDENCE_TOL

        # candidate (query, triangle) pairs from the circumdisk buckets
        cell = self._bucket_of(q)
        counts = self._bucket_ptr[cell + 1] - self._bucket_ptr[cell]
        pair_q = np.repeat(np.arange(nq), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        pair_t = self._bucket_tris[self._bucket_ptr[cell][pair_q] + offs]
        inside = self._in_cavity(q[pair_q, 0], q[pair_q, 1], pair_t) & ~coincident[pair_q]
        pair_q = pair_q[inside]
        pair_t = pair_t[inside]

        rows, cols, vals = [], [], []
        hull_q, hull_a, hull_b, hull_t = [], [], [], []
        for k in range(3):
            a = self._simplices[pair_t, (k + 1) % 3]
            b = self._simplices[pair_t, (k + 2) % 3]
            nb = self._neighbors[pair_t, k]
            hull = nb < 0
            boundary = hull.copy()
            interior = ~hull
            boundary[interior] = ~self._in_cavity(
                q[pair_q[interior], 0], q[pair_q[interior], 1], nb[interior])
            qi = pair_q[boundary]
            a = a[boundary]
            b = b[boundary]
            hull = hull[boundary]
            x = q[qi]
            pa = self.sites[a]
            pb = self.sites[b]
            abx, aby = pb[:, 0] - pa[:, 0], pb[:, 1] - pa[:, 1]
            axx, axy = x[:, 0] - pa[:, 0], x[:, 1] - pa[:, 1]
            bxx, bxy = x[:, 0] - pb[:, 0], x[:, 1] - pb[:, 1]
            area2 = _cross(abx, aby, axx, axy)
            len2 = abx * abx + aby * aby
            flat = hull & (area2 <= _HULL_EDGE_TOL * len2)
            if np.any(flat):
                t = (axx[flat] * abx[flat] + axy[flat] * aby[flat]) / len2[flat]
                hull_q.append(qi[flat])
                hull_a.append(a[flat])
                hull_b.append(b[flat])
                hull_t.append(np.clip(t, 0.0, 1.0))
            ok = ~flat
            # cot of the angle at b feeds a's weight and vice versa
            cot_b = -(bxx[ok] * abx[ok] + bxy[ok] * aby[ok]) / area2[ok]
            cot_a = (axx[ok] * abx[ok] + axy[ok] * aby[ok]) / area2[ok]
            rows += [qi[ok], qi[ok]]
            cols += [a[ok], b[ok]]
            vals += [cot_b, cot_a]

        vals = np.concatenate(vals)
        if not np.all(np.isfinite(vals)):
            raise GeometryError("degenerate natural-neighbour configuration")
        w = sparse.csr_matrix((vals, (np.concatenate(rows), np.concatenate(cols))), shape=(nq, ns))
        w.sum_duplicates()
        # facet lengths are non-negative; clip round-off
        np.maximum(w.data, 0.0, out=w.data)

        # Exact replacements: coincident queries take the site value, queries
        # on a hull edge reduce to linear interpolation along that edge.
        rep_q = [np.flatnonzero(coincident)]
        rep_c = [nearest[rep_q[0]]]
        rep_v = [np.ones(rep_q[0].size)]
        if hull_q:
            hq = np.concatenate(hull_q)
            ha, hb, ht = (np.concatenate(x) for x in (hull_a, hull_b, hull_t))
            _, first = np.unique(hq, return_index=True)
            first = first[~coincident[hq[first]]]
            hq, ha, hb, ht = hq[first], ha[first], hb[first], ht[first]
            rep_q += [hq, hq]
            rep_c += [ha, hb]
            rep_v += [1.0 - ht, ht]
        rep_q = np.concatenate(rep_q)
        if rep_q.size:
            mask = np.ones(nq)
            mask[rep_q] = 0.0
            w = sparse.diags(mask) @ w + sparse.csr_matrix(
                (np.concatenate(rep_v), (rep_q, np.concatenate(rep_c))), shape=(nq, ns))
        w = w.tocsr()
        w.eliminate_zeros()
        total = np.asarray(w.sum(axis=1)).ravel()
        if np.any(total <= 0):
            bad = q[np.flatnonzero(total <= 0)[0]]
            raise GeometryError(f"no natural neighbours found for query ({bad[0]:.6g}, {bad[1]:.6g})")
        w = sparse.diags(1.0 / total) @ w
        return w.tocsr()

    def interpolate(self, queries, values):
        return self.weights(queries) @ np.asarray(values, dtype=float)


def laplace_weights(query, sites):
    """Laplace natural-neighbour coordinates of one query with respect to ``sites``.

    ``sites`` may be PlanePoints or (u, v) pairs.  Returns LaplaceWeights with
    neighbour indices in ascending order.
    """
    coords = np.array([(s.u, s.v) if isinstance(s, PlanePoint) else tuple(s) for s in sites],
                      dtype=float)
    w = LaplaceInterpolator(coords).weights(np.asarray(query, dtype=float).reshape(1, 2))
    row = w.getrow(0).tocoo()
    order = np.argsort(row.col)
    return LaplaceWeights(tuple(int(i) for i in row.col[order]),
                          tuple(float(x) for x in row.data[order]))


def measured_plane_points(mset):
    """(u, v, value) arrays of the readings present in a MeasurementSet."""
    k, j = np.nonzero(~np.isnan(mset.deviations))
    u = arc_length(mset.angles, mset.nominal_diameter)[j]
    return u, mset.heights[k], mset.deviations[k, j]


def guard_band(u, circumference):
    """Guard band wide enough for abscissae ``u``: half a turn plus the widest gap.

    With readings clustered on part of the circumference, half a turn of
    copies would leave the wrap-around gap outside the triangulated hull.
    """
    s = np.unique(np.mod(u, circumference))
    gap = np.max(np.diff(np.r_[s, s[0] + circumference])) if s.size else circumference
    return 0.5 * circumference + float(gap)


_WEIGHT_CACHE = {}
_WEIGHT_CACHE_SIZE = 4


def periodic_weights(u, v, circumference, queries):
    """Weights mapping the original points (u, v) to ``queries`` on the periodic wall.

    The weight matrix depends only on geometry, so it is memoised: a lot of
    parts gauged on the same lattice triangulates once per process.
    """
    u = np.ascontiguousarray(u, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    q = np.ascontiguousarray(queries, dtype=float).reshape(-1, 2)
    key = (u.tobytes(), v.tobytes(), float(circumference), q.tobytes())
    hit = _WEIGHT_CACHE.get(key)
    if hit is not None:
        return hit
    eu, ev, _, src = periodic_embed_arrays(u, v, np.zeros(u.size), circumference,
                                          guard_band(u, circumference))
    w = LaplaceInterpolator(np.column_stack([eu, ev])).weights(q)
    fold = sparse.csr_matrix((np.ones(src.size), (np.arange(src.size), src)),
                             shape=(src.size, u.size))
    w = (w @ fold).tocsr()
    w.sort_indices()
    if len(_WEIGHT_CACHE) >= _WEIGHT_CACHE_SIZE:
        _WEIGHT_CACHE.pop(next(iter(_WEIGHT_CACHE)))
    _WEIGHT_CACHE[key] = w
    return w


def nn_interpolate(mset, targets):
    """Laplace natural-neighbour deviations of ``mset`` at (u, v) targets.

    ``u`` is the unrolled abscissa in mm (any real value; it is wrapped onto
    one circumference) and ``v`` must lie within the measured height span.
    """
    t = np.asarray(targets, dtype=float).reshape(-1, 2).copy()
    circ = mset.circumference
    t[:, 0] = np.mod(t[:, 0], circ)
    lo, hi = mset.heights[0], mset.heights[-1]
    if t.size and (t[:, 1].min() < lo or t[:, 1].max() > hi):
        raise OutOfDomainError(f"target height outside measured span [{lo:g}, {hi:g}]")
    u, v, d = measured_plane_points(mset)
    return periodic_weights(u, v, circ, t) @ d
