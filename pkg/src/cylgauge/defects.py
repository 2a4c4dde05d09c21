"""Dent/bump segmentation and corrugation measurement on a reconstructed grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class DefectRegion:
    kind: str  # "dent" or "bump"
    cells: tuple  # ((k, j), ...) grid indices, sorted
    extent_theta: float  # mm of arc
    extent_z: float  # mm
    peak_deviation: float  # mm, signed
    centroid: tuple  # (theta deg, z mm)

    def to_dict(self, fmt=float):
        return {
            "kind": self.kind,
            "peak_mm": fmt(self.peak_deviation),
            "extent_theta_mm": fmt(self.extent_theta),
            "extent_z_mm": fmt(self.extent_z),
            "centroid_theta_deg": fmt(self.centroid[0]),
            "centroid_z_mm": fmt(self.centroid[1]),
        }


@dataclass(frozen=True)
class CorrugationIndex:
    amplitude: float  # mm
    dominant_period: float  # mm of arc; 0 when the filtered profile is flat

    def to_dict(self, fmt=float):
        return {"amplitude_mm": fmt(self.amplitude), "period_mm": fmt(self.dominant_period)}


def label_wrapped(mask):
    """4-connected component labels with the theta axis (columns) closed on itself."""
    labels, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if n == 0 or mask.shape[1] < 2:
        return labels, n
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    seam = (labels[:, 0] > 0) & (labels[:, -1] > 0)
    for a, b in zip(labels[seam, 0], labels[seam, -1]):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n + 1)])
    uniq, relabel = np.unique(roots, return_inverse=True)
    # root 0 is background and stays 0
    return relabel[labels], uniq.size - 1


def _column_span(cols, n_theta):
    """Number of columns covered by the shortest arc containing all ``cols``,
    and the first column of that arc."""
    c = np.unique(cols)
    if c.size == n_theta:
        return n_theta, 0
    gaps = np.diff(np.r_[c, c[0] + n_theta])
    g = int(np.argmax(gaps))
    start = c[(g + 1) % c.size]
    return n_theta - int(gaps[g]) + 1, int(start)


def _region(kind, k_idx, j_idx, grid):
    n = grid.n_theta
    values = grid.deviations[k_idx, j_idx]
    span_cols, start = _column_span(j_idx, n)
    unwrapped = (j_idx - start) % n + start
    rows = np.unique(k_idx)
    order = np.lexsort((j_idx, k_idx))
    peak = float(values.min() if kind == "dent" else values.max())
    theta_c = (float(np.mean(unwrapped)) * 360.0 / n) % 360.0
    return DefectRegion(
        kind=kind,
        cells=tuple(zip(k_idx[order].tolist(), j_idx[order].tolist())),
        extent_theta=span_cols * grid.arc_step,
        extent_z=(rows[-1] - rows[0] + 1) * grid.z_step,
        peak_deviation=peak,
        centroid=(theta_c, float(np.mean(grid.z[k_idx]))),
    )


def detect_defects(grid, depth_threshold):
    """Connected regions with deviation <= -threshold (dents) or >= +threshold (bumps).

    Extents are bounding boxes counted in whole cells (arc pitch x height
    pitch), so a single-cell region still has a positive size.  Regions are
    returned largest ``|peak_deviation|`` first.
    """
    if not depth_threshold > 0:
        raise ValueError("depth_threshold must be positive")
    regions = []
    for kind, mask in (("dent", grid.deviations <= -depth_threshold),
                       ("bump", grid.deviations >= depth_threshold)):
        labels, count = label_wrapped(mask)
        if count == 0:
            continue
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(1, count + 2))
        for lab in range(count):
            cells = order[bounds[lab]:bounds[lab + 1]]
            k_idx, j_idx = np.divmod(cells, grid.n_theta)
            regions.append(_region(kind, k_idx, j_idx, grid))
    regions.sort(key=lambda r: (-abs(r.peak_deviation), r.kind, r.centroid[1], r.centroid[0]))
    return regions


def circular_moving_average(profile, window):
    """Centred moving average over ``window`` samples (odd) with wraparound."""
    n = profile.shape[-1]
    half = window // 2
    padded = np.concatenate([profile[..., n - half:], profile, profile[..., :half]], axis=-1)
    csum = np.cumsum(np.concatenate([np.zeros(profile.shape[:-1] + (1,)), padded], axis=-1), axis=-1)
    return (csum[..., window:] - csum[..., :-window]) / window


def corrugation_window(n_theta, fraction=1.0 / 8.0):
    """Odd sample count closest to ``fraction`` of the circumference."""
    m = max(1, int(round(n_theta * fraction)))
    return m if m % 2 else m + 1


def corrugation_index(grid, window_fraction=1.0 / 8.0):
    """Short-period angular waviness of the wall.

    Each height's angular profile is high-passed by subtracting its circular
    moving average over ``window_fraction`` of the circumference.  The
    amplitude is the mean over heights of the filtered peak-to-valley; the
    dominant period comes from the strongest nonzero harmonic of the
    height-averaged filtered profile.
    """
    if grid.n_theta < 64:
        raise ValueError("corrugation analysis needs n_theta >= 64")
    d = grid.deviations
    window = corrugation_window(grid.n_theta, window_fraction)
    filtered = d - circular_moving_average(d, window)
    amplitude = float(np.mean(filtered.max(axis=1) - filtered.min(axis=1)))
    spectrum = np.abs(np.fft.rfft(filtered.mean(axis=0)))[1:]
    if spectrum.size == 0 or spectrum.max() <= 1e-12 * grid.n_theta:
        period = 0.0
    else:
        harmonic = int(np.argmax(spectrum)) + 1
        period = grid.circumference / harmonic
    return CorrugationIndex(amplitude, float(period))

