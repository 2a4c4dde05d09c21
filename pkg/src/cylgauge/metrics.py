"""Surface-quality statistics: circularity, RMS roughness and skewness.

Moments use the population (divide-by-n) convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeasurementError

SKEW_SIGMA_FLOOR = 1e-12  # mm; below this the field counts as constant


def _values(values):
    d = np.asarray(values, dtype=float).ravel()
    return d[~np.isnan(d)]


def rms(values):
    """Root mean square of the deviations."""
    d = _values(values)
    if d.size == 0:
        raise ValueError("rms of an empty set")
    return float(np.sqrt(np.mean(d * d)))


def skewness(values):
    """Standardised third central moment; 0 for (numerically) constant data."""
    d = _values(values)
    if d.size < 2:
        raise ValueError("skewness needs at least 2 values")
    mu = np.mean(d)
    centred = d - mu
    sigma = np.sqrt(np.mean(centred * centred))
    if sigma < SKEW_SIGMA_FLOOR:
        return 0.0
    z = centred / sigma
    return float(np.mean(z * z * z))


def circularity_3d(grid):
    """Peak minus valley deviation over every grid cell."""
    d = grid.deviations
    return float(d.max() - d.min())


def circularity_2d(mset, height_index):
    """Peak minus valley of the readings present at one gauge height."""
    _, d = mset.row(height_index)
    if d.size < 2:
        raise MeasurementError(
            f"part {mset.part_id}: height index {height_index} has fewer than 2 readings")
    return float(d.max() - d.min())


@dataclass
class SurfaceReport:
    part_id: str
    n: int
    mean: float
    min: float
    max: float
    std: float
    rms: float
    skewness: float
    circularity_3d: float
    circularity_2d_per_height: list = field(default_factory=list)
    circularity_2d_max: float = 0.0

    def to_dict(self, fmt=float):
        """JSON-ready mapping; ``fmt`` converts each float (e.g. to a fixed string)."""
        return {
            "part_id": self.part_id,
            "n": self.n,
            "mean_mm": fmt(self.mean),
            "min_mm": fmt(self.min),
            "max_mm": fmt(self.max),
            "std_mm": fmt(self.std),
            "rms_mm": fmt(self.rms),
            "skewness": fmt(self.skewness),
            "circularity_3d_mm": fmt(self.circularity_3d),
            "circularity_2d_mm": [{"height_mm": fmt(h), "value_mm": fmt(v)}
                                  for h, v in self.circularity_2d_per_height],
            "circularity_2d_max_mm": fmt(self.circularity_2d_max),
        }


def build_report(mset, grid, region="all", include_nodes=True):
    """Statistics of a reconstructed grid plus per-height 2D circularity of its readings.

    Moments are taken over the grid cells of ``region`` (``"all"`` or
    ``"interpolated"``).  Peak and valley are those of the reconstructed
    surface: the grid cells and, with ``include_nodes``, the measured nodes the
    interpolating surface passes through, so sampling the grid between gauge
    heights cannot hide a measured extreme.
    """
    if region == "all":
        cells = grid.deviations.ravel()
    elif region == "interpolated":
        cells = grid.deviations[~grid.extrapolated]
        if cells.size == 0:
            raise ValueError("grid has no interpolated cells")
    else:
        raise ValueError(f"unknown statistics region {region!r}")
    mean = float(np.mean(cells))
    centred = cells - mean
    std = float(np.sqrt(np.mean(centred * centred)))
    lo = float(cells.min())
    hi = float(cells.max())
    if include_nodes:
        measured = _values(mset.deviations)
        lo = min(lo, float(measured.min()))
        hi = max(hi, float(measured.max()))
    per_height = [(float(h), circularity_2d(mset, k)) for k, h in enumerate(mset.heights)]
    return SurfaceReport(
        part_id=mset.part_id,
        n=int(cells.size),
        mean=mean,
        min=lo,
        max=hi,
        std=std,
        rms=rms(cells),
        skewness=skewness(cells),
        circularity_3d=hi - lo,
        circularity_2d_per_height=per_height,
        circularity_2d_max=max(v for _, v in per_height),
    )
