"""Synthetic parts with analytic deviation fields, gauge sampling and error metrics.

Noise comes from numpy's PCG64 bit generator (``numpy.random.default_rng``)
drawing standard normals in height-major lattice order, which is stable
across platforms for a given seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError
from .ingest import MeasurementSet
from .interp.natural import arc_length
from .metrics import circularity_3d
from .surface import SurfaceGrid, grid_axes


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class GaussianDent:
    theta: float  # deg
    z: float  # mm
    sigma_theta: float  # mm of arc
    sigma_z: float  # mm
    depth: float  # mm, positive means inward

    def __post_init__(self):
        for name in ("sigma_theta", "sigma_z", "depth"):
            _positive(name, getattr(self, name))

    @classmethod
    def from_footprint(cls, theta, z, width, height, depth, threshold):
        """Dent whose region deeper than ``threshold`` spans ``width`` x ``height`` mm."""
        if not 0 < threshold < depth:
            raise ConfigError("footprint threshold must lie in (0, depth)")
        reach = math.sqrt(2.0 * math.log(depth / threshold))
        return cls(theta, z, width / (2.0 * reach), height / (2.0 * reach), depth)

    def evaluate(self, theta, z, diameter):
        circ = math.pi * diameter
        du = arc_length(theta, diameter) - arc_length(self.theta, diameter)
        du = np.mod(du + circ / 2.0, circ) - circ / 2.0
        dz = np.asarray(z, dtype=float) - self.z
        return -self.depth * np.exp(-du * du / (2.0 * self.sigma_theta ** 2)
                                    - dz * dz / (2.0 * self.sigma_z ** 2))


@dataclass(frozen=True)
class Corrugation:
    period: float  # mm of arc
    amplitude: float  # mm, peak to peak

    def __post_init__(self):
        _positive("period", self.period)
        _positive("amplitude", self.amplitude)

    def evaluate(self, theta, z, diameter):
        u = arc_length(theta, diameter)
        return self.amplitude / 2.0 * np.sin(2.0 * math.pi * u / self.period) + 0.0 * np.asarray(z)


@dataclass(frozen=True)
class Ovality:
    amplitude: float  # mm
    phase: float = 0.0  # deg

    def __post_init__(self):
        _positive("amplitude", self.amplitude)

    def evaluate(self, theta, z, diameter):
        t = np.radians(theta)
        return self.amplitude * np.sin(2.0 * t + math.radians(self.phase)) + 0.0 * np.asarray(z)


@dataclass(frozen=True)
class AxialTaper:
    slope: float  # mm per mm of height
    mid_height: float = 0.0  # filled from the part by SyntheticSpec

    def evaluate(self, theta, z, diameter):
        return self.slope * (np.asarray(z, dtype=float) - self.mid_height) + 0.0 * np.asarray(theta)


_FEATURES = {
    "gaussian_dent": (GaussianDent, {"theta_deg": "theta", "z_mm": "z",
                                     "sigma_theta_mm": "sigma_theta", "sigma_z_mm": "sigma_z",
                                     "depth_mm": "depth"}),
    "corrugation": (Corrugation, {"period_mm": "period", "amplitude_mm": "amplitude"}),
    "ovality": (Ovality, {"amplitude_mm": "amplitude", "phase_deg": "phase"}),
    "axial_taper": (AxialTaper, {"slope": "slope"}),
}


@dataclass
class SyntheticSpec:
    nominal_diameter: float
    nominal_height: float
    features: list = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0
    part_id: str = "SYN"

    def __post_init__(self):
        _positive("nominal_diameter", self.nominal_diameter)
        _positive("nominal_height", self.nominal_height)
        if not self.noise_sigma >= 0:
            raise ConfigError("noise_sigma must be >= 0")
        self.features = [AxialTaper(f.slope, self.nominal_height / 2.0)
                         if isinstance(f, AxialTaper) else f for f in self.features]

    @classmethod
    def from_dict(cls, doc):
        try:
            feats = []
            for item in doc.get("features", []):
                item = dict(item)
                kind = item.pop("type")
                if kind not in _FEATURES:
                    raise ConfigError(f"unknown feature type {kind!r}")
                ctor, keys = _FEATURES[kind]
                unknown = set(item) - set(keys)
                if unknown:
                    raise ConfigError(f"unknown {kind} keys: {', '.join(sorted(unknown))}")
                feats.append(ctor(**{keys[k]: v for k, v in item.items()}))
            allowed = {"part_id", "nominal_diameter_mm", "nominal_height_mm", "features",
                       "noise_sigma_mm", "seed"}
            unknown = set(doc) - allowed
            if unknown:
                raise ConfigError(f"unknown spec keys: {', '.join(sorted(unknown))}")
            return cls(doc["nominal_diameter_mm"], doc["nominal_height_mm"], feats,
                       doc.get("noise_sigma_mm", 0.0), int(doc.get("seed", 0)),
                       str(doc.get("part_id", "SYN")))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid synthetic spec: {exc}") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def analytic_deviation(spec, theta, z):
    """Noise-free deviation (mm) at angle(s) ``theta`` (deg) and height(s) ``z`` (mm)."""
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.zeros(np.broadcast(theta, z).shape)
    for feature in spec.features:
        out = out + feature.evaluate(theta, z, spec.nominal_diameter)
    return out if out.ndim else float(out)


def gauge_angles(n):
    return 360.0 * np.arange(n) / n


def gauge_heights(nominal_height, count, convention="endpoints"):
    """Gauge heights: ``"endpoints"`` spans [0, H] (pitch H/(m-1)); ``"centered"``
    puts one height mid-way in each of m equal bands (pitch H/m)."""
    if count < 2:
        raise ConfigError("need at least 2 heights")
    if convention == "endpoints":
        return np.linspace(0.0, nominal_height, count)
    if convention == "centered":
        return (np.arange(count) + 0.5) * (nominal_height / count)
    raise ConfigError(f"unknown height convention {convention!r}")


def sample(spec, angles, heights, part_id=None):
    """Gauge readings of the synthetic part on an (angles x heights) lattice."""
    angles = np.asarray(angles, dtype=float)
    heights = np.asarray(heights, dtype=float)
    dev = analytic_deviation(spec, angles[None, :], heights[:, None])
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        dev = dev + rng.normal(0.0, spec.noise_sigma, size=dev.shape)
    return MeasurementSet(part_id or spec.part_id, spec.nominal_diameter, spec.nominal_height,
                          angles, heights, dev)


def truth_grid(spec, n_theta, z_step):
    """The analytic field on the same raster ``reconstruct`` produces."""
    theta, z = grid_axes(spec.nominal_height, n_theta, z_step)
    dev = np.asarray(analytic_deviation(spec, theta[None, :], z[:, None]), dtype=float)
    dev = np.broadcast_to(dev, (z.size, theta.size)).copy()
    return SurfaceGrid(spec.part_id, spec.nominal_diameter / 2.0, theta, z, dev,
                       np.zeros(dev.shape, dtype=bool))


@dataclass(frozen=True)
class ReconstructionError:
    rmse: float
    max_abs: float
    circularity_error_pct: float


def reconstruction_error(truth, predicted):
    if not truth.same_geometry(predicted):
        raise GeometryError("truth and predicted grids differ in geometry")
    diff = predicted.deviations - truth.deviations
    c_true = circularity_3d(truth)
    c_pred = circularity_3d(predicted)
    if c_true > 0:
        pct = 100.0 * (c_pred - c_true) / c_true
    else:
        pct = 0.0 if c_pred == 0 else math.inf
    return ReconstructionError(float(np.sqrt(np.mean(diff * diff))),
                               float(np.max(np.abs(diff))), float(pct))
