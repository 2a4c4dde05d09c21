"""Measurement CSV parsing, job configuration and unit handling.

Measurement files are UTF-8 CSV with the header ``part_id,height,angle,deviation``.
Lines starting with ``#`` are comments.  A comment made only of ``key=value``
tokens is a directive carrying the nominal part dimensions::

    # nominal_diameter=163.58 nominal_height=139.7
    # part_id=P007 nominal_diameter=241.3 nominal_height=152.4

A directive without ``part_id`` sets the file-wide default.  Lengths in
directives use the same units as the data rows.  Everything is converted to
millimetres on the way in.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, MeasurementError

MM_PER_INCH = 25.4
UNITS = ("mm", "inch")
INTERPOLATORS = ("laplace_nn", "cubic_spline", "pchip", "spiral")
CSV_HEADER = ("part_id", "height", "angle", "deviation")
_DIRECTIVE_KEYS = {"part_id", "nominal_diameter", "nominal_height"}


def convert_units(value, from_unit, to_unit):
    """Convert a length (scalar or array) between ``mm`` and ``inch``."""
    for unit in (from_unit, to_unit):
        if unit not in UNITS:
            raise ValueError(f"unknown unit {unit!r}; expected one of {UNITS}")
    if from_unit == to_unit:
        return value
    if from_unit == "inch":
        return value * MM_PER_INCH
    return value / MM_PER_INCH


@dataclass(frozen=True)
class GaugePoint:
    part_id: str
    height_z: float
    angle: float
    deviation: float


@dataclass(eq=False)
class MeasurementSet:
    """Sparse (height x angle) lattice of radial deviations for one part.

    ``deviations[k, j]`` is the reading at ``heights[k]``, ``angles[j]``;
    NaN marks a lattice node without a reading.  All lengths in mm.
    """

    part_id: str
    nominal_diameter: float
    nominal_height: float
    angles: np.ndarray
    heights: np.ndarray
    deviations: np.ndarray

    def __post_init__(self):
        self.angles = np.array(self.angles, dtype=float)
        self.heights = np.array(self.heights, dtype=float)
        self.deviations = np.array(self.deviations, dtype=float)
        self.validate()

    @property
    def nominal_radius(self):
        return self.nominal_diameter / 2.0

    @property
    def circumference(self):
        return math.pi * self.nominal_diameter

    def validate(self):
        pid = self.part_id
        if not (self.nominal_diameter > 0 and self.nominal_height > 0):
            raise MeasurementError(f"part {pid}: nominal dimensions must be positive")
        a, h, d = self.angles, self.heights, self.deviations
        if a.ndim != 1 or h.ndim != 1 or d.shape != (h.size, a.size):
            raise MeasurementError(
                f"part {pid}: deviation matrix {d.shape} does not match "
                f"{h.size} heights x {a.size} angles")
        if a.size < 3 or h.size < 2:
            raise MeasurementError(f"part {pid}: need at least 3 angles and 2 heights")
        if np.any(np.diff(a) <= 0) or np.any(np.diff(h) <= 0):
            raise MeasurementError(f"part {pid}: angles and heights must be strictly increasing")
        if a[0] < 0 or a[-1] >= 360:
            raise MeasurementError(f"part {pid}: angles must lie in [0, 360)")
        if h[0] < 0 or h[-1] > self.nominal_height:
            raise MeasurementError(f"part {pid}: heights must lie in [0, nominal_height]")
        if np.any(np.isinf(d)):
            raise MeasurementError(f"part {pid}: deviations must be finite")
        present = ~np.isnan(d)
        if np.any(np.abs(d[present]) >= self.nominal_radius):
            raise MeasurementError(f"part {pid}: |deviation| must be below the nominal radius")
        sparse_rows = np.flatnonzero(present.sum(axis=1) < 3)
        if sparse_rows.size:
            raise MeasurementError(
                f"part {pid}: height {h[sparse_rows[0]]:g} has fewer than 3 readings")

    def __eq__(self, other):
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        return (self.part_id == other.part_id
                and self.nominal_diameter == other.nominal_diameter
                and self.nominal_height == other.nominal_height
                and np.array_equal(self.angles, other.angles)
                and np.array_equal(self.heights, other.heights)
                and np.array_equal(self.deviations, other.deviations, equal_nan=True))

    def points(self):
        """Non-missing readings as a list of GaugePoint, height-major order."""
        k, j = np.nonzero(~np.isnan(self.deviations))
        return [GaugePoint(self.part_id, float(self.heights[a]), float(self.angles[b]),
                           float(self.deviations[a, b])) for a, b in zip(k, j)]

    def row(self, height_index):
        """(angles, deviations) of the readings present at one height."""
        d = self.deviations[height_index]
        keep = ~np.isnan(d)
        return self.angles[keep], d[keep]


def _parse_float(text, what, line):
    try:
        value = float(text)
    except ValueError:
        raise MeasurementError(f"cannot parse {what} {text!r}", line) from None
    if not math.isfinite(value):
        raise MeasurementError(f"{what} must be finite, got {text!r}", line)
    return value


def _parse_directive(body):
    tokens = body.split()
    if not tokens:
        return None
    pairs = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in _DIRECTIVE_KEYS:
            return None
        pairs[key] = val
    return pairs


def parse_measurements(text, units="mm", nominal_diameter=None, nominal_height=None):
    """Parse a measurement CSV into one MeasurementSet per part.

    Parameters
    ----------
    text : str or file-like
        CSV content.
    units : {"mm", "inch"}
        Units of every length in the stream, directives included.
    nominal_diameter, nominal_height : float, optional
        Fallback nominal dimensions in mm, used when the file carries no
        directive for a part.

    Returns
    -------
    dict
        ``{part_id: MeasurementSet}`` ordered by part_id.
    """
    if units not in UNITS:
        raise MeasurementError(f"unknown unit {units!r}")
    if not isinstance(text, str):
        text = text.read()
    defaults = {"nominal_diameter": nominal_diameter, "nominal_height": nominal_height}
    per_part_dims = {}
    readings = {}
    header_seen = False

    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            directive = _parse_directive(line[1:])
            if directive is None:
                continue
            target = per_part_dims.setdefault(directive.pop("part_id"), {}) \
                if "part_id" in directive else defaults
            for key, val in directive.items():
                target[key] = convert_units(_parse_float(val, key, lineno), units, "mm")
            continue
        cells = [c.strip() for c in next(csv.reader([line]))]
        if not header_seen:
            if tuple(cells) != CSV_HEADER:
                raise MeasurementError(
                    f"expected header {','.join(CSV_HEADER)!r}, got {line!r}", lineno)
            header_seen = True
            continue
        if len(cells) != 4 or not cells[0]:
            raise MeasurementError(f"malformed row {line!r}", lineno)
        part = cells[0]
        height = convert_units(_parse_float(cells[1], "height", lineno), units, "mm")
        angle = _parse_float(cells[2], "angle", lineno)
        deviation = convert_units(_parse_float(cells[3], "deviation", lineno), units, "mm")
        if not 0.0 <= angle < 360.0:
            raise MeasurementError(f"angle {angle:g} outside [0, 360)", lineno)
        part_readings = readings.setdefault(part, {})
        key = (height, angle)
        if key in part_readings and part_readings[key][0] != deviation:
            raise MeasurementError(
                f"part {part}: conflicting deviations at height {height:g}, "
                f"angle {angle:g} (first seen on line {part_readings[key][1]})", lineno)
        part_readings.setdefault(key, (deviation, lineno))

    if not readings:
        raise MeasurementError("no measurements")

    sets = {}
    for part in sorted(readings):
        dims = {**defaults, **{k: v for k, v in per_part_dims.get(part, {}).items()}}
        if dims["nominal_diameter"] is None or dims["nominal_height"] is None:
            raise MeasurementError(f"part {part}: nominal diameter/height not given")
        pts = readings[part]
        heights = np.array(sorted({h for h, _ in pts}))
        angles = np.array(sorted({a for _, a in pts}))
        dev = np.full((heights.size, angles.size), np.nan)
        hi = {h: i for i, h in enumerate(heights.tolist())}
        ai = {a: i for i, a in enumerate(angles.tolist())}
        for (h, a), (d, _) in pts.items():
            dev[hi[h], ai[a]] = d
        sets[part] = MeasurementSet(part, dims["nominal_diameter"], dims["nominal_height"],
                                    angles, heights, dev)
    return sets


def serialize_measurements(sets, units="mm"):
    """Write MeasurementSets back to the CSV format (lossless in mm)."""
    if isinstance(sets, MeasurementSet):
        sets = [sets]
    elif isinstance(sets, dict):
        sets = list(sets.values())
    out = io.StringIO()
    for ms in sets:
        dia = convert_units(ms.nominal_diameter, "mm", units)
        hgt = convert_units(ms.nominal_height, "mm", units)
        out.write(f"# part_id={ms.part_id} nominal_diameter={dia!r} nominal_height={hgt!r}\n")
    out.write(",".join(CSV_HEADER) + "\n")
    for ms in sets:
        for p in ms.points():
            h = convert_units(p.height_z, "mm", units)
            d = convert_units(p.deviation, "mm", units)
            out.write(f"{p.part_id},{h!r},{p.angle!r},{d!r}\n")
    return out.getvalue()


@dataclass(frozen=True)
class JobConfig:
    """Options for one reconstruction job; lengths in mm.

    ``stats_region`` selects which grid cells feed the statistics report:
    ``"all"`` or ``"interpolated"`` (measured height span only).
    """

    interpolator: str = "laplace_nn"
    n_theta: int = 720
    z_step: float = 0.5
    deviation_scale: float = 1.0
    dent_depth_threshold: float = 0.1
    input_units: str = "mm"
    worker_count: int = 1
    nominal_diameter: float | None = None
    nominal_height: float | None = None
    stats_region: str = "all"

    def __post_init__(self):
        for name in ("n_theta", "z_step", "deviation_scale", "dent_depth_threshold",
                     "worker_count"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name} must be a number, got {value!r}")
        if self.interpolator not in INTERPOLATORS:
            raise ConfigError(f"interpolator must be one of {INTERPOLATORS}")
        if int(self.n_theta) != self.n_theta or self.n_theta < 36:
            raise ConfigError("n_theta must be an integer >= 36")
        if not self.z_step > 0:
            raise ConfigError("z_step must be positive")
        if not self.deviation_scale > 0:
            raise ConfigError("deviation_scale must be positive")
        if not self.dent_depth_threshold > 0:
            raise ConfigError("dent_depth_threshold must be positive")
        if self.input_units not in UNITS:
            raise ConfigError(f"input_units must be one of {UNITS}")
        if int(self.worker_count) != self.worker_count or self.worker_count < 1:
            raise ConfigError("workers must be a positive integer")
        if self.stats_region not in ("all", "interpolated"):
            raise ConfigError("stats_region must be 'all' or 'interpolated'")
        for name in ("nominal_diameter", "nominal_height"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, (int, float)) or not value > 0):
                raise ConfigError(f"{name} must be positive")

    # JSON key -> dataclass field
    _JSON_KEYS = {
        "interpolator": "interpolator",
        "n_theta": "n_theta",
        "z_step_mm": "z_step",
        "deviation_scale": "deviation_scale",
        "dent_depth_threshold_mm": "dent_depth_threshold",
        "input_units": "input_units",
        "workers": "worker_count",
        "nominal_diameter_mm": "nominal_diameter",
        "nominal_height_mm": "nominal_height",
        "stats_region": "stats_region",
    }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("job config must be a JSON object")
        unknown = sorted(set(doc) - set(cls._JSON_KEYS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {cls._JSON_KEYS[k]: v for k, v in doc.items()}
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        inverse = {v: k for k, v in self._JSON_KEYS.items()}
        return {inverse[f.name]: getattr(self, f.name) for f in fields(self)}
