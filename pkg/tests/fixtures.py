"""Synthetic fixture parts shared by the test modules."""

import math

import numpy as np

from cylgauge.ingest import JobConfig, serialize_measurements
from cylgauge.synth import (AxialTaper, Corrugation, GaussianDent, Ovality, SyntheticSpec,
                            gauge_angles, gauge_heights, sample)

DIAMETER = 163.58
HEIGHT = 139.7
CIRCUMFERENCE = math.pi * DIAMETER
FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))

# dent of the downsampling study: 30 mm across at half depth
STUDY_DENT_SIGMA = 30.0 / FWHM
# 9-height circularity error of the study fixture measured at -1.34 %
STUDY_CIRCULARITY_BOUND_PCT = 1.5

# visibility limit for minor dents; dents at or below it are not reported
DENT_THRESHOLD = 0.18


def study_spec():
    """Smooth low-order field plus one 30 mm Gaussian dent, noiseless."""
    return SyntheticSpec(DIAMETER, HEIGHT, [
        Ovality(0.15, 30.0),
        AxialTaper(0.002),
        GaussianDent(180.0, HEIGHT / 2.0, STUDY_DENT_SIGMA, STUDY_DENT_SIGMA, 1.27),
    ], part_id="STUDY")


def dent_spec(threshold=DENT_THRESHOLD):
    """30.48 x 33.02 x 1.27 mm dent whose footprint is measured at ``threshold``."""
    return SyntheticSpec(DIAMETER, HEIGHT, [
        GaussianDent.from_footprint(180.0, HEIGHT / 2.0, 30.48, 33.02, 1.27, threshold),
    ], part_id="DENT")


def corrugation_spec(period=CIRCUMFERENCE / 48.0):
    return SyntheticSpec(DIAMETER, HEIGHT, [Corrugation(period, 1.59)], part_id="CORR")


def lot_spec(i):
    """Part ``i`` of a synthetic production lot."""
    return SyntheticSpec(DIAMETER, HEIGHT, [
        Ovality(0.1 + 0.002 * i, 10.0 * i),
        GaussianDent.from_footprint((37.0 * i) % 360.0, HEIGHT / 2.0, 30.48, 33.02, 1.27, 0.18),
        Corrugation(CIRCUMFERENCE / 48.0, 0.3),
    ], noise_sigma=0.01, seed=i, part_id=f"P{i:03d}")


def write_lot(directory, count, heights=15, angles=24, convention="endpoints"):
    """Sampled lot files plus a manifest; returns (manifest path, entries)."""
    entries = []
    for i in range(count):
        spec = lot_spec(i)
        mset = sample(spec, gauge_angles(angles), gauge_heights(HEIGHT, heights, convention))
        path = directory / f"{spec.part_id}.csv"
        path.write_text(serialize_measurements(mset), encoding="utf-8")
        entries.append((spec.part_id, path))
    return entries


# small grids keep the golden files reviewable
GOLDEN_CONFIG = JobConfig(n_theta=72, z_step=10.0)


def random_lattice(rng, n_angles, n_heights, diameter=DIAMETER, height=HEIGHT, jitter=True):
    """Increasing angles in [0, 360) and heights in [0, H] with random spacing."""
    if jitter:
        angles = np.sort(rng.choice(np.arange(0, 360, 2.5), n_angles, replace=False))
        heights = np.sort(rng.choice(np.linspace(0, height, 57), n_heights, replace=False))
    else:
        angles = gauge_angles(n_angles)
        heights = gauge_heights(height, n_heights)
    return angles, heights
