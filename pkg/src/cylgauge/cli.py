"""Command-line driver: reconstruct single files, whole lots, synthetic parts and studies."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .defects import corrugation_index, detect_defects
from .errors import ConfigError, CylGaugeError
from .export import export_contour_ppm, export_grid_csv, export_obj, fmt_sig
from .ingest import JobConfig, parse_measurements, serialize_measurements
from .metrics import build_report
from .surface import reconstruct, to_mesh
from .synth import (SyntheticSpec, gauge_angles, gauge_heights, reconstruction_error,
                    sample, truth_grid)

log = logging.getLogger("cylgauge")

WORKERS_ENV = "CYLGAUGE_WORKERS"


def _json_bytes(doc):
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def analyze_part(mset, config):
    """Reconstruct one part and build its report document and artifacts.

    Returns ``(report_dict, {filename: bytes})``; floats in the report are
    fixed-notation strings with 9 significant digits.
    """
    grid = reconstruct(mset, config)
    report = build_report(mset, grid, region=config.stats_region,
                          include_nodes=config.interpolator != "spiral")
    doc = report.to_dict(fmt_sig)
    doc["defects"] = [d.to_dict(fmt_sig)
                      for d in detect_defects(grid, config.dent_depth_threshold)]
    doc["corrugation"] = corrugation_index(grid).to_dict(fmt_sig)
    pid = mset.part_id
    files = {
        f"{pid}_report.json": _json_bytes(doc),
        f"{pid}.obj": export_obj(to_mesh(grid, config.deviation_scale)),
        f"{pid}_grid.csv": export_grid_csv(grid),
        f"{pid}_contour.ppm": export_contour_ppm(grid),
    }
    return doc, files


@dataclass
class LotSummary:
    lot_id: str
    part_count: int
    reports: dict  # part_id -> report document
    errors: dict = field(default_factory=dict)  # part_id -> message
    circularity_3d_min: float = 0.0
    circularity_3d_max: float = 0.0
    circularity_3d_mean: float = 0.0
    wall_time: float = 0.0

    @classmethod
    def from_reports(cls, lot_id, reports, errors, wall_time=0.0):
        circ = [float(reports[p]["circularity_3d_mm"]) for p in sorted(reports)]
        agg = (min(circ), max(circ), sum(circ) / len(circ)) if circ else (0.0, 0.0, 0.0)
        return cls(lot_id, len(reports), dict(sorted(reports.items())),
                   dict(sorted(errors.items())), *agg, wall_time)

    def to_dict(self):
        # wall_time is deliberately left out: the summary file must not depend on the run
        return {
            "lot_id": self.lot_id,
            "part_count": self.part_count,
            "failed_count": len(self.errors),
            "circularity_3d_mm": {"min": fmt_sig(self.circularity_3d_min),
                                  "max": fmt_sig(self.circularity_3d_max),
                                  "mean": fmt_sig(self.circularity_3d_mean)},
            "parts": [{"part_id": p, "circularity_3d_mm": r["circularity_3d_mm"],
                       "rms_mm": r["rms_mm"], "report": f"{p}_report.json"}
                      for p, r in self.reports.items()],
            "errors": [{"part_id": p, "error": msg} for p, msg in self.errors.items()],
        }


def _load_part(path, part_id, config):
    text = Path(path).read_text(encoding="utf-8")
    sets = parse_measurements(text, config.input_units,
                              config.nominal_diameter, config.nominal_height)
    if part_id is None:
        return list(sets.values())
    if part_id not in sets:
        raise CylGaugeError(f"part {part_id} not found in {path}")
    return [sets[part_id]]


def _run_job(job):
    """Worker entry point: one (part_id, path) pair -> (part_id, doc|None, files|error)."""
    part_id, path, config = job
    try:
        (mset,) = _load_part(path, part_id, config)
        doc, files = analyze_part(mset, config)
        return part_id, doc, files
    except (CylGaugeError, ValueError, OSError) as exc:
        return part_id, None, f"{type(exc).__name__}: {exc}"


def run_lot(entries, config, out_dir, lot_id="lot"):
    """Process ``entries`` [(part_id, path), ...] and write artifacts plus ``summary.json``.

    Parts run in up to ``config.worker_count`` processes; results are
    written in part_id order so output bytes do not depend on the schedule.
    A failing part is recorded in the summary and does not stop the others.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    jobs = [(pid, str(path), config) for pid, path in sorted(entries)]
    if config.worker_count > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.worker_count, len(jobs))) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    reports, errors = {}, {}
    for part_id, doc, payload in sorted(results, key=lambda r: r[0]):
        if doc is None:
            errors[part_id] = payload
            log.error("part %s failed: %s", part_id, payload)
            continue
        reports[part_id] = doc
        for name, data in payload.items():
            (out / name).write_bytes(data)
    summary = LotSummary.from_reports(lot_id, reports, errors, time.perf_counter() - start)
    (out / "summary.json").write_bytes(_json_bytes(summary.to_dict()))
    return summary


def run_downsample_study(spec, height_counts, n_angles=24, config=None, convention="endpoints"):
    """Reconstruction error versus number of gauge heights; returns CSV text."""
    config = config or JobConfig()
    truth = truth_grid(spec, config.n_theta, config.z_step)
    lines = ["count,rmse_mm,max_abs_mm,circularity_error_pct"]
    for count in height_counts:
        mset = sample(spec, gauge_angles(n_angles),
                      gauge_heights(spec.nominal_height, count, convention))
        err = reconstruction_error(truth, reconstruct(mset, config))
        lines.append(f"{count},{fmt_sig(err.rmse)},{fmt_sig(err.max_abs)},"
                     f"{fmt_sig(err.circularity_error_pct)}")
    return "\n".join(lines) + "\n"


def load_config(path):
    config = JobConfig.from_json(Path(path).read_text(encoding="utf-8")) if path else JobConfig()
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            config = replace(config, worker_count=int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
    return config


def _cmd_reconstruct(args):
    config = load_config(args.config)
    sets = _load_part(args.input, None, config)
    entries = [(m.part_id, args.input) for m in sets]
    summary = run_lot(entries, config, args.out_dir, lot_id=Path(args.input).stem)
    return 1 if summary.errors else 0


def _cmd_lot(args):
    config = load_config(args.config)
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if not isinstance(manifest, list) or not manifest:
        raise ConfigError("lot manifest must be a non-empty JSON array")
    entries = []
    for item in manifest:
        if not isinstance(item, dict) or set(item) != {"part_id", "path"}:
            raise ConfigError("manifest entries must be {part_id, path} objects")
        path = Path(item["path"])
        if not path.is_absolute():
            path = manifest_path.parent / path
        entries.append((str(item["part_id"]), path))
    summary = run_lot(entries, config, args.out_dir, lot_id=manifest_path.stem)
    log.info("lot %s: %d parts ok, %d failed in %.2f s", summary.lot_id,
             summary.part_count, len(summary.errors), summary.wall_time)
    return 1 if summary.errors else 0


def _cmd_synth(args):
    spec = SyntheticSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    mset = sample(spec, gauge_angles(args.angles),
                  gauge_heights(spec.nominal_height, args.heights, args.convention))
    Path(args.out).write_text(serialize_measurements(mset), encoding="utf-8")
    return 0


def _cmd_study(args):
    spec = SyntheticSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    counts = [int(c) for c in args.heights.split(",") if c.strip()]
    config = load_config(args.config)
    text = run_downsample_study(spec, counts, args.angles, config, args.convention)
    Path(args.out).write_text(text, encoding="utf-8")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="cylgauge", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="reconstruct every part in one measurement CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("lot", help="process a lot manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_lot)

    p = sub.add_parser("synth", help="sample a synthetic part into a measurement CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--angles", type=int, default=24)
    p.add_argument("--heights", type=int, default=5)
    p.add_argument("--convention", choices=("endpoints", "centered"), default="endpoints")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("study", help="reconstruction error versus number of gauge heights")
    p.add_argument("--spec", required=True)
    p.add_argument("--heights", default="3,5,9,17,50")
    p.add_argument("--angles", type=int, default=24)
    p.add_argument("--convention", choices=("endpoints", "centered"), default="endpoints")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CylGaugeError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
