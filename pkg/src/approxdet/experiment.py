"""Experiment orchestration: load inputs, evaluate, emit reports.

Two input modes share one entry point:

  * detection evaluation: a candidate detection file scored against a
    reference file (labelled ground truth, or another configuration's
    detections when no labels exist);
  * toy pipeline: a scene description file; the miniature detector runs
    under the configured arithmetic and its output is scored against
    the scene's own ground truth.

Reports are deterministic byte-for-byte given (config, seed, inputs):
no timestamps, stable key order, full-precision floats.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

from . import dataset as ds
from .analysis import (
    area_analysis,
    confidence_histogram,
    generalize_classes,
    VEHICLE_MERGED_CLASS,
)
from .errors import ConfigError, DataError
from .fusion import fuse_sequence
from .kernels import ArithmeticConfig, SETUP_NAMES
from .metrics import (
    GroundTruthObject,
    PERSON_CLASS,
    VEHICLE_CLASSES,
    ap_by_class,
    match_detections,
    mean_average_precision,
)
from .toypipe import SceneSpec, detect_scene, generate_scene

P_FAULTY_GRID = (1e-6, 1e-5, 1e-4, 1e-3)


@dataclass
class ExperimentConfig:
    """Everything that determines one report row."""

    setup: str = "16full"
    p_faulty: float = 0.0
    seed: int = 0
    conf_threshold: float = 0.5
    iou_threshold: float = 0.5
    fusion: bool = False
    generalize_vehicles: bool = False
    candidate: str = ""
    reference: str = ""  # empty in toy-scene mode

    def __post_init__(self):
        if self.setup not in SETUP_NAMES:
            raise ConfigError(
                f"unknown setup {self.setup!r}; expected one of {sorted(SETUP_NAMES)}"
            )
        for name in ("conf_threshold", "iou_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if not 0.0 <= self.p_faulty <= 1.0:
            raise ConfigError(f"p_faulty must be in [0, 1], got {self.p_faulty}")
        if self.p_faulty and self.setup != "16appfault":
            raise ConfigError(f"setup {self.setup!r} does not take p_faulty")
        if not self.candidate:
            raise ConfigError("candidate input path is required")

    def label(self) -> str:
        if self.setup == "16appfault":
            return f"16appfault({self.p_faulty:g})"
        return self.setup

    def to_dict(self) -> dict:
        return {
            "setup": self.setup,
            "p_faulty": self.p_faulty,
            "seed": self.seed,
            "conf_threshold": self.conf_threshold,
            "iou_threshold": self.iou_threshold,
            "fusion": self.fusion,
            "generalize_vehicles": self.generalize_vehicles,
            "candidate": self.candidate,
            "reference": self.reference,
        }


@dataclass
class EvalReport:
    """One table row plus its analysis tables."""

    config: dict
    tp: int
    fp: int
    fn: int
    ap: dict
    excluded_classes: list
    map_vehicle: float | None
    map_vehicle_person: float | None
    confidence_bins: list = field(default_factory=list)
    area_bins: list = field(default_factory=list)
    unbinned_fn: int = 0
    fault_stats: dict | None = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn},
            "ap_by_class": self.ap,
            "excluded_classes": self.excluded_classes,
            "map_vehicle": self.map_vehicle,
            "map_vehicle_person": self.map_vehicle_person,
            "confidence_bins": self.confidence_bins,
            "area_bins": self.area_bins,
            "unbinned_fn": self.unbinned_fn,
            "fault_stats": self.fault_stats,
        }

    def csv_row(self) -> dict:
        return {
            "configuration": self.config.get("label", self.config["setup"]),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "map_vehicle": _fmt_map(self.map_vehicle),
            "map_vehicle_person": _fmt_map(self.map_vehicle_person),
        }


def _fmt_map(value) -> str:
    return "NA" if value is None else repr(value)


def _safe_map(aps: dict, class_set) -> float | None:
    try:
        return mean_average_precision(aps, class_set)
    except ConfigError:
        return None


def _read_input(path):
    """Classify an input file: ('scene', SceneSpec) or ('records', list)."""
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and doc.get("kind") == "toy-scene":
        return "scene", SceneSpec.from_dict(doc)
    return "records", ds.load_records(path)


def _records_to_frames(records) -> list:
    """Per-record detection lists, frame ids = record order."""
    detections = ds.records_to_detections(records)
    frames = [[] for _ in records]
    for det in detections:
        frames[det.frame_id].append(det)
    return frames


def _candidate_and_reference(cfg: ExperimentConfig):
    """Produce (detections, ground_truths, fault_stats) for the config."""
    kind, payload = _read_input(cfg.candidate)
    if kind == "scene":
        arithmetic = ArithmeticConfig.from_name(cfg.setup, cfg.p_faulty, cfg.seed)
        scene = generate_scene(payload)
        detections, stats = detect_scene(scene, arithmetic)
        if cfg.fusion:
            frames = [[] for _ in scene.images]
            for det in detections:
                frames[det.frame_id].append(det)
            fused = fuse_sequence(frames, conf_threshold=cfg.conf_threshold)
            detections = [d for frame in fused.frames for d in frame]
        gts = ds.records_to_ground_truths(scene.records)
        return detections, gts, stats.to_dict()
    candidate_records = payload
    if not cfg.reference:
        raise ConfigError("detection evaluation requires a reference file")
    ref_kind, reference_records = _read_input(cfg.reference)
    if ref_kind == "scene":
        raise ConfigError("reference must be a record file, not a scene")
    if cfg.fusion:
        fused = fuse_sequence(
            _records_to_frames(candidate_records), conf_threshold=cfg.conf_threshold
        )
        detections = [d for frame in fused.frames for d in frame]
    else:
        detections = ds.records_to_detections(candidate_records)
    if ds.has_confidences(reference_records):
        # Reference is another configuration's detections: fuse it the
        # same way when fusion is on, threshold it either way.
        if cfg.fusion:
            fused_ref = fuse_sequence(
                _records_to_frames(reference_records),
                conf_threshold=cfg.conf_threshold,
            )
            gts = [
                GroundTruthObject(d.class_id, d.box, d.frame_id, d.confidence)
                for frame in fused_ref.frames
                for d in frame
            ]
        else:
            gts = ds.records_to_ground_truths(
                reference_records, conf_threshold=cfg.conf_threshold
            )
    else:
        gts = ds.records_to_ground_truths(reference_records)
    return detections, gts, None


def run_experiment(cfg: ExperimentConfig) -> EvalReport:
    detections, gts, fault_stats = _candidate_and_reference(cfg)
    if cfg.generalize_vehicles:
        detections, gts = generalize_classes(detections, gts)
    result = match_detections(
        detections,
        gts,
        iou_threshold=cfg.iou_threshold,
        conf_threshold=cfg.conf_threshold,
    )
    aps, excluded = ap_by_class(result)
    if cfg.generalize_vehicles:
        map_vehicle = _safe_map(aps, [VEHICLE_MERGED_CLASS])
        map_vehicle_person = _safe_map(aps, [VEHICLE_MERGED_CLASS, PERSON_CLASS])
    else:
        map_vehicle = _safe_map(aps, VEHICLE_CLASSES)
        map_vehicle_person = _safe_map(aps, (*VEHICLE_CLASSES, PERSON_CLASS))
    hist = confidence_histogram(result)
    areas = area_analysis(result)
    config = cfg.to_dict()
    config["label"] = cfg.label()
    return EvalReport(
        config=config,
        tp=result.tp,
        fp=result.fp,
        fn=result.fn,
        ap=aps,
        excluded_classes=excluded,
        map_vehicle=map_vehicle,
        map_vehicle_person=map_vehicle_person,
        confidence_bins=hist.to_rows(),
        area_bins=areas.to_rows(),
        unbinned_fn=hist.unbinned_fn,
        fault_stats=fault_stats,
    )


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _csv_text(fieldnames, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def table_csv(reports) -> str:
    fieldnames = ["configuration", "tp", "fp", "fn", "map_vehicle",
                  "map_vehicle_person"]
    return _csv_text(fieldnames, [r.csv_row() for r in reports])


def write_report(report: EvalReport, outdir) -> list:
    """Write report.json, report.csv and the analysis CSVs; returns paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []

    def emit(name, text):
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths.append(path)

    emit("report.json", report_json(report))
    emit("report.csv", table_csv([report]))
    emit(
        "confidence_histogram.csv",
        _csv_text(
            ["bin_low", "bin_high", "tp", "fp_plus_fn"], report.confidence_bins
        ),
    )
    emit(
        "area_bins.csv",
        _csv_text(
            ["area_low", "area_high", "tp", "fn", "tp_percentage"], report.area_bins
        ),
    )
    return paths


def compare_reports(a: dict, b: dict, map_tolerance: float = 0.01) -> dict:
    """Field deltas between two report dicts.

    Count fields always appear; mAP deltas below the tolerance are
    reported but not flagged. Raises on schema mismatch.
    """
    for key in ("counts", "map_vehicle", "map_vehicle_person"):
        if (key in a) != (key in b):
            raise DataError(f"report schema mismatch on {key!r}")
    deltas = {}
    for key in ("tp", "fp", "fn"):
        d = b["counts"][key] - a["counts"][key]
        if d:
            deltas[key] = d
    flagged = {}
    for key in ("map_vehicle", "map_vehicle_person"):
        va, vb = a.get(key), b.get(key)
        if va is None or vb is None:
            if va != vb:
                flagged[key] = {"a": va, "b": vb, "significant": True}
            continue
        delta = vb - va
        if delta != 0.0:
            flagged[key] = {
                "delta": delta,
                "significant": abs(delta) > map_tolerance,
            }
    return {"counts": deltas, "map": flagged, "identical": not deltas and not flagged}


def run_sweep(
    scene_path: str,
    seed: int = 7,
    p_grid=P_FAULTY_GRID,
    conf_threshold: float = 0.5,
    iou_threshold: float = 0.5,
    fusion: bool = False,
    generalize_vehicles: bool = False,
) -> list:
    """The full setup grid on one scene: exact 32/16, approximate, and
    the fault-rate sweep. Returns one report per configuration."""
    rows = []
    for setup, p in [
        ("32full", 0.0),
        ("16full", 0.0),
        ("16approx", 0.0),
        *(("16appfault", p) for p in p_grid),
    ]:
        cfg = ExperimentConfig(
            setup=setup,
            p_faulty=p,
            seed=seed,
            conf_threshold=conf_threshold,
            iou_threshold=iou_threshold,
            fusion=fusion,
            generalize_vehicles=generalize_vehicles,
            candidate=scene_path,
        )
        rows.append(run_experiment(cfg))
    return rows
