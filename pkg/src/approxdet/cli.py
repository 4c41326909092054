"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, DataError
from .experiment import (
    ExperimentConfig,
    P_FAULTY_GRID,
    compare_reports,
    run_experiment,
    run_sweep,
    table_csv,
    write_report,
)
from .kernels import (
    ArithmeticConfig,
    SETUP_NAMES,
    error_propagation_report,
    load_workload,
)
from .toypipe import SceneSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--setup",
        default="16full",
        choices=sorted(SETUP_NAMES),
        help="arithmetic setup (or row label in detection mode)",
    )
    parser.add_argument("--p-faulty", type=float, default=0.0,
                        help="fault probability per arithmetic result")
    parser.add_argument("--seed", type=int, default=0, help="fault stream seed")
    parser.add_argument("--conf-threshold", type=float, default=0.5)
    parser.add_argument("--iou-threshold", type=float, default=0.5)
    parser.add_argument("--fusion", action="store_true",
                        help="average confidences over the last three frames")
    parser.add_argument("--generalize-vehicles", action="store_true",
                        help="merge car/truck/bus/motorbike into one class")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="approxdet",
        description="Approximate-arithmetic object-detection evaluation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser(
        "evaluate",
        help="evaluate a candidate (detections file or toy scene) and "
        "write a report",
    )
    p_eval.add_argument("candidate", help="detections JSONL or toy-scene JSON")
    p_eval.add_argument("--reference", default="",
                        help="reference records (labelled or detections); "
                        "unused in toy-scene mode")
    p_eval.add_argument("--out", required=True, help="output directory")
    _add_experiment_flags(p_eval)

    p_sweep = sub.add_parser(
        "sweep",
        help="run the whole setup grid (exact 32/16, approximate, fault "
        "rates) on a toy scene",
    )
    p_sweep.add_argument("scene", help="toy-scene JSON")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--seed", type=int, default=7)
    p_sweep.add_argument(
        "--p-faulty-grid",
        default=",".join(f"{p:g}" for p in P_FAULTY_GRID),
        help="comma-separated fault probabilities",
    )
    p_sweep.add_argument("--conf-threshold", type=float, default=0.5)
    p_sweep.add_argument("--iou-threshold", type=float, default=0.5)
    p_sweep.add_argument("--fusion", action="store_true")
    p_sweep.add_argument("--generalize-vehicles", action="store_true")

    p_cmp = sub.add_parser("compare", help="diff two report.json files")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.add_argument("--map-tolerance", type=float, default=0.01,
                       help="mAP delta below this is not flagged")

    p_prop = sub.add_parser(
        "propagate",
        help="per-layer deviation of one arithmetic setup against another "
        "on a workload",
    )
    p_prop.add_argument("workload", help="workload JSON")
    p_prop.add_argument("--config-a", default="16full", choices=sorted(SETUP_NAMES))
    p_prop.add_argument("--config-b", default="32full", choices=sorted(SETUP_NAMES))
    p_prop.add_argument("--p-faulty", type=float, default=0.0)
    p_prop.add_argument("--seed", type=int, default=0)
    p_prop.add_argument("--out", default="", help="write JSON here (default stdout)")

    p_scene = sub.add_parser("make-scene", help="write a toy-scene description")
    p_scene.add_argument("--out", required=True)
    p_scene.add_argument("--images", type=int, default=SceneSpec.n_images)
    p_scene.add_argument("--seed", type=int, default=SceneSpec.seed)

    return parser


def _cmd_evaluate(args) -> int:
    cfg = ExperimentConfig(
        setup=args.setup,
        p_faulty=args.p_faulty,
        seed=args.seed,
        conf_threshold=args.conf_threshold,
        iou_threshold=args.iou_threshold,
        fusion=args.fusion,
        generalize_vehicles=args.generalize_vehicles,
        candidate=args.candidate,
        reference=args.reference,
    )
    report = run_experiment(cfg)
    paths = write_report(report, args.out)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        grid = [float(tok) for tok in args.p_faulty_grid.split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad --p-faulty-grid: {exc}") from exc
    reports = run_sweep(
        args.scene,
        seed=args.seed,
        p_grid=grid,
        conf_threshold=args.conf_threshold,
        iou_threshold=args.iou_threshold,
        fusion=args.fusion,
        generalize_vehicles=args.generalize_vehicles,
    )
    os.makedirs(args.out, exist_ok=True)
    table_path = os.path.join(args.out, "table.csv")
    with open(table_path, "w") as fh:
        fh.write(table_csv(reports))
    print(table_path)
    for report in reports:
        row_dir = os.path.join(
            args.out, report.config["label"].replace("(", "_").replace(")", "")
        )
        write_report(report, row_dir)
        print(row_dir)
    return EXIT_OK


def _cmd_compare(args) -> int:
    def load(path):
        try:
            with open(path) as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read report {path}: {exc}") from exc

    diff = compare_reports(load(args.report_a), load(args.report_b),
                           map_tolerance=args.map_tolerance)
    print(json.dumps(diff, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_propagate(args) -> int:
    workload = load_workload(args.workload)
    cfg_a = ArithmeticConfig.from_name(args.config_a, args.p_faulty, args.seed)
    cfg_b = ArithmeticConfig.from_name(args.config_b, seed=args.seed)
    report = error_propagation_report(cfg_a, cfg_b, workload)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_make_scene(args) -> int:
    spec = SceneSpec(n_images=args.images, seed=args.seed)
    with open(args.out, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(args.out)
    return EXIT_OK


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "propagate": _cmd_propagate,
    "make-scene": _cmd_make_scene,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
