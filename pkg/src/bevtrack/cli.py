"""Command-line interface: a thin layer over the pipeline functions.

Exit codes: 0 success, 2 configuration error, 3 input format error,
4 evaluation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, EvalConfig, load_config
from .geometry import CalibrationError, load_calibration
from .metrics import EvaluationError, merge_track_tubes

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_EVAL = 4


def _eval_config(args) -> EvalConfig:
    if getattr(args, "config", None):
        return load_config(args.config)[1]
    return EvalConfig()


def _tracker_and_eval(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    if getattr(args, "preset", None):
        from .config import preset
        return preset(args.preset), EvalConfig()
    from .config import TrackerConfig
    return TrackerConfig(), EvalConfig()


def cmd_track(args) -> int:
    manifest = pipeline.track_file(
        args.detections, args.calib, args.out,
        config_path=args.config, preset_name=args.preset)
    print(f"wrote {manifest.out_path} ({manifest.n_frames} frames, "
          f"{manifest.n_records} detection records)")
    return 0


def cmd_simulate(args) -> int:
    spec = json.loads(Path(args.spec).read_text())
    paths = pipeline.simulate_to_dir(spec, args.seed, args.out_dir)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _load_rows(path):
    return [obj for _, obj in pipeline.read_jsonl(path)]


def cmd_evaluate(args) -> int:
    eval_cfg = _eval_config(args)
    trk_rows = _load_rows(args.tracks)
    gt_rows = _load_rows(args.gt)
    if args.merge_tubes:
        cfg = _tracker_and_eval(args)[0]
        trk_rows = merge_track_tubes(trk_rows, cfg.d_merge, cfg.g_merge)
    report = pipeline.evaluate_rows(trk_rows, gt_rows, eval_cfg)
    print(report.table())
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"report: {args.report}")
    return 0


def cmd_sweep_dropout(args) -> int:
    cfg, eval_cfg = _tracker_and_eval(args)
    rows = _load_rows(args.detections)
    gt_rows = _load_rows(args.gt)
    calibration = load_calibration(args.calib)
    result = pipeline.sweep_dropout(rows, calibration, gt_rows, cfg, eval_cfg,
                                    args.k_min, args.k_max, workers=args.workers)
    for k in sorted(result["aggregate"]):
        agg = result["aggregate"][k]
        print(f"k={k}: IDF1 {agg['IDF1']['mean']:.1f}±{agg['IDF1']['std']:.1f}  "
              f"MOTA {agg['MOTA']['mean']:.1f}±{agg['MOTA']['std']:.1f}  "
              f"GOSPA {agg['mean_GOSPA']['mean']:.3f}±{agg['mean_GOSPA']['std']:.3f}")
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
        print(f"full results: {args.out}")
    return 0


def cmd_sweep_param(args) -> int:
    cfg, eval_cfg = _tracker_and_eval(args)
    values = [float(v) for v in args.values.split(",")]
    rows = _load_rows(args.detections)
    gt_rows = _load_rows(args.gt)
    calibration = load_calibration(args.calib)
    result = pipeline.sweep_param(args.name, values, rows, calibration,
                                  gt_rows, cfg, eval_cfg)
    for row in result:
        print(f"{row['param']}={row['value']}: IDF1 {row['IDF1']:.1f}  "
              f"MOTA {row['MOTA']:.1f}  MOTP {row['MOTP']:.1f}  "
              f"GOSPA {row['mean_GOSPA']:.3f}")
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
    return 0


def cmd_calibrate_nees(args) -> int:
    eval_cfg = _eval_config(args)
    report = pipeline.calibrate_nees_rows(
        _load_rows(args.tracks), _load_rows(args.gt), eval_cfg)
    print(f"verdict: {report.verdict}")
    print(f"mean NEES {report.mean_nees:.4f} over {report.n} matches, "
          f"CI [{report.ci[0]:.4f}, {report.ci[1]:.4f}]")
    print(f"coverage 1-sigma {100 * report.coverage_1s:.1f}% (nominal 39.3%), "
          f"2-sigma {100 * report.coverage_2s:.1f}% (nominal 86.5%)")
    return 0


def cmd_merge_tubes(args) -> int:
    cfg = _tracker_and_eval(args)[0]
    rows = merge_track_tubes(_load_rows(args.tracks),
                             args.d_merge if args.d_merge is not None else cfg.d_merge,
                             args.g_merge if args.g_merge is not None else cfg.g_merge)
    pipeline.write_jsonl(rows, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevtrack", description="Multi-view BEV tracking pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run tracking over a detection stream")
    p.add_argument("--detections", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score tracks against ground truth")
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config")
    p.add_argument("--report")
    p.add_argument("--merge-tubes", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-dropout", help="evaluate all sensor subsets")
    p.add_argument("--detections", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--k-min", type=int, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_dropout)

    p = sub.add_parser("sweep-param", help="one-at-a-time parameter sensitivity")
    p.add_argument("--name", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--detections", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_param)

    p = sub.add_parser("calibrate-nees", help="NEES consistency test")
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_calibrate_nees)

    p = sub.add_parser("merge-tubes", help="stitch track fragments")
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--d-merge", type=float)
    p.add_argument("--g-merge", type=int)
    p.set_defaults(func=cmd_merge_tubes)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pipeline.InputFormatError, CalibrationError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EvaluationError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
