"""Command-line interface: run, synth, eval, bench.

Every failing invocation writes one machine-parsable line to stderr::

    error code=<int> kind=<slug> message=<text>

Exit codes: 0 success, 1 enforced budget exceeded, 2 bad calibration,
3 malformed frames, 4 usage error (unknown scenario, zero repetitions,
bad flags), 5 truth mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from .calibration import default_d435i_calibration, load_calibration, save_calibration
from .costmap import GridSpec, write_costmap
from .errors import CalibrationError, FrameParseError
from .frames import parse_frames_file, write_frames
from .grouping import GroupingConfig
from .metrics import keypoint_errors, scenario_errors, time_stages
from .pipeline import PipelineConfig, parse_annotations, process_frame, write_annotations
from .scenarios import get_scenario, load_scenario_spec, read_truth, synthesize_scenario, write_truth
from .skeleton import KEYPOINT_NAMES

EXIT_BUDGET = 1
EXIT_CALIBRATION = 2
EXIT_FRAMES = 3
EXIT_USAGE = 4
EXIT_TRUTH = 5


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _fail_line(code: int, kind: str, message: str) -> None:
    text = " ".join(str(message).split())
    print(f"error code={code} kind={kind} message={text}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 4, not argparse's default 2
        raise CliError(EXIT_USAGE, "usage", message)


def _out_dir(args) -> Path:
    if args.out is None:
        raise CliError(EXIT_USAGE, "usage", "no output directory (use --out or GROUPSENSE_OUT)")
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _pipeline_config(args) -> PipelineConfig:
    try:
        grouping = GroupingConfig(
            epsilon=args.epsilon,
            n_min=args.n_min,
            area_threshold=args.area_threshold,
            dispersion_threshold=args.dispersion_threshold,
            max_ray_length=args.max_ray_length,
        )
        if args.min_confidence < 0.0 or args.min_confidence > 1.0:
            raise ValueError("min-confidence must be in [0, 1]")
        if args.min_valid_keypoints < 1:
            raise ValueError("min-valid-keypoints must be positive")
        return PipelineConfig(
            min_confidence=args.min_confidence,
            min_valid_keypoints=args.min_valid_keypoints,
            grouping=grouping,
            inflation_radius=args.inflation_radius,
            decay_rate=args.decay_rate,
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "usage", str(exc))


def _grid_spec(args) -> GridSpec | None:
    if args.no_costmap:
        return None
    try:
        size = args.grid_size
        cells = int(round(size / args.grid_resolution))
        return GridSpec(
            origin_x=-size / 2.0,
            origin_y=-size / 2.0,
            resolution=args.grid_resolution,
            width=cells,
            height=cells,
        )
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "usage", str(exc))


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-confidence", type=float, default=0.3, help="keypoint acceptance threshold")
    p.add_argument("--min-valid-keypoints", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=2.0, help="clustering radius (m)")
    p.add_argument("--n-min", type=int, default=2, help="clustering density minimum")
    p.add_argument("--area-threshold", type=float, default=3.0, help="zone area limit (m^2)")
    p.add_argument("--dispersion-threshold", type=float, default=2.0, help="dispersion limit (m)")
    p.add_argument("--max-ray-length", type=float, default=8.0)
    p.add_argument("--inflation-radius", type=float, default=0.5)
    p.add_argument("--decay-rate", type=float, default=3.0)


def cmd_run(args) -> int:
    out = _out_dir(args)
    try:
        calib = load_calibration(args.calib)
    except (OSError, CalibrationError) as exc:
        raise CliError(EXIT_CALIBRATION, "calibration", str(exc))
    try:
        frames, skipped = parse_frames_file(args.frames)
    except OSError as exc:
        raise CliError(EXIT_FRAMES, "frames", str(exc))
    except FrameParseError as exc:
        raise CliError(EXIT_FRAMES, "frames", str(exc))
    config = _pipeline_config(args)
    grid = _grid_spec(args)

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(lambda f: process_frame(f, calib, config, grid), frames))
    else:
        results = [process_frame(f, calib, config, grid) for f in frames]

    with open(out / "annotations.jsonl", "w", encoding="utf-8") as fh:
        write_annotations(results, fh)
    costmap_files = []
    timestamp = "-" if args.no_timestamp else None
    for result in results:
        if result.costmap is not None:
            name = f"costmap_{result.frame_id:06d}.smap"
            write_costmap(result.costmap, out / name, timestamp=timestamp)
            costmap_files.append(name)

    summary = {
        "config": {
            "pipeline": {
                "min_confidence": config.min_confidence,
                "min_valid_keypoints": config.min_valid_keypoints,
                "inflation_radius": config.inflation_radius,
                "decay_rate": config.decay_rate,
            },
            "grouping": asdict(config.grouping),
            "grid": asdict(grid) if grid is not None else None,
            "calibration": str(args.calib),
            "frames": str(args.frames),
        },
        "frames_processed": len(results),
        "persons_total": sum(len(r.states) for r in results),
        "groups_total": sum(len(r.groups) for r in results),
        "dropped_persons": sum(len(r.dropped) for r in results),
        "skipped_records": [[s.line_number, s.reason] for s in skipped],
        "costmap_files": costmap_files,
    }
    if not args.no_timestamp:
        summary["created"] = datetime.now(timezone.utc).isoformat()
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    if args.figures:
        from . import figures

        pick = next((r for r in results if r.groups), results[0] if results else None)
        if pick is not None:
            figures.save_scene_figure(
                pick.states, pick.groups, out / f"scene_{pick.frame_id:06d}.png",
                title=f"Frame {pick.frame_id}",
            )
            if pick.costmap is not None:
                figures.save_costmap_figure(pick.costmap, out / f"costmap_{pick.frame_id:06d}.png")
    for s in skipped:
        print(f"warning: skipped record at line {s.line_number}: {s.reason}", file=sys.stderr)
    print(
        f"processed {len(results)} frames: {summary['persons_total']} person states, "
        f"{summary['groups_total']} interacting groups -> {out}"
    )
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    spec_arg = args.scenario
    if Path(spec_arg).suffix == ".json" and Path(spec_arg).exists():
        spec = load_scenario_spec(spec_arg)
    else:
        try:
            spec = get_scenario(spec_arg)
        except KeyError:
            raise CliError(EXIT_USAGE, "scenario", f"unknown scenario {spec_arg!r}")
    spec = spec.with_overrides(
        sigma_px=args.noise_px if args.noise_px is not None else spec.sigma_px,
        sigma_depth=args.noise_depth if args.noise_depth is not None else spec.sigma_depth,
        seed=args.seed if args.seed is not None else spec.seed,
        n_frames=args.frames if args.frames is not None else spec.n_frames,
    )
    calib = default_d435i_calibration()
    try:
        frames, truth = synthesize_scenario(spec, calib)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "scenario", str(exc))
    write_frames(frames, out / "frames.jsonl")
    write_truth(truth, out / "truth.json")
    save_calibration(calib, out / "calibration.json")
    print(
        f"synthesized {spec.name}: {len(frames)} frames, {len(spec.persons)} persons -> {out}"
    )
    return 0


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_eval(args) -> int:
    out = _out_dir(args)
    try:
        truth = read_truth(args.truth)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(EXIT_TRUTH, "truth", f"cannot read truth file: {exc}")
    annotations = Path(args.run) / "annotations.jsonl"
    try:
        results = parse_annotations(annotations.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_TRUTH, "truth", f"cannot read run output: {exc}")
    except FrameParseError as exc:
        raise CliError(EXIT_TRUTH, "truth", f"bad annotations: {exc}")
    got_ids = [r.frame_id for r in results]
    missing = sorted(set(truth.frame_ids) - set(got_ids))
    extra = sorted(set(got_ids) - set(truth.frame_ids))
    if missing or extra:
        raise CliError(
            EXIT_TRUTH,
            "truth",
            f"frame ids differ from truth (missing={missing[:20]} extra={extra[:20]})",
        )

    kp_rows = keypoint_errors(results, truth, gate=args.gate)
    errors = scenario_errors(results, truth, gate=args.gate)

    _write_csv(
        out / "keypoint_errors.csv",
        ["index", "name", "mae_m", "rmse_m", "pe", "samples"],
        [
            [r.index, KEYPOINT_NAMES[r.index] if r.index >= 0 else "all", r.mae, r.rmse, r.pe, r.count]
            for r in kp_rows
        ],
    )
    _write_csv(
        out / "scenario_rmse.csv",
        [
            "scenario", "iza_m2", "ipx_m", "ipy_m", "hpx_m", "hpy_m", "hfd_deg",
            "frames", "detection_failures", "persons_matched", "persons_missed",
        ],
        [[
            truth.scenario, errors.iza, errors.ipx, errors.ipy, errors.hpx, errors.hpy,
            errors.hfd_deg, errors.frames, errors.detection_failures,
            errors.persons_matched, errors.persons_missed,
        ]],
    )

    lines = [
        f"scenario {truth.scenario}: {errors.frames} frames, "
        f"{errors.detection_failures} grouping mismatches",
        "",
        "RMSE  IZA(m2)   IPX(m)   IPY(m)   HPX(m)   HPY(m)   HFD(deg)",
        f"      {errors.iza:8.4f} {errors.ipx:8.4f} {errors.ipy:8.4f}"
        f" {errors.hpx:8.4f} {errors.hpy:8.4f} {errors.hfd_deg:9.4f}",
        "",
        "keypoint errors (m):",
        f"{'keypoint':>16} {'MAE':>8} {'RMSE':>8} {'PE':>8} {'n':>6}",
    ]
    for r in kp_rows:
        name = KEYPOINT_NAMES[r.index] if r.index >= 0 else "all"
        lines.append(f"{name:>16} {r.mae:8.4f} {r.rmse:8.4f} {r.pe:8.4f} {r.count:6d}")
    report = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(report, encoding="utf-8")
    print(report, end="")

    if args.figures:
        from . import figures

        figures.save_keypoint_error_figure(kp_rows, out / "keypoint_errors.png")
        figures.save_scenario_error_figure(errors, out / "scenario_rmse.png")
    return 0


def cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise CliError(EXIT_USAGE, "bench", "repetitions must be at least 1")
    try:
        calib = load_calibration(args.calib)
    except (OSError, CalibrationError) as exc:
        raise CliError(EXIT_CALIBRATION, "calibration", str(exc))
    try:
        frames, _ = parse_frames_file(args.frames)
    except (OSError, FrameParseError) as exc:
        raise CliError(EXIT_FRAMES, "frames", str(exc))
    if not frames:
        raise CliError(EXIT_FRAMES, "frames", "no frames to benchmark")
    config = _pipeline_config(args)
    grid = _grid_spec(args)

    for frame in frames:  # input marshaling belongs to ingest, not the timed stages
        frame.keypoint_arrays()
    results = []
    for _ in range(args.repetitions):
        for frame in frames:
            results.append(process_frame(frame, calib, config, grid))
    report = time_stages(results, warmup=args.warmup)

    core_ms = 0.0
    rows = []
    print(f"{'stage':>14} {'mean_ms':>9} {'p95_ms':>9} {'frames':>7}")
    for stage in report.stages:
        rows.append([stage.stage, stage.mean_ms, stage.p95_ms, stage.count])
        print(f"{stage.stage:>14} {stage.mean_ms:9.4f} {stage.p95_ms:9.4f} {stage.count:7d}")
        if stage.stage in ("localization", "grouping"):
            core_ms += stage.mean_ms
    print(f"{'core total':>14} {core_ms:9.4f}  (budget {args.budget_ms} ms)")

    if args.out is not None:
        out = _out_dir(args)
        _write_csv(out / "stage_timings.csv", ["stage", "mean_ms", "p95_ms", "frames"], rows)
        if args.figures:
            from . import figures

            figures.save_timing_figure(report, out / "stage_timings.png")
    if args.enforce and core_ms > args.budget_ms:
        _fail_line(EXIT_BUDGET, "budget", f"core pipeline {core_ms:.4f} ms > {args.budget_ms} ms")
        return EXIT_BUDGET
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groupsense", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    default_out = os.environ.get("GROUPSENSE_OUT")

    run = sub.add_parser("run", help="recognize groups in a frame file")
    run.add_argument("--calib", required=True, help="calibration JSON path")
    run.add_argument("--frames", required=True, help="frame JSONL path")
    run.add_argument("--out", default=default_out, help="output directory")
    _add_pipeline_flags(run)
    run.add_argument("--grid-resolution", type=float, default=0.05, help="costmap cell size (m)")
    run.add_argument("--grid-size", type=float, default=12.0, help="costmap side length (m)")
    run.add_argument("--no-costmap", action="store_true", help="skip costmap emission")
    run.add_argument("--no-timestamp", action="store_true", help="bit-exact reproducible outputs")
    run.add_argument("--figures", action="store_true", help="render scene/costmap figures")
    run.add_argument("--parallel", type=int, default=1, help="worker threads (order preserved)")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="synthesize a scenario with ground truth")
    synth.add_argument("scenario", help="builtin name (S1..S5) or spec JSON path")
    synth.add_argument("--out", default=default_out)
    synth.add_argument("--frames", type=int, default=None, help="number of frames")
    synth.add_argument("--noise-px", type=float, default=None, help="pixel noise sigma")
    synth.add_argument("--noise-depth", type=float, default=None, help="depth noise sigma (m)")
    synth.add_argument("--seed", type=int, default=None)
    synth.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="score a run against a truth file")
    ev.add_argument("--run", required=True, help="run output directory")
    ev.add_argument("--truth", required=True, help="truth JSON path")
    ev.add_argument("--out", default=default_out)
    ev.add_argument("--gate", type=float, default=0.5, help="association gate (m)")
    ev.add_argument("--no-figures", dest="figures", action="store_false")
    ev.set_defaults(func=cmd_eval, figures=True)

    bench = sub.add_parser("bench", help="time the pipeline stages")
    bench.add_argument("--calib", required=True)
    bench.add_argument("--frames", required=True)
    bench.add_argument("--out", default=None)
    bench.add_argument("--repetitions", type=int, default=1)
    bench.add_argument("--warmup", type=int, default=50, help="frames excluded from stats")
    bench.add_argument("--budget-ms", type=float, default=1.0)
    bench.add_argument("--enforce", action="store_true", help="exit nonzero over budget")
    bench.add_argument("--no-figures", dest="figures", action="store_false")
    bench.set_defaults(func=cmd_bench, figures=True)
    _add_pipeline_flags(bench)
    bench.add_argument("--grid-resolution", type=float, default=0.05)
    bench.add_argument("--grid-size", type=float, default=12.0)
    bench.add_argument("--no-costmap", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _fail_line(exc.code, exc.kind, str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
