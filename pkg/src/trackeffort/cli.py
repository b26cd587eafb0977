"""Command-line entry point: evaluate, perturb, track, correlate, report.

The evaluate pipeline is driven by a TOML manifest describing a dataset
root, sequences, detector sets and tracker outputs::

    [dataset]
    root = "data"
    sequences = ["scene-01", "scene-02"]
    # optional, defaults shown:
    # gt = "{root}/{sequence}/gt/gt.txt"
    # seqinfo = "{root}/{sequence}/seqinfo.ini"

    [detectors]
    p1 = "{root}/{sequence}/det/p1.txt"

    [trackers]
    smoothing = "{root}/{sequence}/trk/{detector}__smoothing.txt"

    [options]
    alpha = 0.5
    iou_threshold = 0.5

Outputs land under fixed names for scriptability: ``<out>/scores.csv``,
``<out>/frames/<sequence>__<detector>__<tracker>.csv``,
``<out>/correlation.csv`` and ``<out>/correlation.svg``.
Option precedence is CLI flag > manifest [options] > built-in default.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import analysis, baselines, effort, mot_io, synth

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_OPTIONS = {
    "alpha": 0.5,
    "iou_threshold": 0.5,
    "gt_classes": [1],
    "min_visibility": 0.0,
    "require_flag": True,
    "id_mode": "union",
}


class CliError(Exception):
    """User-facing failure; message goes to stderr with a nonzero exit."""


@dataclass
class RunManifest:
    root: Path
    sequences: tuple[str, ...]
    detectors: dict[str, str]
    trackers: dict[str, str]
    gt_pattern: str = "{root}/{sequence}/gt/gt.txt"
    seqinfo_pattern: str = "{root}/{sequence}/seqinfo.ini"
    options: dict = field(default_factory=dict)

    def resolve(self, pattern: str, sequence: str, detector: str = "") -> Path:
        return Path(pattern.format(root=self.root, sequence=sequence, detector=detector))


def load_manifest(path: str | Path) -> RunManifest:
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError:
        raise CliError(f"manifest not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"manifest {path} is not valid TOML: {exc}")
    dataset = data.get("dataset", {})
    manifest = RunManifest(
        root=Path(dataset.get("root", ".")),
        sequences=tuple(dataset.get("sequences", ())),
        detectors=dict(data.get("detectors", {})),
        trackers=dict(data.get("trackers", {})),
        gt_pattern=dataset.get("gt", RunManifest.gt_pattern),
        seqinfo_pattern=dataset.get("seqinfo", RunManifest.seqinfo_pattern),
        options=dict(data.get("options", {})),
    )
    if not manifest.root.is_absolute():
        manifest.root = Path(path).parent / manifest.root
    return manifest


def _merged_options(manifest: RunManifest, args: argparse.Namespace) -> dict:
    options = dict(DEFAULT_OPTIONS)
    unknown = set(manifest.options) - set(DEFAULT_OPTIONS)
    if unknown:
        raise CliError(f"unknown manifest options: {sorted(unknown)}")
    options.update(manifest.options)
    if args.alpha is not None:
        options["alpha"] = args.alpha
    if args.iou_threshold is not None:
        options["iou_threshold"] = args.iou_threshold
    if args.gt_classes is not None:
        options["gt_classes"] = [int(c) for c in args.gt_classes.split(",") if c.strip()]
    if args.min_visibility is not None:
        options["min_visibility"] = args.min_visibility
    if args.id_mode is not None:
        options["id_mode"] = args.id_mode
    if not 0.0 <= options["alpha"] <= 1.0:
        raise CliError("alpha must lie in [0, 1]")
    if not 0.0 < options["iou_threshold"] <= 1.0:
        raise CliError("iou-threshold must lie in (0, 1]")
    return options


def _evaluate_one(task: dict) -> tuple[analysis.RunKey, effort.TemScores,
                                       baselines.BaselineScores]:
    bundle = mot_io.load_bundle(task["gt"], task["det"], task["trk"], task["seqinfo"])
    bundle = mot_io.filter_ground_truth(
        bundle,
        allowed_classes=set(task["gt_classes"]) if task["gt_classes"] else None,
        min_visibility=task["min_visibility"],
        require_flag=task["require_flag"],
    )
    tem = effort.evaluate_sequence(bundle, alpha=task["alpha"], combine=task["id_mode"])
    base = baselines.evaluate_baselines(bundle, iou_threshold=task["iou_threshold"])
    return task["key"], tem, base


def cmd_evaluate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    if not manifest.sequences:
        raise CliError("manifest lists no sequences")
    if not manifest.detectors:
        raise CliError("manifest lists no detector sets")
    if not manifest.trackers:
        raise CliError("manifest lists no trackers")
    options = _merged_options(manifest, args)

    tasks = []
    missing = []
    for sequence in manifest.sequences:
        gt = manifest.resolve(manifest.gt_pattern, sequence)
        seqinfo = manifest.resolve(manifest.seqinfo_pattern, sequence)
        for det_label, det_pattern in sorted(manifest.detectors.items()):
            det = manifest.resolve(det_pattern, sequence)
            for trk_label, trk_pattern in sorted(manifest.trackers.items()):
                trk = manifest.resolve(trk_pattern, sequence, detector=det_label)
                key = analysis.RunKey(sequence, det_label, trk_label)
                for p in (gt, seqinfo, det, trk):
                    if not p.exists():
                        missing.append(f"{'/'.join(key)}: {p}")
                tasks.append({
                    "key": key, "gt": gt, "det": det, "trk": trk, "seqinfo": seqinfo,
                    **{k: options[k] for k in DEFAULT_OPTIONS},
                })
    if missing and not args.continue_on_error:
        raise CliError("missing input files:\n  " + "\n  ".join(sorted(set(missing))))

    out_dir = Path(args.out)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    results = []
    failures = []
    tasks.sort(key=lambda t: t["key"])
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = pool.map(_evaluate_one_safe, tasks)
    else:
        outcomes = map(_evaluate_one_safe, tasks)
    for task, outcome in zip(tasks, outcomes):
        if isinstance(outcome, str):
            failures.append(f"{'/'.join(task['key'])}: {outcome}")
            if not args.continue_on_error:
                raise CliError("run failed — " + failures[-1])
            continue
        results.append(outcome)

    for key, tem, _ in results:
        effort.write_frame_components(tem, frames_dir / ("__".join(key) + ".csv"))
    table = analysis.aggregate(results)
    table.write_csv(out_dir / "scores.csv")

    print(f"evaluated {len(results)} run(s) -> {out_dir / 'scores.csv'}")
    if failures:
        print("failed runs:\n  " + "\n  ".join(failures), file=sys.stderr)
        return 1
    return 0


def _evaluate_one_safe(task: dict):
    try:
        return _evaluate_one(task)
    except Exception as exc:  # noqa: BLE001 - reported per run
        return f"{type(exc).__name__}: {exc}"


def _load_meta(args: argparse.Namespace) -> mot_io.SequenceMeta | None:
    if args.seqinfo:
        return mot_io.parse_seqinfo(args.seqinfo)
    if args.image_width and args.image_height:
        return mot_io.SequenceMeta(name="cli", frame_count=max(args.frame_count or 1, 1),
                                   image_width=args.image_width,
                                   image_height=args.image_height)
    return None


def cmd_perturb(args: argparse.Namespace) -> int:
    meta = _load_meta(args)
    if meta is None:
        raise CliError("perturb needs --seqinfo or --image-width/--image-height")
    try:
        profile = synth.resolve_profile(args.profile, args.config)
    except KeyError as exc:
        raise CliError(str(exc.args[0]))
    if args.seed is not None:
        profile = synth.PerturbationProfile(
            drop_prob=profile.drop_prob, fp_per_frame=profile.fp_per_frame,
            jitter_sigma=profile.jitter_sigma,
            confidence_model=profile.confidence_model, seed=args.seed)
    observations = mot_io.load_mot_file(args.gt, mot_io.SourceKind.GT)
    frames = mot_io.group_by_frame(observations, meta.frame_count, source=str(args.gt))
    detections = synth.perturb(frames, profile, meta.image_width, meta.image_height)
    flat = [obs for frame in sorted(detections) for obs in detections[frame]]
    mot_io.write_mot_file(flat, args.out, mot_io.SourceKind.DET)
    print(f"wrote {len(flat)} detections -> {args.out}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    try:
        config = synth.resolve_tracker(args.tracker, args.config)
    except KeyError as exc:
        raise CliError(str(exc.args[0]))
    observations = mot_io.load_mot_file(args.det, mot_io.SourceKind.DET)
    if args.seqinfo:
        frame_count = mot_io.parse_seqinfo(args.seqinfo).frame_count
    elif args.frame_count:
        frame_count = args.frame_count
    else:
        frame_count = max((o.frame for o in observations), default=0)
    frames = mot_io.group_by_frame(observations, frame_count, source=str(args.det))
    tracks = synth.reference_track(frames, config, frame_count)
    flat = [obs for frame in sorted(tracks) for obs in tracks[frame]]
    mot_io.write_mot_file(flat, args.out, mot_io.SourceKind.TRACK)
    print(f"wrote {len(flat)} track boxes -> {args.out}")
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    table = analysis.ScoreTable.read_csv(args.scores)
    if len(table.keys) < 2:
        raise CliError("correlation needs a scores CSV with at least 2 rows")
    matrix = analysis.correlation_matrix(table)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix.write_csv(out_dir / "correlation.csv")
    analysis.render_heatmap(matrix, out_dir / "correlation.svg")
    print(f"wrote {out_dir / 'correlation.csv'} and {out_dir / 'correlation.svg'}")
    return 0


REPORT_COLUMNS = ("ap50", "recall", "precision", "ata", "tem")


def cmd_report(args: argparse.Namespace) -> int:
    table = analysis.ScoreTable.read_csv(args.scores)
    header = ["sequence", "detector", "tracker", *REPORT_COLUMNS]
    rows = [header]
    for key, values in zip(table.keys, table.values):
        cells = [f"{values[table.columns.index(c)]:.3f}" if c in table.columns else "-"
                 for c in REPORT_COLUMNS]
        rows.append([key.sequence, key.detector, key.tracker, *cells])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for index, row in enumerate(rows):
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if index == 0:
            print("  ".join("-" * width for width in widths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackeffort",
        description="Detector-aware multi-object tracking evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score every manifest run and write scores.csv")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--alpha", type=float, default=None,
                        help="intra/inter weighting (default 0.5)")
    p_eval.add_argument("--iou-threshold", type=float, default=None,
                        help="threshold for the baseline measures (default 0.5)")
    p_eval.add_argument("--gt-classes", default=None,
                        help="comma-separated GT class ids to keep (default 1)")
    p_eval.add_argument("--min-visibility", type=float, default=None)
    group = p_eval.add_mutually_exclusive_group()
    group.add_argument("--union-ids", dest="id_mode", action="store_const",
                       const="union", default=None,
                       help="combine consecutive-frame GT ids by union (default)")
    group.add_argument("--intersect-ids", dest="id_mode", action="store_const",
                       const="intersection")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--continue-on-error", action="store_true")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pert = sub.add_parser("perturb", help="degrade a GT file into a detection set")
    p_pert.add_argument("--gt", required=True)
    p_pert.add_argument("--out", required=True)
    p_pert.add_argument("--profile", required=True,
                        help="built-in profile name (P1..P5) or a name in --config")
    p_pert.add_argument("--config", default=None, help="TOML file with [profile.*] tables")
    p_pert.add_argument("--seed", type=int, default=None, help="override the profile seed")
    p_pert.add_argument("--seqinfo", default=None)
    p_pert.add_argument("--image-width", type=float, default=None)
    p_pert.add_argument("--image-height", type=float, default=None)
    p_pert.add_argument("--frame-count", type=int, default=None)
    p_pert.set_defaults(func=cmd_perturb)

    p_trk = sub.add_parser("track", help="run the reference IOU tracker on detections")
    p_trk.add_argument("--det", required=True)
    p_trk.add_argument("--out", required=True)
    p_trk.add_argument("--tracker", default="smoothing",
                       help="built-in config name or a name in --config")
    p_trk.add_argument("--config", default=None, help="TOML file with [tracker.*] tables")
    p_trk.add_argument("--seqinfo", default=None)
    p_trk.add_argument("--frame-count", type=int, default=None)
    p_trk.set_defaults(func=cmd_track)

    p_corr = sub.add_parser("correlate", help="pairwise Pearson matrix from a scores CSV")
    p_corr.add_argument("--scores", required=True)
    p_corr.add_argument("--out", required=True)
    p_corr.set_defaults(func=cmd_correlate)

    p_rep = sub.add_parser("report", help="text table of the headline measures")
    p_rep.add_argument("--scores", required=True)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (mot_io.MotParseError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
