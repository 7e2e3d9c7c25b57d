"""
Command-line front end.

    synth       generate scenes, ground truth and optional detections/YOLO/radargrams
    match       fuse per-view detections into pipeline detections
    eval        score a match report against ground truth
    preprocess  run the radargram preprocessing chain and report entropy
    footprint   image-vs-volume data size arithmetic
    bench       noise-level robustness and threshold sweep on synthetic scenes

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from tqdm import tqdm

from .config import RunConfig
from .errors import DataError, PipefuseError, UsageError
from .evaluation import EvalSummary, evaluate, evaluate_scene
from .footprint import FootprintParams, footprint_report, format_footprint
from .formats import (
    YOLO_FRAMES_FILE,
    DetectionSet,
    read_class_map,
    read_detections,
    read_radargram,
    read_truth,
    read_yolo_frames,
    read_yolo_scene,
    truth_to_detections,
    write_class_map,
    write_detections,
    write_json,
    write_radargram,
    write_scene,
    write_truth,
    write_yolo_frames,
    write_yolo_scene,
    yolo_scene_ids,
)
from .reporter import MatchReport, ReportGenerator, SceneReport, load_report
from .scene_synth import field_radargram, generate_scene, perturb_boxes, render_bscan
from .signal_prep import CHAIN_ORDER, ChainParams, ablation_rows, apply_chain, chain_entropy
from .view_fusion import MatchConfig, ViewFrame, ViewKind, match_triples

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# True triples per noise level the bench defaults reach (250 scenes x 2 pipes)
MIN_BENCH_PAIRS = 500


class PipefuseArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors raise instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def _banner(title: str, lines: Sequence[str]) -> None:
    print(f"\n{'=' * 60}")
    print(title)
    print(f"{'=' * 60}")
    for line in lines:
        print(line)
    print(f"{'=' * 60}\n")


def _map_scenes(fn: Callable[[T], R], items: Sequence[T], threads: int, desc: str) -> List[R]:
    """Apply `fn` to every item, in a thread pool when threads > 1; input order is kept."""
    if threads <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=None)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=None))


def _match_scene(dets: DetectionSet, cfg: MatchConfig) -> SceneReport:
    result = match_triples(
        dets.boxes.get(ViewKind.BSCAN, []),
        dets.boxes.get(ViewKind.CSCAN, []),
        dets.boxes.get(ViewKind.DSCAN, []),
        dets.frames,
        cfg,
    )
    return SceneReport.from_result(dets.scene_id, result)


# =============================================================================
# synth
# =============================================================================

def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = Path(args.out)
    image_size = (cfg.image_width_px, cfg.image_height_px)
    if args.scenes < 0 or args.pipes < 0:
        raise UsageError(f"--scenes and --pipes must be >= 0, got {args.scenes} and {args.pipes}")
    if args.yolo:
        (out / "yolo").mkdir(parents=True, exist_ok=True)
        write_class_map(out / "yolo" / "classes.txt")

    def _one(k: int) -> Tuple[str, Dict[ViewKind, ViewFrame]]:
        scene_id = f"scene_{k:04d}"
        scene, gt = generate_scene(cfg.seed * 100_000 + k, args.pipes, scene_id=scene_id)
        write_scene(out / f"{scene_id}.scene.json", scene)
        write_truth(out / f"{scene_id}.truth.json", gt)
        dets = truth_to_detections(gt)
        if args.jitter_px is not None:
            boxes = perturb_boxes(gt, args.jitter_px, [cfg.seed, k], floor_px=args.floor_px)
            dets = DetectionSet(gt.scene_id, dict(gt.frames), boxes)
            write_detections(out / f"{scene_id}.dets.json", dets)
        if args.yolo:
            write_yolo_scene(out / "yolo", dets, image_size)
        if args.radargrams:
            write_radargram(out / "radargrams" / scene_id, render_bscan(scene))
        return scene_id, dict(gt.frames)

    written = _map_scenes(_one, list(range(args.scenes)), cfg.threads, "synth")
    if args.yolo:
        write_yolo_frames(out / "yolo", dict(written))
    _banner(f"Synthetic scenes written to {out}", [
        f"Scenes: {len(written)} | Pipes per scene: {args.pipes} | Seed: {cfg.seed}",
    ])
    return 0


# =============================================================================
# match
# =============================================================================

def _collect_detections(inputs: Sequence[str], cfg: RunConfig) -> List[DetectionSet]:
    image_size = (cfg.image_width_px, cfg.image_height_px)
    sets: Dict[str, DetectionSet] = {}

    def _add(dets: DetectionSet, source: Path):
        if dets.scene_id in sets:
            raise DataError(f"Scene {dets.scene_id} appears twice (again in {source})")
        sets[dets.scene_id] = dets

    for raw in inputs:
        path = Path(raw)
        if path.is_dir() and (path / "classes.txt").exists():
            classes = read_class_map(path / "classes.txt")
            scene_frames = read_yolo_frames(path)
            if scene_frames is None:
                logger.warning(f"{path} has no {YOLO_FRAMES_FILE}; using the configured view frames")
            for scene_id in yolo_scene_ids(path):
                if scene_frames is None:
                    frames = cfg.view_frames()
                elif scene_id in scene_frames:
                    frames = scene_frames[scene_id]
                else:
                    raise DataError(f"Scene {scene_id}: no frames in {path / YOLO_FRAMES_FILE}")
                _add(read_yolo_scene(path, scene_id, classes, frames, image_size), path)
        elif path.is_dir():
            files = sorted(path.glob("*.dets.json")) or sorted(path.glob("*.truth.json"))
            for file in files:
                _add(read_detections(file), file)
        elif path.exists():
            _add(read_detections(path), path)
        else:
            raise DataError(f"Input {path} does not exist")
    return [sets[k] for k in sorted(sets)]


def cmd_match(args: argparse.Namespace, cfg: RunConfig) -> int:
    det_sets = _collect_detections(args.inputs, cfg)
    match_cfg = cfg.match_config()
    scenes = _map_scenes(lambda d: _match_scene(d, match_cfg), det_sets, cfg.threads, "match")
    report = MatchReport(config=cfg.to_dict(), scenes=sorted(scenes, key=lambda s: s.scene_id))

    generator = ReportGenerator(output_dir=args.out)
    json_path = generator.save_json(report)
    html_path = generator.save_report(report)
    lines = [
        f"Scenes: {report.total_scenes} | Detections: {report.total_detections} | "
        f"Unmatched boxes: {report.total_unmatched}",
        f"HTML: {html_path}",
    ]
    if args.svg:
        lines.append(f"Histogram: {generator.save_histogram(report)}")
    _banner(f"Match Report Generated: {json_path}", lines)
    return 0


# =============================================================================
# eval
# =============================================================================

def _collect_truth(paths: Sequence[str]):
    truths = {}
    for raw in paths:
        path = Path(raw)
        files = sorted(path.glob("*.truth.json")) if path.is_dir() else [path]
        for file in files:
            gt = read_truth(file)
            if gt.scene_id in truths:
                raise DataError(f"Ground truth for {gt.scene_id} appears twice (again in {file})")
            truths[gt.scene_id] = gt
    return truths


def _exceedance_lines(summary: EvalSummary) -> List[str]:
    lines = []
    for pair, row in summary.exceedance().items():
        lines.append(
            f"{pair}: >{summary.threshold:g} {100 * row['above']:.1f}% | "
            f"<={summary.threshold:g} {100 * row['below']:.1f}% (n={row['n']})"
        )
    return lines


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    report = load_report(args.report)
    summary = evaluate(report, _collect_truth(args.truth), args.threshold)
    path = write_json(Path(args.out) / "eval.json", summary.to_dict())
    _banner(f"Evaluation written to {path}", [
        f"Truth: {summary.n_truth} | Detections: {summary.n_detections} | Correct: {summary.n_correct}",
        f"Precision: {100 * summary.precision:.1f}% | Recall: {100 * summary.recall:.1f}%",
        *_exceedance_lines(summary),
    ])
    return 0


# =============================================================================
# preprocess
# =============================================================================

def parse_steps(text: str) -> List[str]:
    steps = [s.strip() for s in text.split(",") if s.strip()]
    if steps == ["none"]:
        return []
    unknown = [s for s in steps if s not in CHAIN_ORDER]
    if unknown:
        raise UsageError(f"Unknown preprocessing step(s) {unknown}; choose from {', '.join(CHAIN_ORDER)}")
    return steps


def cmd_preprocess(args: argparse.Namespace, cfg: RunConfig) -> int:
    steps = parse_steps(args.steps)
    params = ChainParams(cfg.gain_alpha, cfg.lowpass_pass_mhz * 1e6, cfg.lowpass_stop_mhz * 1e6)
    out = Path(args.out)

    if args.corpus:
        corpus = [field_radargram(cfg.seed + i) for i in range(args.corpus)]
        rows = [
            {
                "steps": list(row),
                "mean_entropy": float(np.mean([chain_entropy(r, row, params, cfg.gray_levels) for r in corpus])),
            }
            for row in ablation_rows()
        ]
        path = write_json(out / "preprocess.json", {"corpus": args.corpus, "seed": cfg.seed, "ablation": rows})
        _banner(f"Ablation written to {path}", [
            f"{'+'.join(row['steps']) or 'raw':<26} IE {row['mean_entropy']:.4f} bits" for row in rows
        ])
        return 0

    if not args.input:
        raise UsageError("preprocess needs an input radargram or --corpus N")
    radargram = read_radargram(args.input)
    processed = apply_chain(radargram, steps, params)
    stem = Path(args.input).with_suffix("").name
    raw_path, _ = write_radargram(out / f"{stem}.processed", processed)
    entropy_value = chain_entropy(radargram, steps, params, cfg.gray_levels)
    doc = {"input": str(args.input), "steps": [s for s in CHAIN_ORDER if s in steps],
           "gray_levels": cfg.gray_levels, "entropy": entropy_value}
    if args.ablation:
        doc["ablation"] = [
            {"steps": list(row), "entropy": chain_entropy(radargram, row, params, cfg.gray_levels)}
            for row in ablation_rows()
        ]
    path = write_json(out / "preprocess.json", doc)
    _banner(f"Preprocessed radargram written to {raw_path}", [
        f"Steps: {', '.join(doc['steps']) or 'none'} | IE: {entropy_value:.4f} bits",
        f"Report: {path}",
    ])
    return 0


# =============================================================================
# footprint
# =============================================================================

def cmd_footprint(args: argparse.Namespace, cfg: RunConfig) -> int:
    params = FootprintParams(
        n_images=args.images,
        kb_per_image=args.kb_per_image,
        image_width_px=cfg.image_width_px,
        image_height_px=cfg.image_height_px,
        channels=args.channels,
        samples_per_km=args.samples_per_km,
        survey_km=args.survey_km,
        depth_points=args.depth_points,
        bytes_per_point=args.bytes_per_point,
    )
    report = footprint_report(params)
    path = write_json(Path(args.out) / "footprint.json", report)
    _banner(f"Footprint written to {path}", format_footprint(report))
    return 0


# =============================================================================
# bench
# =============================================================================

def cmd_bench(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Robustness protocol on synthetic scenes: per noise level, match the
    perturbed boxes and score them; then sweep the matching threshold on the
    baseline level and count accepted triples.
    """
    if args.scenes < 1 or args.pipes < 1:
        raise UsageError(f"bench needs --scenes and --pipes >= 1, got {args.scenes} and {args.pipes}")
    if args.scenes * args.pipes < MIN_BENCH_PAIRS:
        logger.warning(
            f"{args.scenes * args.pipes} true triples per noise level; "
            f"exceedance shares are only indicative below {MIN_BENCH_PAIRS}"
        )
    truths = [
        generate_scene(cfg.seed * 100_000 + k, args.pipes, scene_id=f"scene_{k:04d}")[1]
        for k in range(args.scenes)
    ]
    match_cfg = cfg.match_config()
    levels = []
    baseline_sets: List[DetectionSet] = []

    for index, (level, sigma) in enumerate(RunConfig.NOISE_LEVELS.items()):
        det_sets = [
            DetectionSet(gt.scene_id, dict(gt.frames),
                         perturb_boxes(gt, sigma, [cfg.seed, k, index], floor_px=RunConfig.DETECTOR_FLOOR_PX))
            for k, gt in enumerate(truths)
        ]
        if index == 0:
            baseline_sets = det_sets
        scenes = _map_scenes(lambda d: _match_scene(d, match_cfg), det_sets, cfg.threads, level)
        summary = EvalSummary()
        for scene, gt in zip(scenes, truths):
            evaluate_scene(scene, gt, summary)
        # Rows in noise order; write_json sorts object keys
        levels.append({
            "level": level,
            "extra_jitter_px": sigma,
            "floor_px": RunConfig.DETECTOR_FLOOR_PX,
            **summary.to_dict(),
        })

    sweep = []
    for threshold in RunConfig.SWEEP_THRESHOLDS:
        sweep_cfg = replace(match_cfg, matching_threshold=threshold)
        scenes = _map_scenes(lambda d: _match_scene(d, sweep_cfg), baseline_sets, cfg.threads,
                             f"sweep {threshold:g}")
        sweep.append({"threshold": threshold, "detections": sum(len(s.detections) for s in scenes)})

    path = write_json(Path(args.out) / "bench.json", {
        "scenes": args.scenes,
        "pipes": args.pipes,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "levels": levels,
        "sweep": sweep,
    })
    lines = []
    for row in levels:
        ex = row["exceedance"]
        lines.append(
            f"{row['level']:<9} P {100 * row['precision']:.1f}% R {100 * row['recall']:.1f}% | "
            + " ".join(f"{pair} {100 * ex[pair]['above']:.1f}%" for pair in ex)
        )
    lines.append("Sweep: " + ", ".join(f"{s['threshold']:g}->{s['detections']}" for s in sweep))
    _banner(f"Benchmark written to {path}", lines)
    return 0


# =============================================================================
# Parser
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = PipefuseArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override its values)")
    common.add_argument("--seed", type=int, default=None, help="Random seed (default 0)")
    common.add_argument("--threads", type=int, default=None, help="Worker threads for per-scene work")
    common.add_argument("--out", default="out", help="Output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")

    parser = PipefuseArgumentParser(prog="pipefuse", description="Three-view GPR pipeline fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="Generate synthetic scenes")
    synth.add_argument("--scenes", type=int, default=1)
    synth.add_argument("--pipes", type=int, default=2)
    synth.add_argument("--jitter-px", type=float, default=None, help="Also write perturbed detections")
    synth.add_argument("--floor-px", type=float, default=0.0, help="Detector jitter floor added to --jitter-px")
    synth.add_argument("--yolo", action="store_true", help="Also write YOLO .txt files and classes.txt")
    synth.add_argument("--radargrams", action="store_true", help="Also render a B-scan per scene")
    synth.set_defaults(func=cmd_synth)

    match = sub.add_parser("match", parents=[common], help="Match per-view detections")
    match.add_argument("inputs", nargs="+", help="Detection files, directories of them, or a YOLO directory")
    match.add_argument("--threshold", type=float, default=None, dest="matching_threshold")
    match.add_argument("--confidence", type=float, default=None, dest="confidence_threshold")
    match.add_argument("--pred-iou", type=float, default=None, dest="prediction_iou_threshold")
    match.add_argument("--mode", choices=("all", "table"), default=None, dest="pairwise_mode")
    match.add_argument("--svg", action="store_true", help="Also write diou_hist.svg")
    match.set_defaults(func=cmd_match)

    ev = sub.add_parser("eval", parents=[common], help="Score a match report")
    ev.add_argument("report", help="report.json from `match`")
    ev.add_argument("truth", nargs="+", help="Ground-truth files or directories")
    ev.add_argument("--threshold", type=float, default=None, help="Exceedance threshold (default 0.4)")
    ev.set_defaults(func=cmd_eval)

    pre = sub.add_parser("preprocess", parents=[common], help="Radargram preprocessing chain")
    pre.add_argument("input", nargs="?", help="Radargram (.f32 or .json sidecar)")
    pre.add_argument("--steps", default=",".join(CHAIN_ORDER), help="Comma list of gain, background, lowpass")
    pre.add_argument("--ablation", action="store_true", help="Entropy of every step subset")
    pre.add_argument("--corpus", type=int, default=0, help="Ablation over N synthetic field radargrams")
    pre.set_defaults(func=cmd_preprocess)

    fp = sub.add_parser("footprint", parents=[common], help="Data volume arithmetic")
    defaults = FootprintParams()
    fp.add_argument("--images", type=int, default=defaults.n_images)
    fp.add_argument("--kb-per-image", type=float, default=defaults.kb_per_image)
    fp.add_argument("--channels", type=int, default=defaults.channels)
    fp.add_argument("--samples-per-km", type=int, default=defaults.samples_per_km)
    fp.add_argument("--survey-km", type=float, default=defaults.survey_km)
    fp.add_argument("--depth-points", type=int, default=defaults.depth_points)
    fp.add_argument("--bytes-per-point", type=float, default=defaults.bytes_per_point)
    fp.set_defaults(func=cmd_footprint)

    bench = sub.add_parser("bench", parents=[common], help="Noise levels and threshold sweep")
    bench.add_argument("--scenes", type=int, default=250)
    bench.add_argument("--pipes", type=int, default=2)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _setup_logging(args.verbose, args.quiet)
        cfg = RunConfig.load(
            args.config,
            seed=args.seed,
            threads=args.threads,
            matching_threshold=getattr(args, "matching_threshold", None),
            confidence_threshold=getattr(args, "confidence_threshold", None),
            prediction_iou_threshold=getattr(args, "prediction_iou_threshold", None),
            pairwise_mode=getattr(args, "pairwise_mode", None),
        )
        logger.debug(f"Running {args.command} with {cfg.to_dict()}")
        return args.func(args, cfg)
    except PipefuseError as e:
        logger.error(str(e))
        print(f"pipefuse: error: {e}", file=sys.stderr)
        return e.exit_code
