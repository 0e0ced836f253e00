"""Command-line entry point: ``rawoffload <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .codec.network import default_weights, load_weights
from .codec.tiles import TileGrid
from .controller import Controller
from .evaluation.experiment import ExperimentConfig, run_experiment, write_outputs
from .evaluation.metrics import evaluate
from .evaluation.profiling import profile_offline
from .evaluation.reports import ap_csv, parse_detections, pareto_svg
from .netsim import generate_trace
from .pipeline.endpoints import EdgeServer, FrameEncoder
from .pipeline.scenario import MBPS, Scenario, load_scenario
from .pipeline.simulation import build_lut, build_scenes, summarize
from .rawframe import CfaPattern, parse_truth
from .scene import generate_scene, generate_sequence, read_corpus, write_corpus

log = logging.getLogger("rawoffload")


def _scenario(path: str | None) -> Scenario:
    return load_scenario(path) if path else Scenario()


def _print_summary(summary) -> None:
    print(
        f"frames={summary.completed} throughput={summary.throughput:.2f} FPS "
        f"latency mean={summary.mean_latency * 1e3:.2f} ms p95={summary.p95_latency * 1e3:.2f} ms "
        f"bytes/frame={summary.mean_frame_bytes:.0f} tiles/frame={summary.mean_tiles:.2f}"
        + (f" mAP={summary.map:.4f} F1={summary.f1:.4f}" if summary.map is not None else "")
    )


def cmd_trace_gen(args) -> int:
    trace = generate_trace(args.seed, args.duration, args.mean_rate * MBPS, args.step_interval)
    trace.save(args.out)
    print(f"wrote {len(trace.times)} samples, mean {trace.mean_rate() / MBPS:.3f} Mbps -> {args.out}")
    return 0


def cmd_scene_gen(args) -> int:
    pattern = CfaPattern[args.pattern]
    if args.sequence:
        scenes = generate_sequence(args.seed, args.count, args.width, args.height, args.objects, pattern)
    else:
        scenes = [generate_scene(args.seed + i, args.width, args.height, args.objects, pattern) for i in range(args.count)]
    write_corpus(args.out, scenes)
    print(f"wrote {len(scenes)} frames to {args.out}")
    return 0


def cmd_profile(args) -> int:
    corpus = read_corpus(args.corpus)
    weights = load_weights(args.weights) if args.weights else default_weights()
    grid_kwargs = dict(rows=args.rows, cols=args.cols, overlap=args.overlap)
    profile = profile_offline(corpus, weights, tx_threshold=args.tx_threshold_ms / 1e3, grid_kwargs=grid_kwargs)
    profile.lut.save(args.out_lut)
    Path(args.out_csv).write_text(profile.csv())
    if args.svg:
        Path(args.svg).write_text(pareto_svg(profile.rows))
    sys.stdout.write(profile.csv())
    return 0


def _run(args, all_tiles: bool) -> int:
    result = run_experiment(
        ExperimentConfig(
            scenario=_scenario(args.scenario),
            weights=getattr(args, "weights", None),
            all_tiles=all_tiles,
            luminosity=args.luminosity,
            trace=getattr(args, "trace", None),
        )
    )
    write_outputs(result, Path(args.out), plots=args.plots)
    _print_summary(result.summary)
    return 0


def cmd_simulate(args) -> int:
    return _run(args, all_tiles=False)


def cmd_ablate(args) -> int:
    return _run(args, all_tiles=args.mode == "alltiles")


def _frame_files(directory: str) -> dict[str, Path]:
    return {p.stem: p for p in sorted(Path(directory).glob("*.txt"))}


def cmd_eval(args) -> int:
    dets_files = _frame_files(args.detections)
    truth_files = _frame_files(args.truth)
    if not truth_files:
        raise ValueError(f"no truth files in {args.truth}")
    missing = sorted(set(dets_files) - set(truth_files))
    if missing:
        raise ValueError(f"detections without truth: {', '.join(missing)}")
    dets, truths = [], []
    for stem, path in truth_files.items():
        truths.append(parse_truth(path.read_text()))
        dets.append(parse_detections(dets_files[stem].read_text()) if stem in dets_files else [])
    result = evaluate(dets, truths, iou_threshold=args.iou, conf_threshold=args.conf)
    text = ap_csv(result)
    Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    from .pipeline.wallclock import ServerThread

    sc = _scenario(args.scenario)
    weights = load_weights(args.weights) if args.weights else default_weights()
    grid = TileGrid(sc.width, sc.height, sc.rows, sc.cols, sc.overlap)
    server = ServerThread(EdgeServer(weights, grid, fill_value=sc.fill), args.host, args.port, max_connections=None)
    print(f"listening on {server.address[0]}:{server.address[1]}", flush=True)
    server.start()
    try:
        server.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_stream(args) -> int:
    from .pipeline.wallclock import run_client

    sc = _scenario(args.scenario)
    weights = load_weights(args.weights) if args.weights else default_weights()
    grid = TileGrid(sc.width, sc.height, sc.rows, sc.cols, sc.overlap)
    controller = Controller(build_lut(sc), grid, window=sc.window, min_confidence=sc.min_confidence, all_tiles=sc.all_tiles)
    run = run_client(build_scenes(sc), controller, FrameEncoder(weights, grid), (args.host, args.port), mode=sc.mode)
    summary = summarize(run.frames)
    _print_summary(summary)
    if args.out:
        from .evaluation.reports import frames_csv

        Path(args.out).write_text(frames_csv(run.frames))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rawoffload", description="RAW-frame edge offloading toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("trace-gen", help="generate a random-walk bandwidth trace")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--duration", type=float, required=True, help="seconds")
    s.add_argument("--mean-rate", type=float, required=True, help="Mbps")
    s.add_argument("--step-interval", type=float, default=0.1, help="seconds")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_trace_gen)

    s = sub.add_parser("scene-gen", help="write synthetic RAW frames with truth sidecars")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--width", type=int, default=768)
    s.add_argument("--height", type=int, default=512)
    s.add_argument("--objects", type=int, default=3)
    s.add_argument("--pattern", choices=[c.name for c in CfaPattern], default="RGGB")
    s.add_argument("--sequence", action="store_true", help="moving objects instead of independent scenes")
    s.set_defaults(func=cmd_scene_gen)

    s = sub.add_parser("profile", help="profile codec configs on a corpus and emit the LUT")
    s.add_argument("--corpus", required=True)
    s.add_argument("--weights")
    s.add_argument("--out-lut", required=True)
    s.add_argument("--out-csv", required=True)
    s.add_argument("--svg", help="optional Pareto plot")
    s.add_argument("--tx-threshold-ms", type=float, default=25.0)
    s.add_argument("--rows", type=int, default=4)
    s.add_argument("--cols", type=int, default=3)
    s.add_argument("--overlap", type=int, default=32)
    s.set_defaults(func=cmd_profile)

    for name, func, help_text in (
        ("simulate", cmd_simulate, "virtual-clock run of a scenario"),
        ("ablate", cmd_ablate, "virtual-clock run with or without tile selection"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--scenario")
        if name == "simulate":
            s.add_argument("--trace")
            s.add_argument("--weights")
        else:
            s.add_argument("--mode", choices=("alltiles", "default"), default="default")
        s.add_argument("--luminosity", type=float, default=1.0)
        s.add_argument("--plots", action="store_true", help="also write a latency SVG")
        s.add_argument("--out", required=True, help="per-frame CSV; summary goes to <stem>_summary.csv")
        s.set_defaults(func=func)

    s = sub.add_parser("eval", help="score detection files against truth files")
    s.add_argument("--detections", required=True, help="directory of <frame>.txt detection files")
    s.add_argument("--truth", required=True, help="directory of <frame>.txt truth files")
    s.add_argument("--out", required=True)
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--conf", type=float, default=0.25)
    s.set_defaults(func=cmd_eval)

    for name, func, help_text in (
        ("serve", cmd_serve, "run the edge server over TCP"),
        ("stream", cmd_stream, "stream a scenario to a running server"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--scenario")
        s.add_argument("--weights")
        s.add_argument("--host", default="127.0.0.1")
        s.add_argument("--port", type=int, default=9000)
        if name == "stream":
            s.add_argument("--out")
        s.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
