"""Deterministic virtual-clock execution of client, link and edge server.

Every stage is a single FIFO worker. Client-side hand-offs go through
bounded queues (a worker that finishes while the next queue is full holds its
item until a slot frees up). The server side and the two link directions
buffer without bound. Because every worker is FIFO, frame k's timestamps only
depend on frames before it, so the run is evaluated frame by frame instead of
through an event heap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..codec.network import CodecWeights, default_weights, load_weights
from ..codec.tiles import TileGrid
from ..controller import BandwidthSample, Controller, Lut, estimate_bandwidth
from ..netsim import BandwidthTrace, Link, load_trace
from ..rawframe import BoundingBox, CfaPattern, scale_luminosity
from ..scene import SyntheticScene, generate_scene, generate_sequence
from .endpoints import EdgeServer, FrameEncoder
from .messages import ResultMessage
from .scenario import MBPS, Scenario, StageTiming


@dataclass
class FrameMetrics:
    frame_id: int
    captured: float
    rendered: float
    transmitted_bytes: int
    tiles_sent: int
    config_id: int
    key_frame: bool
    eab: float
    dropped: bool = False
    stages: dict[str, float] = field(default_factory=dict)

    @property
    def e2e_latency(self) -> float:
        return self.rendered - self.captured


@dataclass
class RunSummary:
    completed: int
    throughput: float
    active_duration: float
    window_frames: int
    mean_latency: float
    p95_latency: float
    max_latency: float
    mean_frame_bytes: float
    mean_tiles: float
    map: float | None = None
    f1: float | None = None


@dataclass
class SimulationResult:
    summary: RunSummary
    frames: list[FrameMetrics]
    detections: list[list[BoundingBox]]
    truths: list[list[BoundingBox]]


def summarize(frames: Sequence[FrameMetrics]) -> RunSummary:
    """Throughput counts completions after the first one over the span
    between first and last completion, i.e. the steady-state rate."""
    done = [f for f in frames if not f.dropped]
    if not done:
        return RunSummary(0, 0.0, 0.0, 0, math.nan, math.nan, math.nan, math.nan, math.nan)
    ends = sorted(f.rendered for f in done)
    span = ends[-1] - ends[0]
    window = len(ends) - 1
    throughput = window / span if span > 0 else math.inf
    lat = np.array([f.e2e_latency for f in done])
    return RunSummary(
        completed=len(done),
        throughput=throughput,
        active_duration=span,
        window_frames=window,
        mean_latency=float(lat.mean()),
        p95_latency=float(np.percentile(lat, 95)),
        max_latency=float(lat.max()),
        mean_frame_bytes=float(np.mean([f.transmitted_bytes for f in done])),
        mean_tiles=float(np.mean([f.tiles_sent for f in done])),
    )


def run_simulation(
    scenes: Sequence[SyntheticScene],
    trace: BandwidthTrace,
    timing: StageTiming,
    controller: Controller,
    encoder: FrameEncoder,
    server: EdgeServer,
    mode: str = "pipelined",
    queue_depth: int = 2,
    propagation_delay: float = 0.002,
    server_overlap: bool = True,
) -> SimulationResult:
    """``server_overlap`` lets the server decode frame k+1 while frame k is
    in inference; when off, decode and inference form one serial stage."""
    if mode not in ("pipelined", "serialized"):
        raise ValueError(f"unknown mode {mode!r}")
    serialized = mode == "serialized"
    q = queue_depth
    up = Link(trace, propagation_delay)
    down = Link(trace, propagation_delay)

    n = len(scenes)
    cap_depart = [0.0] * n
    dem_start = [0.0] * n
    dem_done = [0.0] * n
    dem_depart = [0.0] * n
    enc_start = [0.0] * n
    enc_depart = [0.0] * n
    tx_start = [0.0] * n
    uplink = []
    dec_done = [0.0] * n
    inf_done = [0.0] * n
    result_arrival = [0.0] * n
    render_done = [0.0] * n
    results: list[ResultMessage] = []

    metrics: list[FrameMetrics] = []
    delivered = -1  # newest frame whose result has been handed to the controller
    for k, scene in enumerate(scenes):
        frame = scene.frame

        release = k * timing.frame_interval
        cap_start = max(release, cap_depart[k - 1] if k else 0.0)
        cap_done = cap_start + timing.capture
        # capture hands off to the encoder (pipelined) or the demosaicer
        # (serialized) and, when pipelined, to the demosaicer as well
        gates = [cap_done]
        if k >= q:
            gates.append(dem_start[k - q])
            if not serialized:
                gates.append(enc_start[k - q])
        cap_depart[k] = max(gates)

        dem_start[k] = max(cap_depart[k], dem_depart[k - 1] if k else 0.0)
        dem_done[k] = dem_start[k] + timing.demosaic
        if serialized:
            dem_depart[k] = max(dem_done[k], enc_start[k - q] if k >= q else 0.0)
            enc_arrive = dem_depart[k]
        else:
            dem_depart[k] = dem_done[k]
            enc_arrive = cap_depart[k]

        enc_start[k] = max(enc_arrive, enc_depart[k - 1] if k else 0.0)
        now = enc_start[k]
        newest = delivered
        while newest + 1 < k and result_arrival[newest + 1] <= now:
            newest += 1
        if newest > delivered:
            delivered = newest
            if results[delivered].ok:
                controller.receive(results[delivered].detections)
        eab = math.inf
        finished = [x for x in uplink if x.end <= now]
        if finished:
            last = finished[-1]
            eab = estimate_bandwidth(BandwidthSample(last.nbytes, last.start, last.end))
        plan = controller.adapt(eab)
        msg = encoder.encode(frame, plan, k)
        payload = msg.serialize()
        enc_done = enc_start[k] + timing.encode

        enc_depart[k] = max(enc_done, tx_start[k - q] if k >= q else 0.0)
        xfer = up.transmit(len(payload), at=enc_depart[k])
        uplink.append(xfer)
        tx_start[k] = xfer.start

        reply = server.handle(payload)
        result = ResultMessage.deserialize(reply)
        results.append(result)
        if server_overlap:
            dec_start = max(xfer.arrival, dec_done[k - 1] if k else 0.0)
        else:
            dec_start = max(xfer.arrival, inf_done[k - 1] if k else 0.0)
        dec_done[k] = dec_start + timing.decode
        inf_start = max(dec_done[k], inf_done[k - 1] if k else 0.0)
        inf_done[k] = inf_start + timing.inference
        back = down.transmit(len(reply), at=inf_done[k])
        result_arrival[k] = back.arrival

        render_start = max(back.arrival, dem_done[k], render_done[k - 1] if k else 0.0)
        render_done[k] = render_start + timing.render

        stages = {
            "capture_block": cap_depart[k] - cap_done,
            "encode_wait": enc_start[k] - enc_arrive,
            "encode": timing.encode,
            "transmit_wait": xfer.start - enc_done,
            "transmit": xfer.end - xfer.start,
            "uplink_propagation": xfer.arrival - xfer.end,
            "decode_wait": dec_start - xfer.arrival,
            "decode": timing.decode,
            "inference_wait": inf_start - dec_done[k],
            "inference": timing.inference,
            "return_wait": back.start - inf_done[k],
            "result_return": back.end - back.start,
            "downlink_propagation": back.arrival - back.end,
            "render_wait": render_start - back.arrival,
            "render": timing.render,
        }
        if serialized:
            stages["demosaic_wait"] = dem_start[k] - cap_depart[k]
            stages["demosaic"] = timing.demosaic
            stages["demosaic_block"] = dem_depart[k] - dem_done[k]
        metrics.append(
            FrameMetrics(
                frame_id=k,
                captured=cap_done,
                rendered=render_done[k],
                transmitted_bytes=len(payload),
                tiles_sent=plan.tile_count,
                config_id=plan.config.id,
                key_frame=plan.is_key_frame,
                eab=eab,
                stages=stages,
            )
        )

    return SimulationResult(
        summarize(metrics),
        metrics,
        [r.detections if r.ok else [] for r in results],
        [s.truth for s in scenes],
    )


# ---- scenario wiring ----


def build_grid(sc: Scenario) -> TileGrid:
    return TileGrid(sc.width, sc.height, sc.rows, sc.cols, sc.overlap)


def build_weights(sc: Scenario) -> CodecWeights:
    return load_weights(sc.weights) if sc.weights else default_weights()


def build_trace(sc: Scenario) -> BandwidthTrace:
    return load_trace(sc.trace) if sc.trace else BandwidthTrace.constant(sc.bandwidth_mbps * MBPS)


def build_scenes(sc: Scenario) -> list[SyntheticScene]:
    scenes = generate_sequence(
        sc.seed,
        sc.frames,
        sc.width,
        sc.height,
        sc.objects,
        CfaPattern[sc.pattern],
        max_speed=sc.max_speed,
    )
    if sc.luminosity != 1:
        scenes = [SyntheticScene(scale_luminosity(s.frame, sc.luminosity), s.truth, s.seed) for s in scenes]
    return scenes


@lru_cache(maxsize=16)
def _profiled_lut(width, height, rows, cols, overlap, objects, pattern, n_scenes, tx_threshold, weights_path) -> Lut:
    from ..evaluation.profiling import profile_offline

    weights = load_weights(weights_path) if weights_path else default_weights()
    # held-out seeds, disjoint from the run's scene seeds
    corpus = [
        generate_scene(10_000 + i, width, height, max(objects, 1), CfaPattern[pattern]) for i in range(n_scenes)
    ]
    profile = profile_offline(
        corpus, weights, tx_threshold=tx_threshold, grid_kwargs=dict(rows=rows, cols=cols, overlap=overlap)
    )
    return profile.lut


def build_lut(sc: Scenario) -> Lut:
    if sc.lut:
        return Lut.load(sc.lut)
    return _profiled_lut(
        sc.width,
        sc.height,
        sc.rows,
        sc.cols,
        sc.overlap,
        sc.objects,
        sc.pattern,
        sc.profile_scenes,
        sc.tx_threshold_ms / 1e3,
        sc.weights,
    )


def simulate(sc: Scenario, scenes: Sequence[SyntheticScene] | None = None, lut: Lut | None = None) -> SimulationResult:
    grid = build_grid(sc)
    weights = build_weights(sc)
    controller = Controller(
        lut or build_lut(sc), grid, window=sc.window, min_confidence=sc.min_confidence, all_tiles=sc.all_tiles
    )
    return run_simulation(
        scenes if scenes is not None else build_scenes(sc),
        build_trace(sc),
        sc.timing,
        controller,
        FrameEncoder(weights, grid),
        EdgeServer(weights, grid, fill_value=sc.fill),
        mode=sc.mode,
        queue_depth=sc.queue_depth,
        propagation_delay=sc.propagation_ms / 1e3,
        server_overlap=sc.server_overlap,
    )
