from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rawoffload.codec.network import CONFIGS, config_for, default_weights
from rawoffload.codec.quant import QuantParams
from rawoffload.codec.tiles import TileGrid
from rawoffload.controller import Controller, TransmissionPlan, default_lut
from rawoffload.evaluation.metrics import iou
from rawoffload.netsim import VIRTUAL_TICK, BandwidthTrace
from rawoffload.pipeline.endpoints import EdgeServer, FrameEncoder, reconstruct
from rawoffload.pipeline.messages import (
    FRAME_HEADER,
    STATUS_ERROR,
    FrameMessage,
    MessageError,
    ResultMessage,
)
from rawoffload.pipeline.scenario import (
    REFERENCE_TIMELINE,
    Scenario,
    StageTiming,
    load_scenario,
    loads_scenario,
)
from rawoffload.pipeline.simulation import build_scenes, run_simulation, simulate
from rawoffload.pipeline.wallclock import ServerThread, run_client
from rawoffload.rawframe import BoundingBox, CfaPattern
from rawoffload.scene import generate_scene

WEIGHTS = default_weights()
GRID = TileGrid(768, 512)
SMALL = Scenario(frames=12, width=384, height=256, objects=2, seed=3)
SMALL_GRID = TileGrid(384, 256)


def plan(tiles, config=config_for(2, 8), key=False):
    return TransmissionPlan(tuple(tiles), config, key)


def key_frame_message(scene, frame_id=7):
    return FrameEncoder(WEIGHTS, GRID).encode(scene.frame, plan(range(12), key=True), frame_id)


# ---- messages


def test_empty_frame_roundtrip():
    msg = FrameMessage(3, 1, QuantParams(0.0, 255.0))
    data = msg.serialize()
    assert len(data) == FRAME_HEADER.size
    assert FrameMessage.deserialize(data) == msg


def test_key_frame_roundtrip_bit_exact():
    msg = key_frame_message(generate_scene(1))
    data = msg.serialize()
    back = FrameMessage.deserialize(data)
    assert back == msg and back.key_frame and len(back.tiles) == 12
    assert back.serialize() == data


@pytest.mark.parametrize("pattern", list(CfaPattern))
def test_pattern_travels_in_flags(pattern):
    msg = FrameMessage(1, 0, QuantParams(0.0, 1.0), key_frame=True, pattern=pattern)
    assert FrameMessage.deserialize(msg.serialize()).pattern == pattern


@pytest.mark.parametrize("tile_count", [1, 3])
def test_flipped_length_byte_is_a_decode_error(tile_count):
    msg = FrameEncoder(WEIGHTS, GRID).encode(generate_scene(2).frame, plan(range(tile_count)), 1)
    data = bytearray(msg.serialize())
    data[FRAME_HEADER.size + 14] ^= 0xFF  # low byte of the first payload length
    with pytest.raises(MessageError):
        FrameMessage.deserialize(bytes(data))


def test_frame_message_rejections():
    good = key_frame_message(generate_scene(1)).serialize()
    for bad in (good[:10], b"XXXX" + good[4:], good[:4] + b"\x09" + good[5:], good + b"\x00", good[:-1]):
        with pytest.raises(MessageError):
            FrameMessage.deserialize(bad)
    # tile count larger than the records present
    head = bytearray(FrameMessage(1, 0, QuantParams(0.0, 1.0)).serialize())
    head[FRAME_HEADER.size - 2] = 1
    with pytest.raises(MessageError):
        FrameMessage.deserialize(bytes(head))


def test_result_roundtrip_and_rejections():
    msg = ResultMessage(9, [BoundingBox(2, 1.5, 2.0, 30.0, 40.0, 0.75)])
    data = msg.serialize()
    assert ResultMessage.deserialize(data) == msg
    assert ResultMessage.deserialize(ResultMessage(4).serialize()) == ResultMessage(4)
    with pytest.raises(MessageError):
        ResultMessage.deserialize(data[:-1])
    with pytest.raises(MessageError):
        ResultMessage.deserialize(b"ABFM" + data[4:])


@given(
    st.integers(0, 2**64 - 1),
    st.lists(
        st.tuples(st.integers(0, 65535), st.floats(0, 1, width=32), *[st.floats(0, 4000, width=32)] * 2, *[st.floats(1, 4000, width=32)] * 2),
        max_size=6,
    ),
)
def test_result_serialization_identity(frame_id, rows):
    msg = ResultMessage(frame_id, [BoundingBox(c, x, y, w, h, p) for c, p, x, y, w, h in rows])
    assert ResultMessage.deserialize(msg.serialize()) == msg


# ---- edge server


def test_key_frame_detections_match_truth():
    for seed in range(4):
        scene = generate_scene(seed)
        reply = ResultMessage.deserialize(EdgeServer(WEIGHTS, GRID).handle(key_frame_message(scene, seed).serialize()))
        assert reply.ok and reply.frame_id == seed
        assert len(reply.detections) == len(scene.truth)
        for t in scene.truth:
            assert max(iou(d, t) for d in reply.detections if d.class_id == t.class_id) >= 0.5


def test_zero_tile_frame_has_no_detections():
    reply = EdgeServer(WEIGHTS, GRID).handle(FrameMessage(5, 0, QuantParams(0.0, 255.0)).serialize())
    assert ResultMessage.deserialize(reply) == ResultMessage(5, [])


def test_malformed_request_gets_error_with_frame_id():
    data = bytearray(key_frame_message(generate_scene(3), 42).serialize())
    data[-1:] = b""
    reply = ResultMessage.deserialize(EdgeServer(WEIGHTS, GRID).handle(bytes(data)))
    assert reply.status == STATUS_ERROR and reply.frame_id == 42 and not reply.ok
    garbage = ResultMessage.deserialize(EdgeServer(WEIGHTS, GRID).handle(b"junk"))
    assert garbage.status == STATUS_ERROR


def test_tile_index_outside_grid_is_an_error():
    small = EdgeServer(WEIGHTS, TileGrid(768, 512, rows=2, cols=2))
    reply = ResultMessage.deserialize(small.handle(key_frame_message(generate_scene(1), 8).serialize()))
    assert reply.status == STATUS_ERROR and reply.frame_id == 8


@settings(max_examples=25)
@given(
    st.integers(0, 2**16),
    st.sampled_from(CONFIGS),
    st.sets(st.integers(0, 11), max_size=12),
    st.sampled_from(list(CfaPattern)),
)
def test_wire_roundtrip_reassembles_identically(seed, config, tiles, pattern):
    scene = generate_scene(seed, 384, 256, 2, pattern)
    msg = FrameEncoder(WEIGHTS, SMALL_GRID).encode(scene.frame, plan(sorted(tiles), config), seed)
    local = reconstruct(msg, WEIGHTS, SMALL_GRID)
    server = EdgeServer(WEIGHTS, SMALL_GRID)
    reply = ResultMessage.deserialize(server.handle(msg.serialize()))
    assert reply.ok and reply.frame_id == seed
    assert server.last_canvas == local


# ---- scenario files


def test_scenario_file_roundtrip(tmp_path):
    sc = Scenario(seed=4, frames=17, trace="t.txt", timing=StageTiming(demosaic=0.03), all_tiles=True)
    path = tmp_path / "s.cfg"
    path.write_text(sc.dumps())
    back = load_scenario(path)
    assert back.trace == str(tmp_path / "t.txt")
    assert back.replace(trace="t.txt", timing=sc.timing) == sc
    for name in ("capture", "demosaic", "encode", "decode", "inference", "render", "frame_interval"):
        assert getattr(back.timing, name) == pytest.approx(getattr(sc.timing, name), abs=1e-12)


def test_scenario_file_errors():
    with pytest.raises(ValueError):
        loads_scenario("frames 3\n")
    with pytest.raises(ValueError):
        loads_scenario("colour = red\n")
    with pytest.raises(ValueError):
        loads_scenario("frames = many\n")
    with pytest.raises(ValueError):
        loads_scenario("mode = turbo\n")
    with pytest.raises(ValueError):
        StageTiming(encode=-1)


def test_shipped_scenarios_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "scenarios"
    loaded = {p.stem: load_scenario(p) for p in root.glob("*.cfg")}
    assert {"default", "reference_timeline", "sparse"} <= set(loaded)
    assert loaded["reference_timeline"].timing == REFERENCE_TIMELINE.timing


# ---- virtual-clock simulation


def _run(sc, **kw):
    return simulate(sc, lut=kw.pop("lut", default_lut()), **kw)


def test_bottleneck_law():
    fast = BandwidthTrace.constant(1e12)
    for timing, slowest in [
        (StageTiming(capture=0.005, demosaic=0.004, encode=0.008, inference=0.012, render=0.002, frame_interval=0.0), 0.012),
        (StageTiming(capture=0.005, demosaic=0.004, encode=0.020, inference=0.012, render=0.002, frame_interval=0.0), 0.020),
        (StageTiming(capture=0.009, demosaic=0.004, encode=0.003, inference=0.006, render=0.002, frame_interval=0.0), 0.009),
    ]:
        sc = SMALL.replace(frames=40, timing=timing, propagation_ms=0.1)
        res = run_simulation(
            build_scenes(sc), fast, timing, Controller(default_lut(), SMALL_GRID),
            FrameEncoder(WEIGHTS, SMALL_GRID), EdgeServer(WEIGHTS, SMALL_GRID), propagation_delay=1e-4,
        )
        assert res.summary.throughput == pytest.approx(1 / slowest, rel=1e-3)


def test_server_overlap_toggle():
    timing = StageTiming(capture=0.002, demosaic=0.002, encode=0.002, decode=0.010, inference=0.010, render=0.001, frame_interval=0.0)
    rates = {}
    for overlap in (True, False):
        sc = SMALL.replace(frames=30, timing=timing, server_overlap=overlap, propagation_ms=0.1, bandwidth_mbps=1e6)
        res = _run(sc)
        rates[overlap] = res.summary.throughput
        for f in res.frames:
            assert abs(sum(f.stages.values()) - f.e2e_latency) <= VIRTUAL_TICK
    # decode and inference in parallel: 10 ms bottleneck; serial: 20 ms
    assert rates[True] == pytest.approx(100, rel=1e-3)
    assert rates[False] == pytest.approx(50, rel=1e-3)


def test_simulation_is_deterministic():
    a, b = _run(SMALL), _run(SMALL)
    assert a.summary == b.summary
    assert [(f.rendered, f.transmitted_bytes, f.config_id) for f in a.frames] == [
        (f.rendered, f.transmitted_bytes, f.config_id) for f in b.frames
    ]


@pytest.mark.parametrize("mode", ["pipelined", "serialized"])
def test_latency_decomposes_into_stages(mode):
    for f in _run(SMALL.replace(mode=mode, bandwidth_mbps=3)).frames:
        assert f.e2e_latency > 0
        assert abs(sum(f.stages.values()) - f.e2e_latency) <= VIRTUAL_TICK


def test_pipelined_never_slower_than_serialized():
    for demosaic in (0.0, 0.01, 0.025, 0.05):
        sc = SMALL.replace(demosaic=demosaic)
        pipe = _run(sc).frames
        serial = _run(sc.replace(mode="serialized")).frames
        for p, s in zip(pipe, serial):
            assert p.e2e_latency <= s.e2e_latency + VIRTUAL_TICK
            if demosaic == 0:
                assert p.e2e_latency == pytest.approx(s.e2e_latency, abs=VIRTUAL_TICK)
            else:
                assert p.e2e_latency < s.e2e_latency


def test_reference_timeline_hides_demosaic():
    pipe = _run(REFERENCE_TIMELINE.replace(frames=10)).frames
    serial = _run(REFERENCE_TIMELINE.replace(frames=10, mode="serialized")).frames
    for p, s in zip(pipe, serial):
        assert s.e2e_latency - p.e2e_latency == pytest.approx(0.025, abs=VIRTUAL_TICK)


def test_throughput_times_duration_counts_frames():
    s = _run(SMALL).summary
    assert s.throughput * s.active_duration == pytest.approx(s.window_frames)
    assert s.window_frames == s.completed - 1 == SMALL.frames - 1


def test_transmitted_bytes_equal_message_length():
    sc = SMALL.replace(frames=6)
    sizes: list[int] = []
    res = run_simulation(
        build_scenes(sc), BandwidthTrace.constant(2e6), sc.timing, Controller(default_lut(), SMALL_GRID),
        _RecordingEncoder(WEIGHTS, SMALL_GRID, sizes), EdgeServer(WEIGHTS, SMALL_GRID),
    )
    assert [f.transmitted_bytes for f in res.frames] == sizes
    assert all(n >= FRAME_HEADER.size for n in sizes)


class _RecordingEncoder(FrameEncoder):
    def __init__(self, weights, grid, sink):
        super().__init__(weights, grid)
        self.sink = sink

    def encode(self, frame, plan, frame_id):
        msg = super().encode(frame, plan, frame_id)
        self.sink.append(len(msg.serialize()))
        return msg


def test_empty_scene_sends_header_only_frames():
    res = _run(SMALL.replace(objects=0, frames=10))
    first, *rest = res.frames
    assert first.key_frame and first.tiles_sent == 12
    # until the key frame's result comes back the controller has nothing to go on
    settled = [f for f in rest if f.frame_id >= 2]
    assert settled and all(f.transmitted_bytes == FRAME_HEADER.size and f.tiles_sent == 0 for f in settled)


def test_all_tiles_ablation_sends_everything():
    res = _run(SMALL.replace(all_tiles=True, frames=5))
    assert all(f.tiles_sent == 12 for f in res.frames)


def test_real_time_at_20_mbps():
    res = _run(SMALL.replace(frames=40, bandwidth_mbps=20))
    assert res.summary.throughput >= 25
    assert res.summary.max_latency < 0.2


def test_dead_link_propagates():
    from rawoffload.netsim import LinkStalled

    sc = SMALL.replace(frames=3)
    with pytest.raises(LinkStalled):
        run_simulation(
            build_scenes(sc), BandwidthTrace.constant(0.0), sc.timing, Controller(default_lut(), SMALL_GRID),
            FrameEncoder(WEIGHTS, SMALL_GRID), EdgeServer(WEIGHTS, SMALL_GRID),
        )


def test_low_bandwidth_moves_to_leaner_configs():
    rich = _run(SMALL.replace(frames=20, bandwidth_mbps=100))
    lean = _run(SMALL.replace(frames=20, bandwidth_mbps=0.5))
    mean_id = lambda r: np.mean([f.config_id for f in r.frames if not f.key_frame])  # noqa: E731
    assert mean_id(lean) > mean_id(rich)
    assert math.isinf(rich.frames[0].eab)


# ---- wall-clock transport


def test_wall_clock_stream_over_tcp():
    scenes = build_scenes(SMALL.replace(frames=5))
    server = ServerThread(EdgeServer(WEIGHTS, SMALL_GRID))
    server.start()
    try:
        run = run_client(scenes, Controller(default_lut(), SMALL_GRID), FrameEncoder(WEIGHTS, SMALL_GRID), server.address)
    finally:
        server.stop()
    assert [f.frame_id for f in run.frames] == list(range(5))
    assert not any(f.dropped for f in run.frames)
    assert all(f.e2e_latency >= 0 for f in run.frames)
    assert run.frames[0].key_frame and run.frames[0].tiles_sent == 12
    key = run.detections[0]
    assert len(key) == len(scenes[0].truth)


def test_wall_clock_marks_frames_dropped_when_server_vanishes():
    import socket

    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    addr = listener.getsockname()

    import threading

    def slam():
        conn, _ = listener.accept()
        conn.close()

    t = threading.Thread(target=slam)
    t.start()
    scenes = build_scenes(SMALL.replace(frames=4))
    run = run_client(scenes, Controller(default_lut(), SMALL_GRID), FrameEncoder(WEIGHTS, SMALL_GRID), addr, timeout=5)
    t.join()
    listener.close()
    assert len(run.frames) == 4
    assert all(f.dropped for f in run.frames)
