from __future__ import annotations

import numpy as np
import pytest

from rawoffload.codec.network import config_by_id, default_weights
from rawoffload.codec.quant import QuantParams
from rawoffload.codec.tiles import TileGrid
from rawoffload.evaluation.detector import detect
from rawoffload.evaluation.metrics import iou
from rawoffload.evaluation.profiling import roundtrip_frame
from rawoffload.rawframe import BayerFrame, CfaPattern, RgbFrame, demosaic_bilinear
from rawoffload.scene import (
    NOISE_AMPLITUDE,
    PALETTE,
    generate_scene,
    generate_sequence,
    read_corpus,
    write_corpus,
)


def test_zero_objects_gives_empty_truth():
    assert generate_scene(1, 128, 128, 0).truth == []


def test_same_seed_same_frame():
    a, b = generate_scene(9, 256, 192, 3), generate_scene(9, 256, 192, 3)
    assert a.frame == b.frame and a.truth == b.truth
    assert generate_scene(10, 256, 192, 3).frame != a.frame


@pytest.mark.parametrize("pattern", list(CfaPattern))
def test_truth_boxes_are_tight_on_rendered_objects(pattern):
    scene = generate_scene(4, 320, 256, 4, pattern)
    px = scene.frame.pixels.astype(int)
    colors = pattern.colors
    for box in scene.truth:
        x, y, w, h = int(box.x), int(box.y), int(box.w), int(box.h)
        rgb = PALETTE[box.class_id]
        for dy in range(2):
            for dx in range(2):
                channel = "RGB".index(colors[((y + dy) % 2) * 2 + (x + dx) % 2])
                inside = px[y + dy : y + h : 2, x + dx : x + w : 2]
                assert np.abs(inside - rgb[channel]).max() <= NOISE_AMPLITUDE
        # one pixel outside each edge is background again
        border = [px[y - 1, x : x + w] if y else None, px[y + h, x : x + w] if y + h < 256 else None]
        for row in border:
            if row is not None:
                assert row.max() <= 48 + NOISE_AMPLITUDE


def test_objects_do_not_overlap_and_classes_are_distinct():
    for seed in range(20):
        truth = generate_scene(seed, 384, 256, 5).truth
        assert len({b.class_id for b in truth}) == len(truth)
        for i, a in enumerate(truth):
            for b in truth[i + 1 :]:
                assert iou(a, b) == 0


def test_bad_dims_and_impossible_placement():
    with pytest.raises(ValueError):
        generate_scene(0, 63, 64)
    with pytest.raises(ValueError):
        generate_scene(0, 64, 64, -1)
    with pytest.raises(ValueError):
        generate_scene(0, 64, 64, len(PALETTE) + 1)
    with pytest.raises(RuntimeError):
        generate_scene(0, 64, 64, 6, min_size=40, max_size=40)


def test_sequence_motion_is_bounded_and_deterministic():
    seq = generate_sequence(3, 25, 320, 256, 3, max_speed=4)
    assert generate_sequence(3, 25, 320, 256, 3, max_speed=4)[-1].frame == seq[-1].frame
    for prev, cur in zip(seq, seq[1:]):
        by_class = {b.class_id: b for b in prev.truth}
        for b in cur.truth:
            p = by_class[b.class_id]
            assert abs(b.x - p.x) <= 4 and abs(b.y - p.y) <= 4
            assert (b.w, b.h) == (p.w, p.h)
            assert 0 <= b.x and b.x2 <= 320 and 0 <= b.y and b.y2 <= 256
        for i, a in enumerate(cur.truth):
            for c in cur.truth[i + 1 :]:
                assert iou(a, c) == 0


def test_corpus_files_roundtrip(tmp_path):
    scenes = [generate_scene(s, 192, 128, 2) for s in range(3)]
    write_corpus(tmp_path, scenes)
    back = read_corpus(tmp_path)
    assert [b.frame for b in back] == [s.frame for s in scenes]
    assert [b.truth for b in back] == [s.truth for s in scenes]
    with pytest.raises(ValueError):
        read_corpus(tmp_path / "nothing")


# ---- reference detector


def test_blank_frame_has_no_detections():
    assert detect(RgbFrame(np.full((64, 64, 3), 48, np.uint8))) == []
    assert detect(demosaic_bilinear(generate_scene(2, 256, 256, 0).frame)) == []


def test_detector_recovers_generator_truth():
    worst = 1.0
    for seed in range(25):
        scene = generate_scene(seed, 384, 256, 4)
        dets = detect(demosaic_bilinear(scene.frame))
        assert len(dets) == len(scene.truth)
        for t in scene.truth:
            match = [d for d in dets if d.class_id == t.class_id]
            assert len(match) == 1
            worst = min(worst, iou(match[0], t))
    assert worst >= 0.9


def test_detector_is_deterministic_and_confident():
    rgb = demosaic_bilinear(generate_scene(5).frame)
    a, b = detect(rgb), detect(rgb)
    assert a == b
    assert all(0 < d.confidence <= 1 for d in a)
    assert [d.confidence for d in a] == sorted((d.confidence for d in a), reverse=True)


def test_conf_threshold_filters():
    rgb = np.full((64, 64, 3), 0, np.uint8)
    rgb[8:40, 8:40] = PALETTE[0]
    rgb[8:40:2, 8:40:2] = 0  # a quarter of the box off-colour
    dets = detect(RgbFrame(rgb))
    assert len(dets) == 1 and dets[0].confidence == pytest.approx(0.75)
    assert detect(RgbFrame(rgb), conf_threshold=0.8) == []


def test_coarser_codec_does_not_improve_box_fit():
    grid_kwargs = dict(rows=4, cols=3, overlap=32)
    w = default_weights()
    q = QuantParams(0.0, 255.0)
    totals = {}
    for cid in (0, 3):
        acc = []
        for seed in range(6):
            scene = generate_scene(100 + seed)
            canvas, _, _ = roundtrip_frame(scene, config_by_id(cid), w, TileGrid.for_frame(scene.frame, **grid_kwargs), q)
            dets = detect(demosaic_bilinear(canvas))
            for t in scene.truth:
                acc.append(max((iou(d, t) for d in dets if d.class_id == t.class_id), default=0.0))
        totals[cid] = float(np.mean(acc))
    assert totals[3] <= totals[0]


def test_detector_rejects_thin_fringes():
    rgb = np.zeros((64, 64, 3), np.uint8)
    rgb[10:12, 0:60] = PALETTE[1]  # 2 px tall streak
    assert detect(RgbFrame(rgb)) == []


def test_frame_type_guard():
    with pytest.raises(ValueError):
        RgbFrame(np.zeros((4, 4), np.uint8))
    with pytest.raises(ValueError):
        BayerFrame(np.zeros((4, 4, 3), np.uint8))
