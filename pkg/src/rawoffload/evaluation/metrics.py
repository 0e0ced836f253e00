from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..rawframe import BoundingBox
from .detector import DEFAULT_CONF_THRESHOLD


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass
class ApResult:
    per_class_ap: dict[int, float]
    map: float
    precision: float
    recall: float
    f1: float
    curves: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)


def average_precision(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-points interpolated area under the PR curve."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def _rank(dets: Sequence[Sequence[BoundingBox]], class_id: int) -> list[tuple[int, BoundingBox]]:
    ranked = [(f, d) for f, frame in enumerate(dets) for d in frame if d.class_id == class_id]
    # stable: equal confidences keep frame then list order
    ranked.sort(key=lambda fd: -fd[1].confidence)
    return ranked


def _match(
    ranked: list[tuple[int, BoundingBox]],
    truths: Sequence[Sequence[BoundingBox]],
    class_id: int,
    iou_threshold: float,
) -> np.ndarray:
    """Greedy in confidence order: each detection takes the unmatched truth of
    its class with the highest IoU (first on ties), if that IoU clears the
    threshold."""
    taken: set[tuple[int, int]] = set()
    tp = np.zeros(len(ranked), dtype=bool)
    for k, (f, det) in enumerate(ranked):
        best, best_iou = None, iou_threshold
        for t, gt in enumerate(truths[f]):
            if gt.class_id != class_id or (f, t) in taken:
                continue
            v = iou(det, gt)
            if v >= best_iou and (best is None or v > best_iou):
                best, best_iou = t, v
        if best is not None:
            taken.add((f, best))
            tp[k] = True
    return tp


def evaluate(
    detections: Sequence[Sequence[BoundingBox]],
    truths: Sequence[Sequence[BoundingBox]],
    iou_threshold: float = 0.5,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
) -> ApResult:
    """VOC-style single-threshold evaluation over aligned per-frame lists.

    mAP averages over classes that have ground truth. Precision, recall and F1
    are taken at ``conf_threshold``. With no truths and no detections at all
    every score is 1.
    """
    if len(detections) != len(truths):
        raise ValueError(f"{len(detections)} detection frames vs {len(truths)} truth frames")
    gt_classes = sorted({b.class_id for frame in truths for b in frame})
    det_classes = sorted({b.class_id for frame in detections for b in frame})
    n_truth = sum(len(f) for f in truths)

    per_class: dict[int, float] = {}
    curves = {}
    tp_at_op = fp_at_op = 0
    for cls in sorted(set(gt_classes) | set(det_classes)):
        ranked = _rank(detections, cls)
        tp = _match(ranked, truths, cls, iou_threshold)
        conf = np.array([d.confidence for _, d in ranked])
        op = conf >= conf_threshold
        tp_at_op += int(tp[op].sum())
        fp_at_op += int((~tp[op]).sum())
        n_cls = sum(1 for frame in truths for b in frame if b.class_id == cls)
        if n_cls == 0:
            continue
        ctp = np.cumsum(tp)
        recall = ctp / n_cls
        precision = ctp / np.arange(1, len(tp) + 1)
        curves[cls] = (recall, precision)
        per_class[cls] = average_precision(recall, precision) if len(tp) else 0.0

    if n_truth == 0 and tp_at_op + fp_at_op == 0:
        return ApResult({}, 1.0, 1.0, 1.0, 1.0)
    mean_ap = float(np.mean(list(per_class.values()))) if per_class else 0.0
    n_det = tp_at_op + fp_at_op
    precision = tp_at_op / n_det if n_det else 0.0
    recall = tp_at_op / n_truth if n_truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ApResult(per_class, mean_ap, precision, recall, f1, curves)
