"""Reference downstream model: colour-threshold blob detector.

Stands in for a neural detector at desk scale. It knows the scene palette,
segments pixels within ``tolerance`` (per channel) of each class colour and
boxes the connected components.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..rawframe import BoundingBox, RgbFrame
from ..scene import PALETTE

DEFAULT_TOLERANCE = 80
MIN_AREA = 64
MIN_SIDE = 12
DEFAULT_CONF_THRESHOLD = 0.25


def detect(
    frame: RgbFrame,
    conf_threshold: float = 0.0,
    tolerance: int = DEFAULT_TOLERANCE,
    palette: tuple[tuple[int, int, int], ...] = PALETTE,
) -> list[BoundingBox]:
    planes = [np.ascontiguousarray(frame.pixels[..., c]) for c in range(3)]
    found: list[BoundingBox] = []
    for class_id, color in enumerate(palette):
        # Chebyshev distance <= tolerance, as one range test per channel
        mask = np.ones(planes[0].shape, dtype=bool)
        for plane, level in zip(planes, color):
            lo, hi = level - tolerance, level + tolerance
            if lo > 0:
                mask &= plane >= lo
            if hi < 255:
                mask &= plane <= hi
        if not mask.any():
            continue
        labels, _ = ndimage.label(mask)
        for label, sl in enumerate(ndimage.find_objects(labels), 1):
            if sl is None:
                continue
            ys, xs = sl
            h, w = ys.stop - ys.start, xs.stop - xs.start
            # colour fringes along edges of other objects are long but thin
            if min(h, w) < MIN_SIDE:
                continue
            component = labels[sl] == label
            if component.sum() < MIN_AREA:
                continue
            confidence = float(mask[sl].mean())
            if confidence < conf_threshold:
                continue
            found.append(BoundingBox(class_id, float(xs.start), float(ys.start), float(w), float(h), confidence))
    found.sort(key=lambda b: (-b.confidence, b.class_id, b.y, b.x))
    return found
