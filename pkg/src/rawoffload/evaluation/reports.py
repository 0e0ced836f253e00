"""CSV reports, detection files and small SVG line plots.

Per-frame CSV columns (FRAME_HEADER):
    frame_id, captured_s, rendered_s, e2e_latency_ms, transmitted_bytes,
    tiles_sent, config_id, key_frame, eab_mbps, dropped
Summary CSV: two columns, ``metric,value``, one row per RunSummary field.
Detection files hold one box per line: ``class x y w h confidence``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from html import escape
from typing import Iterable, Sequence

from ..rawframe import BoundingBox
from .metrics import ApResult

FRAME_HEADER = (
    "frame_id",
    "captured_s",
    "rendered_s",
    "e2e_latency_ms",
    "transmitted_bytes",
    "tiles_sent",
    "config_id",
    "key_frame",
    "eab_mbps",
    "dropped",
)


def frames_csv(frames: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_HEADER)
    for f in frames:
        eab = "inf" if math.isinf(f.eab) else f"{f.eab * 8 / 1e6:.4f}"
        w.writerow(
            [
                f.frame_id,
                f"{f.captured:.6f}",
                f"{f.rendered:.6f}",
                f"{f.e2e_latency * 1e3:.3f}",
                f.transmitted_bytes,
                f.tiles_sent,
                f.config_id,
                int(f.key_frame),
                eab,
                int(f.dropped),
            ]
        )
    return buf.getvalue()


def summary_csv(summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "value"))
    for field in dataclasses.fields(summary):
        value = getattr(summary, field.name)
        w.writerow((field.name, "" if value is None else f"{value:.6g}"))
    return buf.getvalue()


def ap_csv(result: ApResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "value"))
    for cls, ap in sorted(result.per_class_ap.items()):
        w.writerow((f"ap_class_{cls}", f"{ap:.6f}"))
    for name in ("map", "precision", "recall", "f1"):
        w.writerow((name, f"{getattr(result, name):.6f}"))
    return buf.getvalue()


def format_detections(boxes: Iterable[BoundingBox]) -> str:
    return "".join(
        f"{b.class_id} {b.x!r} {b.y!r} {b.w!r} {b.h!r} {b.confidence!r}\n" for b in boxes
    )


def parse_detections(text: str) -> list[BoundingBox]:
    boxes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ValueError(f"detection line {lineno}: expected 'class x y w h confidence', got {line!r}")
        boxes.append(BoundingBox(int(parts[0]), *(float(p) for p in parts[1:5]), float(parts[5])))
    return boxes


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_plot_svg(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    width: int = 640,
    height: int = 400,
) -> str:
    """Plain SVG with one polyline (plus point markers) per (label, xs, ys)."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 32, 48
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x: float) -> float:
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y: float) -> float:
        return pad_t + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{pad_t + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {pad_t + ph / 2})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{px(fx):.1f}" y="{pad_t + ph + 16}" text-anchor="middle">{fx:.4g}</text>')
        out.append(f'<text x="{pad_l - 6}" y="{py(fy) + 4:.1f}" text-anchor="end">{fy:.4g}</text>')
    for k, (label, sx, sy) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(sx, sy))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out += [f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>' for x, y in zip(sx, sy)]
        out.append(f'<text x="{pad_l + pw - 4}" y="{pad_t + 14 + 14 * k}" text-anchor="end" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pareto_svg(rows) -> str:
    ordered = sorted(rows, key=lambda r: r.mean_frame_bytes)
    labels = ", ".join(f"({r.config.stride},{r.config.channels})" for r in ordered)
    return line_plot_svg(
        [(f"configs {labels}", [r.mean_frame_bytes for r in ordered], [r.map for r in ordered])],
        "Accuracy vs. transmitted bytes",
        "mean frame bytes",
        "mAP@0.5",
    )


def latency_svg(frames, label: str = "e2e latency") -> str:
    done = [f for f in frames if not f.dropped]
    return line_plot_svg(
        [(label, [f.frame_id for f in done], [f.e2e_latency * 1e3 for f in done])],
        "Per-frame end-to-end latency",
        "frame",
        "latency (ms)",
    )
