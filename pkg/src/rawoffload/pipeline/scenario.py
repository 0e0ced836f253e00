"""Stage timings and key=value scenario files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..codec.tiles import DEFAULT_FILL, DEFAULT_OVERLAP

MBPS = 1e6 / 8  # bytes/s per megabit/s


@dataclass(frozen=True)
class StageTiming:
    """Service times in seconds. Transmission and result return are not
    listed: the link model computes them from message sizes."""

    capture: float = 0.005
    demosaic: float = 0.025
    encode: float = 0.008
    decode: float = 0.0  # server-side tile decode; 0 folds it into inference
    inference: float = 0.012
    render: float = 0.002
    # camera frame period (30 FPS sensor); 0 means a free-running source
    frame_interval: float = 1 / 30

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"stage time {f.name} cannot be negative")


@dataclass
class Scenario:
    seed: int = 1
    frames: int = 90
    width: int = 768
    height: int = 512
    objects: int = 3
    max_speed: int = 4
    pattern: str = "RGGB"
    rows: int = 4
    cols: int = 3
    overlap: int = DEFAULT_OVERLAP
    fill: int = DEFAULT_FILL
    window: int = 30
    min_confidence: float = 0.25
    timing: StageTiming = field(default_factory=StageTiming)
    bandwidth_mbps: float = 20.0
    trace: str | None = None
    propagation_ms: float = 2.0
    tx_threshold_ms: float = 25.0
    queue_depth: int = 2
    mode: str = "pipelined"
    all_tiles: bool = False
    server_overlap: bool = True
    luminosity: float = 1.0
    weights: str | None = None
    lut: str | None = None
    profile_scenes: int = 8

    def __post_init__(self) -> None:
        if self.mode not in ("pipelined", "serialized"):
            raise ValueError(f"mode must be 'pipelined' or 'serialized', got {self.mode!r}")
        if self.frames < 1:
            raise ValueError("scenario needs at least one frame")
        if self.queue_depth < 1:
            raise ValueError("queue depth must be at least 1")

    def replace(self, **changes) -> Scenario:
        timing_changes = {k: changes.pop(k) for k in list(changes) if k in _TIMING_KEYS}
        out = dataclasses.replace(self, **changes)
        if timing_changes:
            out.timing = dataclasses.replace(out.timing, **timing_changes)
        return out

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "timing":
                for tf in fields(StageTiming):
                    lines.append(f"{tf.name}_ms = {getattr(value, tf.name) * 1e3:.12g}")
            elif value is not None:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_TIMING_KEYS = {f.name for f in fields(StageTiming)}
_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str, kind: type | str):
    kind_name = kind if isinstance(kind, str) else kind.__name__
    try:
        if kind_name == "bool":
            return _BOOL[raw.lower()]
        if kind_name == "int":
            return int(raw)
        if kind_name == "float":
            return float(raw)
    except (KeyError, ValueError):
        raise ValueError(f"scenario key {name!r}: cannot parse {raw!r} as {kind_name}") from None
    return raw


def loads_scenario(text: str, base_dir: Path | None = None) -> Scenario:
    types = {f.name: f.type for f in fields(Scenario)}
    values: dict = {}
    timing: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"scenario line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key.endswith("_ms") and key[:-3] in _TIMING_KEYS:
            timing[key[:-3]] = float(raw) / 1e3
        elif key in types and key != "timing":
            kind = str(types[key]).split("|")[0].strip()
            values[key] = _coerce(key, raw, kind)
        else:
            raise ValueError(f"scenario line {lineno}: unknown key {key!r}")
    for key in ("trace", "weights", "lut"):
        if key in values and base_dir is not None and not Path(values[key]).is_absolute():
            values[key] = str(base_dir / values[key])
    return Scenario(timing=StageTiming(**timing), **values)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return loads_scenario(path.read_text(), path.parent)


# Reference timeline: 25 ms demosaic beside a longer offload path, camera
# period long enough that no stage queues.
REFERENCE_TIMELINE = Scenario(
    frames=30,
    timing=StageTiming(capture=0.005, demosaic=0.025, encode=0.008, inference=0.012, render=0.002, frame_interval=0.040),
)
