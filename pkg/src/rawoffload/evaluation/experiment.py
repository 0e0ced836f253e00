"""Experiment harness: one simulated run plus accuracy, with ablation flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..pipeline.scenario import Scenario, load_scenario
from ..pipeline.simulation import RunSummary, SimulationResult, simulate
from .metrics import ApResult, evaluate
from .reports import frames_csv, latency_svg, summary_csv


@dataclass
class ExperimentConfig:
    """``weights=None`` keeps the scenario's weights (the built-in defaults
    unless the scenario names a file); a path swaps in loaded weights."""

    scenario: Scenario | str | Path = dataclasses.field(default_factory=Scenario)
    weights: str | None = None
    all_tiles: bool = False
    luminosity: float = 1.0
    trace: str | None = None
    out: str | Path | None = None
    plots: bool = False

    def __post_init__(self) -> None:
        if not self.luminosity > 0:
            raise ValueError("luminosity factor must be positive")

    def resolve(self) -> Scenario:
        sc = self.scenario if isinstance(self.scenario, Scenario) else load_scenario(self.scenario)
        changes = {"all_tiles": self.all_tiles or sc.all_tiles, "luminosity": sc.luminosity * self.luminosity}
        if self.weights is not None:
            changes["weights"] = self.weights
        if self.trace is not None:
            changes["trace"] = self.trace
        return sc.replace(**changes)


@dataclass
class ExperimentResult:
    scenario: Scenario
    summary: RunSummary
    accuracy: ApResult
    simulation: SimulationResult

    def frames_csv(self) -> str:
        return frames_csv(self.simulation.frames)

    def summary_csv(self) -> str:
        return summary_csv(self.summary)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    sc = config.resolve()
    sim = simulate(sc)
    acc = evaluate(sim.detections, sim.truths)
    summary = dataclasses.replace(sim.summary, map=acc.map, f1=acc.f1)
    result = ExperimentResult(sc, summary, acc, sim)
    if config.out is not None:
        write_outputs(result, Path(config.out), config.plots)
    return result


def write_outputs(result: ExperimentResult, out: Path, plots: bool = False) -> None:
    """``out`` is the per-frame CSV; the summary goes next to it."""
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.frames_csv())
    out.with_name(out.stem + "_summary.csv").write_text(result.summary_csv())
    if plots:
        out.with_name(out.stem + "_latency.svg").write_text(latency_svg(result.simulation.frames))
