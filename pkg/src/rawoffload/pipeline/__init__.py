from .endpoints import EdgeServer, FrameEncoder, reconstruct
from .messages import FrameMessage, MessageError, ResultMessage
from .scenario import REFERENCE_TIMELINE, Scenario, StageTiming, load_scenario, loads_scenario
from .simulation import FrameMetrics, RunSummary, SimulationResult, run_simulation, simulate, summarize

__all__ = [
    "EdgeServer",
    "FrameEncoder",
    "FrameMessage",
    "FrameMetrics",
    "MessageError",
    "REFERENCE_TIMELINE",
    "ResultMessage",
    "RunSummary",
    "Scenario",
    "SimulationResult",
    "StageTiming",
    "load_scenario",
    "loads_scenario",
    "reconstruct",
    "run_simulation",
    "simulate",
    "summarize",
]
