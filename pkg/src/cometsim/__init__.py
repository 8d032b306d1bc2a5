"""RowHammer tracker simulation: sketch, tracker, DRAM oracle, traces, experiments."""

from .sketch import HashFamily, SketchTable
from .tracker import (
    CometBankTracker,
    CometConfig,
    EarlyRefreshRequest,
    PreventiveRefresh,
    apply_early_refresh,
    derive_npr,
)
from .dram import DramModel, ExposureOracle, Geometry, RefreshScheduler
from .traces import Trace, TraceEvent, read_trace, write_trace

__all__ = [
    "HashFamily",
    "SketchTable",
    "CometBankTracker",
    "CometConfig",
    "EarlyRefreshRequest",
    "PreventiveRefresh",
    "apply_early_refresh",
    "derive_npr",
    "DramModel",
    "ExposureOracle",
    "Geometry",
    "RefreshScheduler",
    "Trace",
    "TraceEvent",
    "read_trace",
    "write_trace",
]

__version__ = "0.1.0"
