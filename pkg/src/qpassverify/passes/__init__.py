"""Concrete passes and the pass registry."""

from .assorted import (BarrierBeforeFinalMeasure, CountOps, Depth, GateDirection,
                       MergeAdjacentBarriers, RemoveFinalMeasure, Size, UnrollToBasis, Width,
                       circuit_depth, final_measurements)
from .base import DEFAULT_SEED, BasePass, ConfigError, PassConfig
from .optimization import (CommutativeCancellation, CommutativeCancellationTransitive,
                           CXCancellation, Optimize1qGates, Optimize1qGatesUnguarded,
                           Synthesize1q, wire_runs)
from .registry import (DEMO_MUTANTS, PASSES, UnknownPassError, make_pass, pass_names)
from .routing import (ApplyLayout, BasicSwap, LookaheadSwap, LookaheadSwapUnfixed,
                      TrivialLayout, lookahead_trap_circuit)

__all__ = [
    "ApplyLayout", "BarrierBeforeFinalMeasure", "BasePass", "BasicSwap", "CXCancellation",
    "CommutativeCancellation", "CommutativeCancellationTransitive", "ConfigError", "CountOps",
    "DEFAULT_SEED", "DEMO_MUTANTS", "Depth", "GateDirection", "LookaheadSwap",
    "LookaheadSwapUnfixed", "MergeAdjacentBarriers", "Optimize1qGates",
    "Optimize1qGatesUnguarded", "PASSES", "PassConfig", "RemoveFinalMeasure", "Size",
    "Synthesize1q", "TrivialLayout", "UnknownPassError", "UnrollToBasis", "Width",
    "circuit_depth", "lookahead_trap_circuit", "final_measurements", "make_pass", "pass_names", "wire_runs",
]
