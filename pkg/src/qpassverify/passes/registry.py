"""Name -> pass lookup, with the demo mutants behind an explicit flag."""

from __future__ import annotations

from .assorted import (BarrierBeforeFinalMeasure, CountOps, Depth, GateDirection,
                       MergeAdjacentBarriers, RemoveFinalMeasure, Size, UnrollToBasis, Width)
from .base import BasePass, ConfigError, PassConfig
from .optimization import (CommutativeCancellation, CommutativeCancellationTransitive,
                           CXCancellation, Optimize1qGates, Optimize1qGatesUnguarded,
                           Synthesize1q)
from .routing import (ApplyLayout, BasicSwap, LookaheadSwap, LookaheadSwapUnfixed,
                      TrivialLayout)


class UnknownPassError(ConfigError):
    pass


PASSES: dict[str, type[BasePass]] = {cls.pass_name: cls for cls in (
    TrivialLayout, ApplyLayout, BasicSwap, LookaheadSwap, UnrollToBasis, Synthesize1q,
    CXCancellation, CommutativeCancellation, Optimize1qGates, GateDirection,
    RemoveFinalMeasure, MergeAdjacentBarriers, BarrierBeforeFinalMeasure,
    Depth, Size, Width, CountOps,
)}

DEMO_MUTANTS: dict[str, type[BasePass]] = {cls.pass_name: cls for cls in (
    Optimize1qGatesUnguarded, CommutativeCancellationTransitive, LookaheadSwapUnfixed,
)}

_NEEDS_MAP = {"basic_swap", "lookahead_swap", "lookahead_swap_unfixed", "gate_direction"}


def pass_names(demo_bugs: bool = False) -> list[str]:
    return list(PASSES) + (list(DEMO_MUTANTS) if demo_bugs else [])


def make_pass(name: str, config: PassConfig | None = None, demo_bugs: bool = False,
              require_map: bool = True) -> BasePass:
    """Instantiate a registered pass from a shared configuration."""
    config = config or PassConfig()
    table = {**PASSES, **(DEMO_MUTANTS if demo_bugs else {})}
    if name not in table:
        hint = " (demo mutants need --demo-bugs)" if name in DEMO_MUTANTS else ""
        raise UnknownPassError(f"unknown pass {name!r}{hint}")
    cls = table[name]
    if name in _NEEDS_MAP and config.coupling_map is None and require_map:
        raise ConfigError(f"{name} requires a coupling map")
    params = cls._get_param_names()
    kw = {}
    if "coupling_map" in params:
        kw["coupling_map"] = config.coupling_map
    if "layout" in params and config.layout is not None:
        kw["layout"] = config.layout
    if "basis" in params and config.basis:
        kw["basis"] = tuple(config.basis)
    if "seed" in params:
        kw["seed"] = config.seed
    if "depth" in params:
        kw["depth"] = config.lookahead_depth
    if "width" in params:
        kw["width"] = config.lookahead_width
    return cls(**kw)
