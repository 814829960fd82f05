"""Basis change, gate direction, measurement/barrier bookkeeping and the
read-only analysis passes."""

from __future__ import annotations

from collections import Counter

from ..circuit import BARRIER, Circuit, CircuitError, Gate, UnsupportedGateError
from ..framework import BranchSpec, CollectRuns, IterateAllGates, PassKind, run_template
from ..symbolic.rules import rule_by_name
from ..symbolic.terms import Angle, Op, SymGate
from .base import C1, OUT, REM, SLOTS1, SLOTS2, BasePass, require_map, sg

# kind -> rule whose left side is that gate and whose right side is in basis
_UNROLL = {
    "X": "x-as-u3", "Y": "y-as-u3", "H": "h-as-u2", "Z": "z-as-u1", "T": "t-as-u1",
    "S": "s-as-u1", "RZ": "rz-as-u1", "U2": "u2-as-u3", "SWAP": "swap-decomposition",
}
DEFAULT_BASIS = ("U1", "U2", "U3", "CX")


def _ground(items):
    """Rename a rule's pattern angles into ordinary goal variables."""
    out = []
    for x in items:
        env = {v: Angle.var(v.lstrip("?")) for p in x.op.params for v in p.vars()}
        out.append(SymGate(Op(x.op.kind, tuple(p.substitute(env) for p in x.op.params),
                              x.op.conditioned), x.qubits))
    return tuple(out)


def _expand(g: Gate) -> list[Gate]:
    rule = rule_by_name(_UNROLL[g.kind])
    names = [a.single_var for a in rule.lhs_circuit[0].op.params]
    angles = dict(zip(names, g.params))
    lhs, rhs, _ = rule.concrete(angles)
    return [h.relabel(g.qubits) for h in rhs.gates]


class UnrollToBasis(BasePass):
    """Rewrite gates outside ``basis`` through the catalog's decomposition
    rules until everything is in the basis. Conditioned and opaque gates
    pass through unchanged (a phase-equivalent rewrite of a conditioned gate
    is not equivalent)."""

    kind = PassKind.BASIS_CHANGE
    pass_name = "unroll_to_basis"

    def __init__(self, basis=DEFAULT_BASIS, checked=False):
        self.basis = basis
        self.checked = checked

    def _body(self, state, g):
        basis = set(self.basis)
        if g.kind in basis or g.conditioned or not g.is_unitary:
            state.branch("keep")
            state.append(g)
            return
        todo, out = [g], []
        while todo:
            h = todo.pop(0)
            if h.kind in basis:
                out.append(h)
                continue
            if h.kind not in _UNROLL:
                raise UnsupportedGateError(f"cannot express {h.kind} in basis {sorted(basis)}")
            state.branch(f"unroll-{h.kind}")
            todo[:0] = _expand(h)
        state.append(*out)

    def templates(self):
        branches = [BranchSpec("keep", SLOTS2, (C1,), (C1,))]
        for kind, rule_name in _UNROLL.items():
            rule = rule_by_name(rule_name)
            slots = SLOTS2 if rule.arity == 2 else SLOTS1
            branches.append(BranchSpec(f"unroll-{kind}", slots, _ground(rule.lhs_circuit),
                                       _ground(rule.rhs_circuit)))
        return [IterateAllGates(self._body, branches, name="unroll_to_basis.loop")]

    def run(self, c, props):
        missing = {"U3", "CX"} - set(self.basis)
        if missing:
            raise CircuitError(f"basis must contain {sorted(missing)}")
        (loop,) = self.templates()
        return run_template(loop, c, checked=self.checked)


class GateDirection(BasePass):
    """Flip CX gates that run against a directed edge using Hadamards."""

    kind = PassKind.ASSORTED
    pass_name = "gate_direction"

    def __init__(self, coupling_map=None, checked=False):
        self.coupling_map = coupling_map
        self.checked = checked

    def _body(self, state, g):
        if g.kind == "CX":
            c, t = g.qubits
            if not self._cmap.has_edge(c, t):
                raise CircuitError(f"{g} is not on a coupling edge")
            allowed = self._cmap.allowed_direction(c, t)
            if allowed == (t, c):
                # a conditioned CX is reversed with every Hadamard under the same condition
                state.branch("reverse-conditioned" if g.conditioned else "reverse")
                lo, hi = sorted((c, t))
                hs = tuple(Gate("H", (q,), (), g.conditioned, g.clbit) for q in (lo, hi))
                state.append(*hs, Gate("CX", (t, c), (), g.conditioned, g.clbit), *hs)
                return
        state.branch("keep")
        state.append(g)

    def templates(self):
        rule = rule_by_name("cx-direction")
        branches = [BranchSpec("keep", SLOTS2, (C1,), (C1,)),
                    BranchSpec("reverse", SLOTS2, rule.lhs_circuit, rule.rhs_circuit)]
        if rule.lhs_circuit != (sg("CX", 0, 1),):
            branches[1] = BranchSpec("reverse", SLOTS2, rule.rhs_circuit, rule.lhs_circuit)
        cond = rule_by_name("cx-direction-conditioned")
        branches.append(BranchSpec("reverse-conditioned", SLOTS2, cond.lhs_circuit, cond.rhs_circuit))
        return [IterateAllGates(self._body, branches, name="gate_direction.loop")]

    def run(self, c, props):
        self._cmap = require_map(self)
        (loop,) = self.templates()
        return run_template(loop, c, checked=self.checked)


def final_measurements(c: Circuit) -> set[int]:
    """Indices of MEASURE gates with no later gate on their qubit."""
    later: set[int] = set()
    out = set()
    for i in range(len(c.gates) - 1, -1, -1):
        g = c.gates[i]
        if g.kind == "MEASURE" and g.qubits[0] not in later:
            out.add(i)
        later.update(g.qubits)
    return out


_MEASURE = SymGate.of(Gate("MEASURE", (0,), clbit=0))


class RemoveFinalMeasure(BasePass):
    """Drop measurements that are the last operation on their qubit."""

    kind = PassKind.ASSORTED
    pass_name = "remove_final_measure"

    def __init__(self, checked=False):
        self.checked = checked

    def _body(self, state, g):
        if state.aux["index"] in state.aux["final"]:
            state.branch("drop-measure")
            return
        state.branch("keep")
        state.append(g)

    def templates(self):
        m = Gate("MEASURE", (0,), clbit=0)
        branches = [BranchSpec("keep", SLOTS1, (C1,), (C1,)),
                    BranchSpec("drop-measure", SLOTS1, (m, REM), (REM,), erase_opaque=True,
                               appends_to=())]
        return [IterateAllGates(self._body, branches, name="remove_final_measure.loop",
                                shadow=lambda state, consumed: None)]

    def run(self, c, props):
        (loop,) = self.templates()
        state = loop.run(c, checked=self.checked, aux={"final": final_measurements(c)})
        return Circuit(c.nqreg, tuple(state.output), c.ncreg)


def _barrier_runs(c: Circuit) -> list[list[int]]:
    runs: list[list[int]] = []
    for i, g in enumerate(c.gates):
        if g.kind == "BARRIER" and runs and c.gates[runs[-1][-1]].kind == "BARRIER":
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


class MergeAdjacentBarriers(BasePass):
    """Fuse consecutive barriers into one barrier over the union of qubits."""

    kind = PassKind.ASSORTED
    pass_name = "merge_adjacent_barriers"

    def __init__(self, checked=False):
        self.checked = checked

    def _body(self, state, batch):
        if len(batch) == 1:
            state.branch("emit")
            state.replace_batch(batch)
            return
        state.branch("fuse")
        qs = sorted({q for g in batch for q in g.qubits})
        state.replace_batch([BARRIER(*qs)])

    def templates(self):
        fused = Gate("BARRIER", (0, 1))
        branches = [BranchSpec("emit", SLOTS2, (C1,), (C1,)),
                    BranchSpec("fuse", SLOTS2, (Gate("BARRIER", (0,)), Gate("BARRIER", (0, 1))),
                               (fused,), erase_opaque=True)]
        return [CollectRuns(_barrier_runs, self._body, branches, name="merge_adjacent_barriers.runs",
                            shadow=lambda state, consumed: None)]

    def run(self, c, props):
        (loop,) = self.templates()
        return run_template(loop, c, checked=self.checked)


class BarrierBeforeFinalMeasure(BasePass):
    """Insert one barrier over all finally-measured qubits just before the
    first final measurement."""

    kind = PassKind.ASSORTED
    pass_name = "barrier_before_final_measure"

    def __init__(self, checked=False):
        self.checked = checked

    def _body(self, state, g):
        if state.aux["index"] == state.aux["first"]:
            state.branch("insert-barrier")
            state.append(BARRIER(*state.aux["qubits"]), g)
            return
        state.branch("keep")
        state.append(g)

    def templates(self):
        m = Gate("MEASURE", (0,), clbit=0)
        branches = [BranchSpec("keep", SLOTS2, (C1,), (C1,)),
                    BranchSpec("insert-barrier", SLOTS2, (m,), (Gate("BARRIER", (0, 1)), m),
                               erase_opaque=True)]
        return [IterateAllGates(self._body, branches, name="barrier_before_final_measure.loop",
                                shadow=lambda state, consumed: None)]

    def run(self, c, props):
        final = final_measurements(c)
        aux = {"first": min(final) if final else -1,
               "qubits": sorted({c.gates[i].qubits[0] for i in final})}
        (loop,) = self.templates()
        state = loop.run(c, checked=self.checked, aux=aux)
        return Circuit(c.nqreg, tuple(state.output), c.ncreg)


# --------------------------------------------------------------------------
# analysis


def circuit_depth(c: Circuit) -> int:
    level = [0] * c.nqreg
    for g in c.gates:
        if g.kind == "BARRIER":
            continue
        d = 1 + max(level[q] for q in g.qubits)
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


class _Analysis(BasePass):
    kind = PassKind.ANALYSIS
    modifies_circuit = False
    key = ""

    def compute(self, c: Circuit):
        raise NotImplementedError

    def run(self, c, props):
        props[self.key] = self.compute(c)
        setattr(self, self.key + "_", props[self.key])
        return c


class Depth(_Analysis):
    pass_name, key = "depth", "depth"

    def compute(self, c):
        return circuit_depth(c)


class Size(_Analysis):
    pass_name, key = "size", "size"

    def compute(self, c):
        return len(c.gates)


class Width(_Analysis):
    pass_name, key = "width", "width"

    def compute(self, c):
        return c.nqreg


class CountOps(_Analysis):
    pass_name, key = "count_ops", "count_ops"

    def compute(self, c):
        return dict(sorted(Counter(g.kind for g in c.gates).items()))
