"""Peephole optimizations: CX cancellation, commutation-group cancellation,
one-qubit run merging and one-qubit resynthesis."""

from __future__ import annotations

import math

from ..circuit import Circuit, Gate, next_gate
from ..framework import (BranchSpec, CollectRuns, PassKind, WhileGateRemaining,
                         collect_commutation_groups, merge_1q, run_template, zyz_u3)
from ..semantics import gate_matrix
from ..symbolic.prover import Assumption, DerivedDomain, GateDomain, SeqDomain
from ..symbolic.terms import Angle
from .base import C1, C2, OUT, REM, SLOTS1, SLOTS2, BasePass, Frag, gvar, sg

_CX = sg("CX", 0, 1)


def _avoids(name: str, slots: set[int]):
    return lambda env: all(not slots.intersection(g.qubits) for g in env[name])


class CXCancellation(BasePass):
    """Remove pairs of identical CX gates with nothing in between on their
    qubits. Rounds repeat until the gate count stops shrinking."""

    kind = PassKind.OPTIMIZATION
    pass_name = "cx_cancellation"

    def __init__(self, checked=False):
        self.checked = checked

    def _body(self, state):
        rem = state.remain
        g = rem[0]
        if g.kind == "CX" and not g.conditioned:
            j = next_gate(rem, 0)
            if j is not None and rem[j].kind == "CX" and not rem[j].conditioned \
                    and rem[j].qubits == g.qubits:
                state.branch("cx-match")
                state.delete(j)
                state.delete(0)
                return
            state.branch("cx-no-match")
        else:
            state.branch("other")
        state.append(state.delete(0))

    def templates(self):
        next_gate = Assumption("next-gate", (C1, _CX), (_CX, C1), frozenset({"C1-avoids-cx"}))
        branches = [
            BranchSpec("cx-match", SLOTS2, (_CX, C1, _CX, C2), (), (C1, C2),
                       assumptions=(next_gate,), facts=frozenset({"C1-avoids-cx"}),
                       constraints=(_avoids("C1", {0, 1}),), appends_to=(),
                       deletes_from=("remain",), deletions=2),
            BranchSpec("cx-no-match", SLOTS2, (_CX, REM), (_CX,), (REM,),
                       deletes_from=("remain",), deletions=1),
            BranchSpec("other", SLOTS2, (Frag("G"), REM), (Frag("G"),), (REM,),
                       deletes_from=("remain",), deletions=1),
        ]
        return [WhileGateRemaining(self._body, branches, name="cx_cancellation.loop")]

    def run(self, c, props):
        (loop,) = self.templates()
        while True:
            out = run_template(loop, c, checked=self.checked)
            if len(out) == len(c):
                return out
            c = out


# --------------------------------------------------------------------------

_CANCEL = ("X", "Z", "H", "CX")
_DIAG = {"Z": math.pi, "T": math.pi / 4}


def _diag_angle(g: Gate) -> float | None:
    if g.conditioned:
        return None
    if g.kind == "U1":
        return g.params[0]
    return _DIAG.get(g.kind)


def _is_zero_angle(x: float) -> bool:
    return abs(math.remainder(x, 2 * math.pi)) < 1e-12


class CommutativeCancellation(BasePass):
    """Cancel self-inverse pairs and merge phase gates inside commutation
    groups. A gate joins the current group only if it commutes with every
    member; gates outside {CX, X, Z, H, T, U1, U2, U3} (or conditioned)
    stand alone."""

    kind = PassKind.OPTIMIZATION
    pass_name = "commutative_cancellation"
    _pairwise = True

    def __init__(self, checked=False):
        self.checked = checked

    def _partition(self, c):
        return collect_commutation_groups(c, pairwise=self._pairwise)

    def _reduce_once(self, state, gates: list[Gate]) -> bool:
        for i, gi in enumerate(gates):
            if gi.kind not in _CANCEL or gi.conditioned:
                continue
            for j in range(i + 1, len(gates)):
                gj = gates[j]
                if gj.kind == gi.kind and gj.qubits == gi.qubits and not gj.conditioned:
                    state.branch(f"cancel-{gi.kind}")
                    del gates[j], gates[i]
                    return True
        for i, gi in enumerate(gates):
            a = _diag_angle(gi)
            if a is None:
                continue
            for j in range(i + 1, len(gates)):
                b = _diag_angle(gates[j])
                if b is None or gates[j].qubits != gi.qubits:
                    continue
                for g in (gi, gates[j]):
                    if g.kind != "U1":
                        state.branch(f"as-u1-{g.kind}")
                state.branch("merge-u1")
                gates[i] = Gate("U1", gi.qubits, (a + b,))
                del gates[j]
                return True
        for i, g in enumerate(gates):
            if g.kind == "U1" and not g.conditioned and _is_zero_angle(g.params[0]):
                state.branch("u1-zero")
                del gates[i]
                return True
        return False

    def _body(self, state, batch):
        gates = list(batch)
        while self._reduce_once(state, gates):
            pass
        state.branch("emit")
        state.replace_batch(gates)

    def _contract_facts(self) -> frozenset:
        return frozenset({"checked-last", "checked-all"})

    def templates(self):
        grouped = frozenset({"group-pairwise"})
        branches = []
        for k in _CANCEL:
            g = _CX if k == "CX" else sg(k, 0)
            branches.append(BranchSpec(
                f"cancel-{k}", SLOTS2, (g, C1, g, C2), (C1, C2),
                assumptions=(Assumption("group-commute", (C1, g), (g, C1), grouped),),
                facts=grouped, appends_to=("output",)))
        al, be = Angle.var("alpha"), Angle.var("beta")
        u_b = sg("U1", 0, params=[be])
        branches.append(BranchSpec(
            "merge-u1", SLOTS1, (sg("U1", 0, params=[al]), C1, u_b, C2),
            (sg("U1", 0, params=[al + be]), C1, C2),
            assumptions=(Assumption("group-commute", (C1, u_b), (u_b, C1), grouped),),
            facts=grouped))
        for k, ang in _DIAG.items():
            branches.append(BranchSpec(f"as-u1-{k}", SLOTS1, (sg(k, 0), C1),
                                       (sg("U1", 0, params=[ang]), C1)))
        branches.append(BranchSpec("u1-zero", SLOTS1, (sg("U1", 0, params=[0.0]), C1), (C1,)))
        branches.append(BranchSpec("emit", SLOTS2, (C1,), (C1,)))
        # The grouping contract: a gate that joined the group commutes with
        # every earlier member, so it may be moved to the front.
        a, b, g = gvar("?A", 0), gvar("?B", 1), gvar("?G", 0)
        dom = GateDomain(("H", "X", "Z", "T"), allow_conditioned=False)
        branches.append(BranchSpec(
            "group-pairwise", SLOTS2, (g, a, b), (), lhs_override=(a, b, g),
            rhs_override=(g, a, b),
            assumptions=(Assumption("group-members", (a, b), (b, a)),
                         Assumption("joins-after-last", (b, g), (g, b), frozenset({"checked-last"})),
                         Assumption("joins-after-all", (a, g), (g, a), frozenset({"checked-all"}))),
            facts=self._contract_facts(), domains={"?A": dom, "?B": dom, "?G": dom},
            appends_to=(), contract=True))
        return [CollectRuns(self._partition, self._body, branches,
                            name=f"{self.pass_name}.groups")]

    def run(self, c, props):
        (loop,) = self.templates()
        return run_template(loop, c, checked=self.checked)


class CommutativeCancellationTransitive(CommutativeCancellation):
    """Demo mutant: a gate joins a group after checking only the latest
    member, i.e. commutation is treated as transitive."""

    pass_name = "commutative_cancellation_transitive"
    demo_bug = True
    _pairwise = False

    def _contract_facts(self):
        return frozenset({"checked-last"})


# --------------------------------------------------------------------------


def wire_runs(c: Circuit, kinds, allow_conditioned: bool = False) -> list[list[int]]:
    """Maximal runs of one-qubit gates of ``kinds`` along each wire; every
    other gate is a singleton. Runs may interleave with gates on other wires."""
    open_runs: dict[int, list[int]] = {}
    batches: list[list[int]] = []
    for i, g in enumerate(c.gates):
        if g.kind in kinds and g.num_qubits == 1 and (allow_conditioned or not g.conditioned):
            open_runs.setdefault(g.qubits[0], []).append(i)
            continue
        for q in g.qubits:
            if q in open_runs:
                batches.append(open_runs.pop(q))
        batches.append([i])
    batches.extend(open_runs.values())
    return batches


class Optimize1qGates(BasePass):
    """Collapse each run of u1/u2/u3/rz gates on a wire into one gate.
    Conditioned gates end runs and are never merged."""

    kind = PassKind.OPTIMIZATION
    pass_name = "optimize_1q_gates"
    run_kinds = ("U1", "U2", "U3", "RZ")
    _guard = True

    def __init__(self, checked=False):
        self.checked = checked

    def _partition(self, c):
        return wire_runs(c, self.run_kinds, allow_conditioned=not self._guard)

    def _merge(self, a: Gate, b: Gate) -> Gate | None:
        return merge_1q(a, b, guard=self._guard)

    def _finish(self, state, acc: Gate) -> list[Gate]:
        return [acc]

    def _body(self, state, batch):
        if len(batch) == 1:
            state.branch("single")
            state.replace_batch(self._finish(state, batch[0]) if batch[0].kind in self.run_kinds
                                and not batch[0].conditioned else batch)
            return
        done, acc = [], batch[0]
        for g in batch[1:]:
            m = self._merge(acc, g)
            if m is None:
                state.branch("flush")
                done.append(acc)
                acc = g
            else:
                state.branch("fold")
                acc = m
        state.replace_batch(done + self._finish(state, acc))

    def _facts(self) -> frozenset:
        return frozenset({"unconditioned"}) if self._guard else frozenset()

    def _domains(self) -> dict:
        return {"?M1": GateDomain(("U1", "U3", "U2", "RZ")),
                "?G": GateDomain(("U3", "U1", "U2", "RZ")),
                "?M": DerivedDomain(lambda env: self._merge(env["?M1"], env["?G"]))}

    def _extra_branches(self) -> list[BranchSpec]:
        return []

    def templates(self):
        m1, g, m = gvar("?M1", 0), gvar("?G", 0), gvar("?M", 0)
        spec = Assumption("merge-spec", (m1, g), (m,), frozenset({"unconditioned"}))
        branches = [
            BranchSpec("single", SLOTS1, (C1,), (C1,)),
            BranchSpec("flush", SLOTS1, (m1, g), (m1, g)),
            BranchSpec("fold", SLOTS1, (m1, g), (m,), assumptions=(spec,),
                       facts=self._facts(), domains=self._domains()),
        ] + self._extra_branches()
        return [CollectRuns(self._partition, self._body, branches, name=f"{self.pass_name}.runs")]

    def run(self, c, props):
        (loop,) = self.templates()
        return run_template(loop, c, checked=self.checked)


class Optimize1qGatesUnguarded(Optimize1qGates):
    """Demo mutant: runs and merges ignore the classical condition."""

    pass_name = "optimize_1q_gates_unguarded"
    demo_bug = True
    _guard = False


def _product_u3(a: Gate, b: Gate) -> Gate | None:
    if a.conditioned or b.conditioned or a.qubits != b.qubits:
        return None
    return zyz_u3(gate_matrix(b) @ gate_matrix(a), a.qubits[0])


class Synthesize1q(Optimize1qGates):
    """Resynthesize every run of unconditioned one-qubit gates (any kind)
    as a single u3, or u1 when diagonal; identities disappear."""

    kind = PassKind.SYNTHESIS
    pass_name = "synthesize_1q"
    run_kinds = ("X", "Y", "Z", "H", "S", "T", "RZ", "U1", "U2", "U3")

    def _merge(self, a, b):
        return _product_u3(a, b)

    def _finish(self, state, acc):
        if acc.kind == "U1" and _is_zero_angle(acc.params[0]):
            state.branch("identity")
            return []
        if acc.kind not in ("U1", "U3"):
            state.branch("resynthesize")
            return [zyz_u3(gate_matrix(acc), acc.qubits[0])]
        return [acc]

    def _domains(self):
        kinds = ("H", "X", "Y", "T", "S", "U3")
        return {"?M1": GateDomain(kinds, False), "?G": GateDomain(kinds, False),
                "?M": DerivedDomain(lambda env: _product_u3(env["?M1"], env["?G"]))}

    def _extra_branches(self):
        m1, m = gvar("?M1", 0), gvar("?M", 0)
        spec = Assumption("synthesis-spec", (m1,), (m,), frozenset({"unconditioned"}))
        dom = {"?M1": GateDomain(("H", "X", "Y", "Z", "S", "T", "U2"), False),
               "?M": DerivedDomain(lambda env: zyz_u3(gate_matrix(env["?M1"]), 0))}
        return [
            BranchSpec("identity", SLOTS1, (sg("U1", 0, params=[0.0]), C1), (C1,)),
            BranchSpec("resynthesize", SLOTS1, (m1,), (m,), assumptions=(spec,),
                       facts=self._facts(), domains=dom),
        ]
