"""Authoring surface for verifiable passes.

A pass body runs inside one of three loop templates and reports what it
does through a tiny effect vocabulary (append / delete / replace-batch).
Alongside the executable body, every template carries a symbolic description
of its branches, which the verifier turns into proof goals. Checked mode
cross-examines the two at run time: the branch taken must be declared, its
effects must stay inside the declaration, progress must be made, and the
loop invariant must hold on the matrix oracle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .circuit import COMMUTATION_SET, Circuit, CircuitError, Gate, commutes
from .semantics import circuit_distance, gate_matrix
from .symbolic.prover import Assumption, ProofGoal
from .symbolic.terms import Frag, Item

ORACLE_QUBITS = 6


class PassKind(str, Enum):
    LAYOUT = "Layout"
    ROUTING = "Routing"
    BASIS_CHANGE = "BasisChange"
    OPTIMIZATION = "Optimization"
    ANALYSIS = "Analysis"
    SYNTHESIS = "Synthesis"
    ASSORTED = "Assorted"

    @property
    def obligation(self) -> str:
        if self is PassKind.ANALYSIS:
            return "ReadOnly"
        if self in (PassKind.ROUTING, PassKind.LAYOUT):
            return "PermutationEquivalence"
        return "Equivalence"


class TemplateError(RuntimeError):
    """A body broke its template's contract."""


class ProgressViolation(TemplateError):
    pass


class NonTermination(TemplateError):
    """The loop revisited a state; ``gates`` is what it emitted in between."""

    def __init__(self, msg: str, cycle_start: int, cycle_length: int, state: Any = None,
                 gates: Sequence[Gate] = ()):
        super().__init__(msg)
        self.cycle_start = cycle_start
        self.cycle_length = cycle_length
        self.state = state
        self.gates = tuple(gates)


class FuseTripped(TemplateError):
    """An internal iteration bound was exceeded (a bug signal)."""


class AmbiguousBindingError(TemplateError):
    pass


class UnboundPlaceholderError(TemplateError):
    pass


# --------------------------------------------------------------------------
# effects


@dataclass(frozen=True)
class Append:
    target: str
    gates: tuple[Gate, ...]


@dataclass(frozen=True)
class Delete:
    target: str
    index: int


@dataclass(frozen=True)
class ReplaceBatch:
    target: str
    gates: tuple[Gate, ...]


class LoopState:
    """Mutable loop state; every mutation goes through the effect API."""

    def __init__(self, input: Circuit, aux: dict | None = None):
        self.input = input
        self.nqreg = input.nqreg
        self.lists: dict[str, list[Gate]] = {"output": [], "remain": list(input.gates)}
        self.aux: dict = dict(aux or {})
        self.effects: list = []
        self.branches: list[str] = []

    @property
    def output(self) -> list[Gate]:
        return self.lists["output"]

    @property
    def remain(self) -> list[Gate]:
        return self.lists["remain"]

    def branch(self, name: str):
        self.branches.append(name)

    def append(self, *gates: Gate, target: str = "output"):
        self.lists.setdefault(target, []).extend(gates)
        self.effects.append(Append(target, tuple(gates)))

    def delete(self, index: int, target: str = "remain") -> Gate:
        g = self.lists[target].pop(index)
        self.effects.append(Delete(target, index))
        return g

    def replace_batch(self, gates: Iterable[Gate], target: str = "output"):
        gates = tuple(gates)
        self.lists.setdefault(target, []).extend(gates)
        self.effects.append(ReplaceBatch(target, gates))

    def _begin(self):
        self.effects, self.branches = [], []


# --------------------------------------------------------------------------
# symbolic branch declarations


OUT = Frag("OUT")


@dataclass
class BranchSpec:
    """Symbolic description of one path through a loop body.

    ``consumed`` is what the step reads (the old remaining list, the current
    gate, or the current batch), ``emitted`` what it appends to the output
    and ``remaining`` the new remaining list (WhileGateRemaining only).
    ``facts`` are established by the branch condition; assumptions whose
    ``requires`` are not covered by the facts are withheld from the goal.
    """

    name: str
    slots: tuple[str, ...]
    consumed: tuple[Item, ...]
    emitted: tuple[Item, ...]
    remaining: tuple[Item, ...] = ()
    rhs_suffix: tuple[Item, ...] = ()
    assumptions: tuple[Assumption, ...] = ()
    facts: frozenset = frozenset()
    domains: dict = field(default_factory=dict)
    constraints: tuple = ()
    appends_to: tuple[str, ...] = ("output",)
    deletes_from: tuple[str, ...] = ()
    deletions: int = 0
    erase_opaque: bool = False
    contract: bool = False
    lhs_override: tuple[Item, ...] | None = None
    rhs_override: tuple[Item, ...] | None = None

    def goal(self, prefix: tuple[Item, ...] = (OUT,)) -> ProofGoal:
        if self.lhs_override is not None:
            lhs, rhs = self.lhs_override, self.rhs_override
        else:
            lhs = prefix + tuple(self.emitted) + tuple(self.remaining)
            rhs = prefix + tuple(self.consumed) + tuple(self.rhs_suffix)
        usable = tuple(a for a in self.assumptions if a.requires <= self.facts)
        return ProofGoal(self.slots, lhs, rhs, usable, dict(self.domains), tuple(self.constraints),
                         erase_opaque=self.erase_opaque, name=self.name)


@dataclass(frozen=True)
class InvariantSchema:
    template: str
    bindings: dict
    shape: str

    def __str__(self):
        return self.shape


# --------------------------------------------------------------------------
# templates


def _default_shadow(kind: str):
    def check(state: LoopState, consumed: list[Gate]) -> float | None:
        n = state.nqreg
        if n > ORACLE_QUBITS:
            return None
        if kind == "while":
            lhs = state.output + state.remain
            rhs = list(state.input.gates)
        else:
            lhs, rhs = state.output, consumed
        if not all(g.is_unitary for g in lhs + rhs):
            lhs = [g for g in lhs if g.is_unitary]
            rhs = [g for g in rhs if g.is_unitary]
        return circuit_distance(Circuit(n, tuple(rhs)), Circuit(n, tuple(lhs)))
    return check


@dataclass
class _Template:
    body: Callable
    branches: list[BranchSpec]
    name: str = "loop"
    shadow: Callable | None = None
    state_key: Callable | None = None

    kind = ""

    def declared(self, name: str) -> BranchSpec:
        for b in self.branches:
            if b.name == name:
                return b
        raise TemplateError(f"{self.name}: body took undeclared branch {name!r}")

    def _check_step(self, state: LoopState):
        if not state.branches:
            raise TemplateError(f"{self.name}: body step did not name its branch")
        specs = [self.declared(b) for b in state.branches]
        appends = {t for s in specs for t in s.appends_to}
        deletes = {t for s in specs for t in s.deletes_from}
        for e in state.effects:
            if isinstance(e, (Append, ReplaceBatch)) and e.target not in appends:
                raise TemplateError(f"{self.name}: undeclared append to {e.target!r}")
            if isinstance(e, Delete) and e.target not in deletes:
                raise TemplateError(f"{self.name}: undeclared deletion from {e.target!r}")
        done = sum(isinstance(e, Delete) for e in state.effects)
        need = max(s.deletions for s in specs)
        if done < need:
            raise TemplateError(f"{self.name}: branch declared {need} deletions, performed {done}")

    def _shadow_check(self, state: LoopState, consumed: list[Gate], tol: float = 1e-9):
        check = self.shadow or _default_shadow(self.kind)
        dev = check(state, consumed)
        if dev is not None and dev > tol:
            raise TemplateError(f"{self.name}: loop invariant broken (deviation {dev:.3g})")


class IterateAllGates(_Template):
    """One body step per input gate; invariant: output == first i gates."""

    kind = "iterate"

    def run(self, c: Circuit, checked: bool = False, aux: dict | None = None) -> LoopState:
        state = LoopState(c, aux)
        for i, g in enumerate(c.gates):
            state._begin()
            state.aux["index"] = i
            self.body(state, g)
            if checked:
                self._check_step(state)
                self._shadow_check(state, list(c.gates[: i + 1]))
        return state


class WhileGateRemaining(_Template):
    """Loop until the remaining list is empty; invariant: output;remain == input."""

    kind = "while"

    def run(self, c: Circuit, checked: bool = False, aux: dict | None = None,
            max_iterations: int | None = None, detect_cycles: bool = False) -> LoopState:
        state = LoopState(c, aux)
        seen: dict = {}
        it = 0
        while state.remain:
            if detect_cycles:
                key = self.state_key(state) if self.state_key else (tuple(state.remain),)
                if key in seen:
                    start, emitted = seen[key]
                    raise NonTermination(f"{self.name}: state revisited after {it - start} iterations",
                                         start, it - start, key, state.output[emitted:])
                seen[key] = (it, len(state.output))
            if max_iterations is not None and it >= max_iterations:
                raise NonTermination(f"{self.name}: no termination within {max_iterations} iterations",
                                     -1, 0)
            before = len(state.remain)
            state._begin()
            self.body(state)
            it += 1
            if checked:
                self._check_step(state)
                if len(state.remain) >= before:
                    raise ProgressViolation(f"{self.name}: remaining list did not shrink")
                self._shadow_check(state, [])
        return state


class CollectRuns(_Template):
    """Partition the circuit into batches, one body step per batch.

    ``partition(circuit) -> list of index lists``; a batch's replacement is
    emitted where its last gate stood, so batches must be wire-contiguous.
    """

    kind = "collect"

    def __init__(self, partition: Callable, body: Callable, branches: list[BranchSpec],
                 name: str = "loop", shadow: Callable | None = None):
        super().__init__(body, branches, name, shadow)
        self.partition = partition

    def batches(self, c: Circuit) -> list[list[int]]:
        parts = [list(b) for b in self.partition(c)]
        flat = sorted(i for b in parts for i in b)
        if flat != list(range(len(c))):
            raise TemplateError(f"{self.name}: partition does not cover the circuit exactly")
        return sorted(parts, key=lambda b: max(b))

    def run(self, c: Circuit, checked: bool = False, aux: dict | None = None) -> LoopState:
        state = LoopState(c, aux)
        state.lists["remain"] = []
        consumed: set[int] = set()
        for batch in self.batches(c):
            state._begin()
            self.body(state, [c.gates[i] for i in batch])
            consumed.update(batch)
            if checked:
                self._check_step(state)
                self._shadow_check(state, [c.gates[i] for i in sorted(consumed)])
        return state


def run_template(t: _Template, c: Circuit, checked: bool = False, **kw) -> Circuit:
    state = t.run(c, checked=checked, **kw)
    return Circuit(c.nqreg, tuple(state.output), c.ncreg)


def infer_invariant(t: _Template, body: Sequence[BranchSpec] | None = None) -> InvariantSchema:
    """Bind the template's placeholders from the declared effects: the
    appended-to list is ?output, the deleted-from list is ?remaining_gates."""
    branches = [b for b in (t.branches if body is None else body) if not b.contract]
    appended = sorted({x for b in branches for x in b.appends_to})
    deleted = sorted({x for b in branches for x in b.deletes_from})
    if len(appended) > 1:
        raise AmbiguousBindingError(f"{t.name}: body appends to {appended}; ?output is ambiguous")
    if not appended:
        raise UnboundPlaceholderError(f"{t.name}: nothing is appended to, ?output is unbound")
    bindings = {"?output": appended[0], "?input": "input"}
    if t.kind == "while":
        if len(deleted) > 1:
            raise AmbiguousBindingError(f"{t.name}: body deletes from {deleted}")
        if not deleted:
            raise UnboundPlaceholderError(f"{t.name}: nothing is deleted from, ?remaining_gates is unbound")
        bindings["?remaining_gates"] = deleted[0]
        shape = f"[[{appended[0]} ; {deleted[0]}]] == [[input]]"
    elif t.kind == "iterate":
        shape = f"[[{appended[0]}]] == [[input[:i+1]]]"
    else:
        shape = f"[[{appended[0]}]] == [[first i batches of input]]"
    return InvariantSchema(type(t).__name__, bindings, shape)


# --------------------------------------------------------------------------
# verified utilities

MERGEABLE = {"U1", "U2", "U3", "RZ", "H", "X", "Z", "T", "S"}
_DIAG_ANGLE = {"Z": math.pi, "T": math.pi / 4, "S": math.pi / 2}


def _phase_angle(g: Gate) -> float | None:
    """Angle of a diagonal gate written as u1 (up to global phase)."""
    if g.kind in ("U1", "RZ"):
        return g.params[0]
    return _DIAG_ANGLE.get(g.kind)


def zyz_u3(m: np.ndarray, q: int) -> Gate:
    """Single U3 (U1 when diagonal) phase-equivalent to the 2x2 unitary m."""
    m = np.asarray(m, dtype=complex)
    c, s = abs(m[0, 0]), abs(m[1, 0])
    theta = math.atan2(s, c)
    if s < 1e-12:
        return Gate("U1", (q,), (_wrap(cmath.phase(m[1, 1]) - cmath.phase(m[0, 0])),))
    if c < 1e-12:
        alpha = cmath.phase(m[1, 0])
        return Gate("U3", (q,), (theta, 0.0, _wrap(cmath.phase(-m[0, 1]) - alpha)))
    alpha = cmath.phase(m[0, 0])
    phi = cmath.phase(m[1, 0]) - alpha
    lam = cmath.phase(-m[0, 1]) - alpha
    return Gate("U3", (q,), (theta, _wrap(phi), _wrap(lam)))


def _wrap(x: float) -> float:
    y = math.remainder(x, 2 * math.pi)
    return 0.0 if abs(y) < 1e-15 else y


def merge_1q(g1: Gate, g2: Gate, guard: bool = True) -> Gate | None:
    """Merge g1 followed by g2 into one gate, or None when either is
    conditioned (``guard=False`` drops that check and is unsound)."""
    for g in (g1, g2):
        if g.kind not in MERGEABLE or g.num_qubits != 1:
            raise CircuitError(f"merge_1q needs one-qubit gates from {sorted(MERGEABLE)}, got {g}")
    if g1.qubits != g2.qubits:
        raise CircuitError(f"merge_1q on different qubits: {g1} vs {g2}")
    if guard and (g1.conditioned or g2.conditioned):
        return None
    q = g1.qubits[0]
    a1, a2 = _phase_angle(g1), _phase_angle(g2)
    if a1 is not None and a2 is not None:
        return Gate("U1", (q,), (a1 + a2,))
    if a1 is not None and g2.kind == "U3":
        t, p, l = g2.params
        return Gate("U3", (q,), (t, p, l + a1))
    if a2 is not None and g1.kind == "U3":
        t, p, l = g1.params
        return Gate("U3", (q,), (t, p + a2, l))
    strip = lambda g: Gate(g.kind, g.qubits, g.params)
    return zyz_u3(gate_matrix(strip(g2)) @ gate_matrix(strip(g1)), q)


def _groupable(g: Gate) -> bool:
    return g.kind in COMMUTATION_SET and not g.conditioned


def collect_commutation_groups(c: Circuit | Sequence[Gate], pairwise: bool = True) -> list[list[int]]:
    """Consecutive gates share a group iff they commute with every member.

    Gates outside the supported set (or conditioned) are singleton barriers.
    ``pairwise=False`` only compares with the latest member, which assumes
    commutation is transitive — it is not.
    """
    gates = list(c.gates if isinstance(c, Circuit) else c)
    groups: list[list[int]] = []
    open_group = False
    for i, g in enumerate(gates):
        if not _groupable(g):
            groups.append([i])
            open_group = False
            continue
        if open_group:
            members = groups[-1] if pairwise else groups[-1][-1:]
            if all(commutes(gates[j], g) for j in members):
                groups[-1].append(i)
                continue
        groups.append([i])
        open_group = True
    return groups


def transitivity_violations(gates: Sequence[Gate]) -> list[tuple[Gate, Gate, Gate]]:
    """Triples (a, b, c) with a~b and b~c but not a~c."""
    out = []
    for a in gates:
        for b in gates:
            if not commutes(a, b):
                continue
            for c in gates:
                if commutes(b, c) and not commutes(a, c):
                    out.append((a, b, c))
    return out
