"""Layout and routing passes.

Routing loops keep a layout ``lay`` (virtual wire -> physical wire). The
invariant is ``[[output ; P(lay)^-1 ; remain]] == [[input]]``: the emitted
physical circuit, followed by moving every wire back to its virtual
position, followed by the rest of the input, is the input. At exit the
output equals the input followed by the final relabeling.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from typing import Iterator

from ..circuit import Circuit, CouplingMap, Gate, Layout, ibm16, shortest_path
from ..framework import (BranchSpec, FuseTripped, IterateAllGates, LoopState, PassKind,
                         WhileGateRemaining)
from ..semantics import circuit_distance
from ..symbolic.prover import Assumption, GateDomain, permute_as_swaps
from ..symbolic.terms import Permute
from .base import (C1, DEFAULT_SEED, OUT, PI, REM, SLOTS2, BasePass, ConfigError, gvar,
                   inverse_perm, require_map, sg, widen)

_G2 = GateDomain(("CX", "SWAP"), allow_conditioned=False)


def _relabel_items(pi, before, after, emitted_swaps, gate_qubits=(0, 1)):
    """Goal sides for 'emit swaps, then emit the front gate relabeled'."""
    g = gvar("?G", *gate_qubits)
    moved = gvar("?G", *(after[q] for q in gate_qubits))
    lhs = (OUT,) + tuple(emitted_swaps) + (moved, Permute(inverse_perm(after)), REM)
    rhs = (OUT, Permute(inverse_perm(before)), g, REM)
    return lhs, rhs


def _after_swap(lay, a, b):
    """Layout after exchanging the contents of physical wires a and b."""
    return tuple(b if p == a else a if p == b else p for p in lay)


def execute_branch(name="execute", deletions=1) -> BranchSpec:
    lhs, rhs = _relabel_items(PI, PI, PI, ())
    return BranchSpec(name, SLOTS2, (), (), lhs_override=lhs, rhs_override=rhs,
                      domains={"?G": _G2}, deletes_from=("remain",), deletions=deletions)


def route_branch(name="route", deletions=1) -> BranchSpec:
    after = _after_swap(PI, 0, 2)
    lhs, rhs = _relabel_items(PI, PI, after, (sg("SWAP", 0, 2),))
    return BranchSpec(name, SLOTS2, (), (), lhs_override=lhs, rhs_override=rhs,
                      domains={"?G": _G2}, deletes_from=("remain",), deletions=deletions)


def swap_branch(name="swap") -> BranchSpec:
    after = _after_swap(PI, 0, 2)
    lhs = (OUT, sg("SWAP", 0, 2), Permute(inverse_perm(after)), REM)
    rhs = (OUT, Permute(inverse_perm(PI)), REM)
    return BranchSpec(name, SLOTS2, (), (), lhs_override=lhs, rhs_override=rhs,
                      deletes_from=(), deletions=0)


def execute_free_branch(name="execute-free") -> BranchSpec:
    """A free gate behind blocked gates on other wires is executed first."""
    g = gvar("?G", 0, 1)
    moved = gvar("?G", PI[0], PI[1])
    back = Permute(inverse_perm(PI))
    disjoint = Assumption("blocked-gates-disjoint", (C1, g), (g, C1), frozenset({"disjoint"}))
    return BranchSpec(name, SLOTS2, (), (),
                      lhs_override=(OUT, moved, back, C1, REM),
                      rhs_override=(OUT, back, C1, g, REM),
                      assumptions=(disjoint,), facts=frozenset({"disjoint"}),
                      domains={"?G": _G2}, deletes_from=("remain",), deletions=1)


def _routing_shadow(state: LoopState, consumed) -> float | None:
    n = state.nqreg
    if n > 6:
        return None
    back = permute_as_swaps(inverse_perm(state.aux["layout"]))
    lhs = [g for g in state.output + back + state.remain if g.is_unitary]
    rhs = [g for g in state.input.gates if g.is_unitary]
    return circuit_distance(Circuit(n, tuple(rhs)), Circuit(n, tuple(lhs)))


class _Router(BasePass):
    kind = PassKind.ROUTING

    def _setup(self, c: Circuit) -> tuple[Circuit, CouplingMap, dict]:
        cmap = require_map(self)
        c = widen(c, cmap.nodes)
        lay = list(range(cmap.nodes))
        return c, cmap, {"layout": lay, "inv": list(lay), "cmap": cmap}

    @staticmethod
    def _swap(state, a: int, b: int):
        lay, inv = state.aux["layout"], state.aux["inv"]
        u, v = inv[a], inv[b]
        lay[u], lay[v] = b, a
        inv[a], inv[b] = v, u
        state.append(Gate("SWAP", (a, b)))

    @staticmethod
    def _blocked(g: Gate, lay, cmap) -> bool:
        return g.num_qubits == 2 and g.is_unitary and not cmap.has_edge(lay[g.qubits[0]], lay[g.qubits[1]])

    def _finish(self, state, c, props) -> Circuit:
        final = Layout(state.aux["layout"])
        props["final_layout"] = final
        self.final_layout_ = final
        return Circuit(c.nqreg, tuple(state.output), c.ncreg)

    def verification_map(self):
        return self.coupling_map if self.coupling_map is not None else ibm16()

    def random_input(self, rng, max_gates=6):
        cmap = self.verification_map()
        gates = []
        for _ in range(rng.randint(1, max_gates)):
            a, b = rng.sample(range(cmap.nodes), 2)
            gates.append(Gate("CX", (a, b)))
        return Circuit(cmap.nodes, tuple(gates))


class BasicSwap(_Router):
    """Before each two-qubit gate whose operands are not adjacent, move the
    control along the shortest path next to the target."""

    pass_name = "basic_swap"

    def __init__(self, coupling_map=None, checked=False):
        self.coupling_map = coupling_map
        self.checked = checked

    def _body(self, state):
        lay, cmap = state.aux["layout"], state.aux["cmap"]
        g = state.remain[0]
        if self._blocked(g, lay, cmap):
            path = shortest_path(cmap, lay[g.qubits[0]], lay[g.qubits[1]])
            for k in range(len(path) - 2):
                self._swap(state, path[k], path[k + 1])
            state.branch("route")
        else:
            state.branch("execute")
        state.delete(0)
        state.append(g.relabel(lay))

    def templates(self):
        return [WhileGateRemaining(self._body, [execute_branch(), route_branch()],
                                   name="basic_swap.loop", shadow=_routing_shadow)]

    def run(self, c, props):
        c, cmap, aux = self._setup(c)
        (loop,) = self.templates()
        state = loop.run(c, checked=self.checked, aux=aux)
        return self._finish(state, c, props)


class LookaheadSwap(_Router):
    """Greedy routing on the total distance of all unresolved two-qubit gates.

    When gates are blocked, single swaps that strictly lower the total
    distance are applied (the best one by a depth/width-bounded lookahead)
    until some gate becomes executable. If no single swap lowers the
    distance, one swap is inserted on a seeded-random edge and the first
    blocked gate is then routed along its shortest path, so every iteration
    executes at least one gate.
    """

    pass_name = "lookahead_swap"

    def __init__(self, coupling_map=None, seed=DEFAULT_SEED, depth=4, width=4, checked=False):
        self.coupling_map = coupling_map
        self.seed = seed
        self.depth = depth
        self.width = width
        self.checked = checked

    # -- cost model ---------------------------------------------------------
    @staticmethod
    def _partners(remain) -> dict[int, Counter]:
        out: dict[int, Counter] = {}
        for g in remain:
            if g.num_qubits == 2 and g.is_unitary:
                a, b = g.qubits
                out.setdefault(a, Counter())[b] += 1
                out.setdefault(b, Counter())[a] += 1
        return out

    @staticmethod
    def total_distance(remain, lay, cmap) -> int:
        d = cmap.distance
        return sum(d[lay[g.qubits[0]]][lay[g.qubits[1]]] for g in remain
                   if g.num_qubits == 2 and g.is_unitary)

    @staticmethod
    def _delta(partners, lay, inv, cmap, a: int, b: int) -> int:
        d = cmap.distance
        u, v = inv[a], inv[b]
        delta = 0
        for w, k in partners.get(u, {}).items():
            if w != v:
                delta += k * (d[b][lay[w]] - d[a][lay[w]])
        for w, k in partners.get(v, {}).items():
            if w != u:
                delta += k * (d[a][lay[w]] - d[b][lay[w]])
        return delta

    def _ranked(self, partners, lay, inv, cmap):
        """Swaps ordered by (distance change, mapped endpoints, edge).

        Edges with no active qubit on either end all rank as (0, 0, edge);
        callers never look past the first ``width`` entries, so only that
        many of them are listed.
        """
        touched = set()
        for u in partners:
            p = lay[u]
            for q in cmap.neighbors[p]:
                touched.add((p, q) if p < q else (q, p))
        out = []
        for a, b in touched:
            occ = (inv[a] in partners) + (inv[b] in partners)
            out.append((self._delta(partners, lay, inv, cmap, a, b), occ, (a, b)))
        idle = (e for e in cmap.edge_list if e not in touched)
        out.extend((0, 0, e) for e in itertools.islice(idle, self.width))
        out.sort()
        return out

    def _lookahead(self, partners, lay, inv, cmap, depth: int, memo: dict) -> int:
        """Best total-distance change reachable within ``depth`` swaps, exploring
        the ``width`` best-ranked swaps at each level. ``memo`` is keyed on
        where the active qubits sit, which is all the cost depends on."""
        if depth == 0:
            return 0
        placement = tuple(lay[u] for u in partners)
        key = (depth, placement)
        if key in memo:
            return memo[key]
        ranked = memo.get(placement)
        if ranked is None:
            ranked = memo[placement] = self._ranked(partners, lay, inv, cmap)[: self.width]
        best = 0
        for delta, _, (a, b) in ranked:
            lay2, inv2 = list(lay), list(inv)
            u, v = inv2[a], inv2[b]
            lay2[u], lay2[v] = b, a
            inv2[a], inv2[b] = v, u
            best = min(best, delta + self._lookahead(partners, lay2, inv2, cmap, depth - 1, memo))
        memo[key] = best
        return best

    def _choose(self, state, require_improvement: bool):
        lay, inv, cmap = state.aux["layout"], state.aux["inv"], state.aux["cmap"]
        partners = self._partners(state.remain)
        ranked = self._ranked(partners, lay, inv, cmap)
        cands = [r for r in ranked if r[0] < 0] if require_improvement else ranked[: self.width]
        if not cands:
            return None
        if len(cands) == 1:
            return cands[0][2]
        scored, memo = [], {}
        for i, (delta, occ, (a, b)) in enumerate(cands[: self.width]):
            lay2, inv2 = list(lay), list(inv)
            u, v = inv2[a], inv2[b]
            lay2[u], lay2[v] = b, a
            inv2[a], inv2[b] = v, u
            scored.append((delta + self._lookahead(partners, lay2, inv2, cmap, self.depth - 1, memo),
                           i, (a, b)))
        return min(scored)[2]

    # -- loop ---------------------------------------------------------------
    def _map_free(self, state) -> int:
        """Execute every gate not blocked by an earlier blocked gate."""
        lay, cmap = state.aux["layout"], state.aux["cmap"]
        blocked: set[int] = set()
        free = []
        for i, g in enumerate(state.remain):
            if blocked.intersection(g.qubits) or self._blocked(g, lay, cmap):
                blocked.update(g.qubits)
                continue
            free.append(i)
        for i in reversed(free):
            state.delete(i)
        return len(free), free

    def _execute(self, state) -> bool:
        lay = state.aux["layout"]
        snapshot = list(state.remain)
        n, free = self._map_free(state)
        if not n:
            return False
        state.append(*(snapshot[i].relabel(lay) for i in free))
        state.branch("execute" if free[0] == 0 and free == list(range(len(free))) else "execute-free")
        return True

    def _tick(self, state, k: int = 1):
        state.aux["swaps"] += k
        if state.aux["swaps"] > state.aux["fuse"]:
            raise FuseTripped(f"{self.pass_name}: more than {state.aux['fuse']} swaps")

    def _body(self, state):
        if self._execute(state):
            return
        cmap = state.aux["cmap"]
        while True:
            best = self._choose(state, require_improvement=True)
            if best is None:
                break
            self._swap(state, *best)
            self._tick(state)
            if self._execute(state):
                state.branch("route-improve")
                return
        rng = state.aux["rng"]
        self._swap(state, *rng.choice(sorted(cmap.edges)))
        self._tick(state)
        if not self._execute(state):
            lay = state.aux["layout"]
            g = next(g for g in state.remain if self._blocked(g, lay, cmap))
            path = shortest_path(cmap, lay[g.qubits[0]], lay[g.qubits[1]])
            for k in range(len(path) - 2):
                self._swap(state, path[k], path[k + 1])
                self._tick(state)
            if not self._execute(state):
                raise FuseTripped(f"{self.pass_name}: escape route did not free a gate")
        state.branch("route-random")

    def templates(self):
        branches = [execute_branch(), execute_free_branch(), swap_branch("swap-step"),
                    route_branch("route-improve"), route_branch("route-random")]
        branches[2].contract = True  # a lemma used inside the routing branches
        return [WhileGateRemaining(self._body, branches, name=f"{self.pass_name}.loop",
                                   shadow=_routing_shadow, state_key=_state_key)]

    def _aux(self, c, cmap, aux):
        aux["rng"] = random.Random(self.seed)
        aux["swaps"] = 0
        aux["fuse"] = 10 * max(1, len(c)) * cmap.nodes
        return aux

    def run(self, c, props, detect_cycles: bool = False):
        c, cmap, aux = self._setup(c)
        (loop,) = self.templates()
        state = loop.run(c, checked=self.checked, aux=self._aux(c, cmap, aux),
                         detect_cycles=detect_cycles)
        props["seed"] = self.seed
        return self._finish(state, c, props)

    def termination_corpus(self) -> Iterator[Circuit]:
        cmap = self.verification_map()
        if cmap.nodes == 16:
            yield lookahead_trap_circuit()


def _state_key(state):
    return (tuple(state.aux["layout"]), len(state.remain))


class LookaheadSwapUnfixed(LookaheadSwap):
    """Demo mutant: when gates are blocked, apply the best-ranked swap even
    if it does not lower the total distance. Swaps that change nothing can
    then repeat forever."""

    pass_name = "lookahead_swap_unfixed"
    demo_bug = True

    def _body(self, state):
        if self._execute(state):
            return
        best = self._choose(state, require_improvement=False)
        self._swap(state, *best)
        state.branch("swap")

    def templates(self):
        branches = [execute_branch(), execute_free_branch(), swap_branch("swap")]
        return [WhileGateRemaining(self._body, branches, name=f"{self.pass_name}.loop",
                                   shadow=_routing_shadow, state_key=_state_key)]

    def run(self, c, props, detect_cycles: bool = True):
        c, cmap, aux = self._setup(c)
        (loop,) = self.templates()
        state = loop.run(c, checked=self.checked, aux=self._aux(c, cmap, aux),
                         detect_cycles=detect_cycles,
                         max_iterations=aux["fuse"] + len(c) + 1)
        return self._finish(state, c, props)


TRAP_PLACEMENT = (0, 8, 7, 15)


def lookahead_trap_circuit() -> Circuit:
    """Four CX gates on logical q0..q3 placed at Q0, Q8, Q7, Q15 of the
    16-qubit ladder, already expressed on physical wires."""
    q = TRAP_PLACEMENT
    pairs = [(0, 1), (2, 3), (1, 2), (0, 3)]
    return Circuit(16, tuple(Gate("CX", (q[a], q[b])) for a, b in pairs))


# --------------------------------------------------------------------------
# layout


class TrivialLayout(BasePass):
    """Place logical qubit i on physical qubit i."""

    kind = PassKind.LAYOUT
    pass_name = "trivial_layout"
    modifies_circuit = False

    def __init__(self, coupling_map=None):
        self.coupling_map = coupling_map

    def fit(self, X, y=None):
        self.layout_ = self._layout(X)
        return self

    def _layout(self, c: Circuit) -> Layout:
        n = self.coupling_map.nodes if self.coupling_map is not None else c.nqreg
        if c.nqreg > n:
            raise ConfigError(f"register of {c.nqreg} qubits exceeds the {n}-qubit device")
        return Layout(range(c.nqreg), n)

    def run(self, c, props):
        props["layout"] = self._layout(c)
        if self.coupling_map is not None:
            props["device_nodes"] = self.coupling_map.nodes
        self.layout_ = props["layout"]
        return c


class ApplyLayout(BasePass):
    """Rewrite every gate onto physical qubits through a layout (from the
    constructor, else from an earlier layout pass, else the identity)."""

    kind = PassKind.LAYOUT
    pass_name = "apply_layout"

    def __init__(self, layout=None, checked=False):
        self.layout = layout
        self.checked = checked

    def _body(self, state, g):
        state.branch("relabel")
        state.append(g.relabel(state.aux["layout"]))

    def templates(self):
        g, moved = gvar("?G", 0, 1), gvar("?G", PI[0], PI[1])
        back = Permute(inverse_perm(PI))
        b = BranchSpec("relabel", SLOTS2, (), (), lhs_override=(OUT, moved, back),
                       rhs_override=(OUT, back, g), domains={"?G": _G2})
        return [IterateAllGates(self._body, [b], name="apply_layout.loop",
                                shadow=lambda state, consumed: None)]

    def run(self, c, props):
        lay = self.layout if self.layout is not None else props.get("layout")
        lay = list(lay) if lay is not None else list(range(c.nqreg))
        if len(lay) < c.nqreg:
            raise ConfigError(f"layout covers {len(lay)} of {c.nqreg} qubits")
        n = max(c.nqreg, max(lay, default=-1) + 1, props.get("device_nodes", 0))
        Layout(lay, n)
        taken = set(lay)
        full = lay + [p for p in range(n) if p not in taken]
        (loop,) = self.templates()
        state = loop.run(Circuit(n, c.gates, c.ncreg), checked=self.checked, aux={"layout": full})
        props["layout"] = Layout(full)
        self.layout_ = props["layout"]
        return Circuit(n, tuple(state.output), c.ncreg)
