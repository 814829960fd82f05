"""Bounded equivalence prover over symbolic registers.

Both sides of a goal are executed symbolically, normalized with the oriented
rules, and then joined by a breadth-first search over the remaining rules and
the goal's assumptions, applied in either direction on either side. When the
search gives up, a seeded random search over concrete instantiations of the
goal's variables looks for a matrix-confirmed counterexample.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

from ..circuit import Circuit, Gate
from ..semantics import circuit_distance
from .rules import Equation, RewriteRule, TermGraph, apply_match, builtin_rules, find_matches
from .terms import (
    Angle, Base, DepthBoundExceeded, Frag, Item, Opaque, Permute, SymGate, Term,
    register_size, sym_apply,
)

PROVED, REFUTED, UNKNOWN = "Proved", "Refuted", "Unknown"


# --------------------------------------------------------------------------
# goals


@dataclass(frozen=True)
class Assumption:
    """``forall Q: app(lhs, Q) == app(rhs, Q)`` over the goal's slots.

    ``requires`` names facts that must be established (by a branch condition)
    before the verifier may add this assumption to a goal.
    """

    name: str
    lhs: tuple[Item, ...]
    rhs: tuple[Item, ...]
    requires: frozenset = frozenset()

    def equation(self, slots: Sequence[str]) -> Equation:
        reg = tuple(Base("?" + s, True) for s in slots)
        return Equation(self.name, sym_apply(self.lhs, reg), sym_apply(self.rhs, reg))

    def __str__(self):
        fmt = lambda xs: "; ".join(map(str, xs)) or "skip"
        return f"{self.name}: forall Q. app({fmt(self.lhs)}, Q) == app({fmt(self.rhs)}, Q)"


@dataclass(frozen=True)
class SeqDomain:
    """Fragment variable ranging over gate lists of length <= max_len."""

    max_len: int = 3
    kinds: tuple[str, ...] = ("H", "X", "Z", "T", "S", "CX")


@dataclass(frozen=True)
class GateDomain:
    """Gate variable ranging over single gates of the listed kinds."""

    kinds: tuple[str, ...] = ("U1", "U2", "U3", "RZ", "H", "X", "Z", "T", "S")
    allow_conditioned: bool = True


@dataclass(frozen=True)
class DerivedDomain:
    """A variable computed from the others (``None`` rejects the sample)."""

    fn: Callable[[dict], Any]


@dataclass
class ProofGoal:
    slots: tuple[str, ...]
    lhs: tuple[Item, ...]
    rhs: tuple[Item, ...]
    assumptions: tuple[Assumption, ...] = ()
    domains: dict = field(default_factory=dict)
    constraints: tuple[Callable[[dict], bool], ...] = ()
    erase_opaque: bool = False
    max_nodes: int = 100_000
    timeout: float = 5.0
    name: str = "goal"

    def __post_init__(self):
        self.slots = tuple(self.slots)
        self.lhs, self.rhs = tuple(self.lhs), tuple(self.rhs)
        self.assumptions = tuple(self.assumptions)
        n = len(self.slots)
        for item in self.lhs + self.rhs + tuple(x for a in self.assumptions for x in a.lhs + a.rhs):
            qs = getattr(item, "qubits", ())
            if any(not 0 <= q < n for q in qs):
                raise IndexError(f"{item} refers to a slot outside {self.slots}")
            if isinstance(item, Permute) and sorted(item.perm) != list(range(n)):
                raise ValueError(f"{item} is not a permutation of the goal's slots")
        one_sided = self.frag_names(self.lhs) ^ self.frag_names(self.rhs)
        constrained = {n for a in self.assumptions for n in self.frag_names(a.lhs + a.rhs)}
        if one_sided - constrained:
            raise ValueError(f"fragment variables {sorted(one_sided - constrained)} appear on one "
                             "side only and no assumption relates them")

    @staticmethod
    def frag_names(items) -> set[str]:
        return {x.name for x in items if isinstance(x, Frag)}

    @cached_property
    def variables(self) -> dict[str, str]:
        """name -> 'frag' | 'gate' | 'angle' for every variable of the goal."""
        out: dict[str, str] = {}
        items = self.lhs + self.rhs + tuple(x for a in self.assumptions for x in a.lhs + a.rhs)
        for x in items:
            if isinstance(x, Frag):
                out[x.name] = "frag"
            elif isinstance(x, SymGate):
                if x.op.kind.startswith("?"):
                    out[x.op.kind] = "gate"
                for p in x.op.params:
                    for v in sorted(p.vars()):
                        out.setdefault(v, "angle")
        return out

    @property
    def concrete(self) -> bool:
        return not self.variables

    def __str__(self):
        fmt = lambda xs: "; ".join(map(str, xs)) or "skip"
        return f"{self.name}: {fmt(self.lhs)} == {fmt(self.rhs)}"


@dataclass(frozen=True)
class Step:
    rule: str
    reverse: bool
    side: int
    index: int

    def __str__(self):
        arrow = "<-" if self.reverse else "->"
        return f"{self.rule}{arrow}@{'lr'[self.side]}#{self.index}"

    def to_dict(self):
        return {"rule": self.rule, "reverse": self.reverse, "side": self.side, "index": self.index}


@dataclass
class ProofResult:
    verdict: str
    trace: list[Step] = field(default_factory=list)
    witness: dict | None = None
    reason: str = ""
    explored: int = 0
    instance: dict | None = field(default=None, repr=False)  # raw assignment of a refutation

    @property
    def proved(self) -> bool:
        return self.verdict == PROVED

    @property
    def rules_used(self) -> list[str]:
        return [s.rule for s in self.trace]

    def to_dict(self) -> dict:
        d: dict = {"verdict": self.verdict}
        if self.verdict == PROVED:
            d["trace"] = [str(s) for s in self.trace]
        if self.witness is not None:
            d["witness"] = self.witness
        if self.reason:
            d["reason"] = self.reason
        return d


class BudgetExhausted(Exception):
    pass


# --------------------------------------------------------------------------
# the search


def _peel(lr: tuple[tuple[Term, ...], tuple[Term, ...]]):
    """Drop a trailing fragment application shared by both sides:
    app(C, X) == app(C, Y) iff X == Y, since C is unitary."""
    left, right = lr

    def layer(reg, frag):
        first = reg[0]
        if not (isinstance(first, Opaque) and first.frag == frag and len(first.args) == len(reg)):
            return None
        ok = all(isinstance(t, Opaque) and t.frag == frag and t.k == k and t.args is first.args
                 for k, t in enumerate(reg))
        return first.args if ok else None

    while left and right and isinstance(left[0], Opaque):
        a, b = layer(left, left[0].frag), layer(right, left[0].frag)
        if a is None or b is None:
            break
        left, right = a, b
    return left, right


class _Search:
    def __init__(self, goal: ProofGoal, rules: Sequence[RewriteRule], max_depth: int,
                 max_matches: int):
        self.goal = goal
        self.oriented = [r.equation for r in rules if r.oriented]
        assumption_eqs = [self._normalize_eq(a.equation(goal.slots)) for a in goal.assumptions]
        self.moves = [r.equation for r in rules if not r.oriented] + assumption_eqs
        self.max_depth = max_depth
        self.max_matches = max_matches
        self.deadline = time.monotonic() + goal.timeout
        self.nodes = 0

    def _tick(self, roots):
        self.nodes += register_size(roots)
        if self.nodes > self.goal.max_nodes:
            raise BudgetExhausted(f"node budget of {self.goal.max_nodes} exhausted")
        if time.monotonic() > self.deadline:
            raise BudgetExhausted(f"time budget of {self.goal.timeout}s exhausted")

    def _first_oriented(self, roots):
        graph = TermGraph(roots)
        for eq in self.oriented:
            m = next(find_matches(eq, graph, False, 1), None)
            if m is not None:
                return m
        return None

    def normalize(self, roots, limit: int = 10_000):
        for _ in range(limit):
            m = self._first_oriented(roots)
            if m is None:
                return roots
            roots = apply_match(m, roots)
        raise BudgetExhausted("normalization did not converge")

    def _normalize_eq(self, eq: Equation) -> Equation:
        return Equation(eq.name, self.normalize(eq.lhs), self.normalize(eq.rhs), eq.oriented)

    def canon(self, state, trace: list[Step], limit: int = 10_000):
        """Peel, then rewrite with the first oriented match (left side first)
        until none applies, peeling after every step."""
        state = _peel(state)
        for _ in range(limit):
            for side in (0, 1):
                m = self._first_oriented(state[side])
                if m is not None:
                    roots = apply_match(m, state[side])
                    trace.append(Step(m.equation.name, False, side, 0))
                    state = _peel((roots, state[1]) if side == 0 else (state[0], roots))
                    break
            else:
                return state
        raise BudgetExhausted("normalization did not converge")

    def run(self, left, right) -> list[Step] | None:
        trace: list[Step] = []
        state = self.canon((left, right), trace)
        if state[0] == state[1]:
            return trace
        visited = {state}
        frontier = [(state, trace)]
        for _ in range(self.max_depth):
            nxt = []
            for st, tr in frontier:
                for side in (0, 1):
                    graph = TermGraph(st[side])
                    for eq in self.moves:
                        for reverse in (False, True):
                            for idx, m in enumerate(find_matches(eq, graph, reverse, self.max_matches)):
                                roots = apply_match(m, st[side])
                                new_tr = tr + [Step(eq.name, reverse, side, idx)]
                                pair = (roots, st[1]) if side == 0 else (st[0], roots)
                                new = self.canon(pair, new_tr)
                                self._tick(new[0] + new[1])
                                if new[0] == new[1]:
                                    return new_tr
                                if new not in visited:
                                    visited.add(new)
                                    nxt.append((new, new_tr))
            frontier = nxt
            if not frontier:
                break
        return None


def prove_equiv(goal: ProofGoal, rules: Sequence[RewriteRule] | None = None, *,
                max_depth: int = 4, max_matches: int = 64, refute: bool = True,
                refute_trials: int = 400, seed: int = 0) -> ProofResult:
    rules = builtin_rules() if rules is None else list(rules)
    search = _Search(goal, rules, max_depth, max_matches)
    reason = "search exhausted without joining both sides"
    try:
        reg = tuple(Base(s) for s in goal.slots)
        left = sym_apply(goal.lhs, reg, erase_opaque=goal.erase_opaque)
        right = sym_apply(goal.rhs, reg, erase_opaque=goal.erase_opaque)
        trace = search.run(left, right)
        if trace is not None:
            return ProofResult(PROVED, trace, explored=search.nodes)
    except (BudgetExhausted, DepthBoundExceeded) as exc:
        reason = str(exc)
    if refute:
        witness = find_refutation(goal, trials=refute_trials, seed=seed)
        if witness is not None:
            env = witness.pop("_env")
            return ProofResult(REFUTED, witness=witness, explored=search.nodes,
                               reason="concrete instantiation is matrix-inequivalent", instance=env)
    return ProofResult(UNKNOWN, reason=reason, explored=search.nodes)


def replay(goal: ProofGoal, trace: Sequence[Step], rules: Sequence[RewriteRule] | None = None) -> bool:
    """Re-apply a recorded trace step by step; True iff it ends in a join."""
    rules = builtin_rules() if rules is None else list(rules)
    search = _Search(goal, rules, 0, 10**9)
    eqs = {e.name: e for e in search.oriented + search.moves}
    reg = tuple(Base(s) for s in goal.slots)
    state = _peel((sym_apply(goal.lhs, reg, erase_opaque=goal.erase_opaque),
                   sym_apply(goal.rhs, reg, erase_opaque=goal.erase_opaque)))
    for step in trace:
        eq = eqs.get(step.rule)
        if eq is None:
            return False
        matches = list(find_matches(eq, state[step.side], step.reverse, step.index + 1))
        if len(matches) <= step.index:
            return False
        roots = apply_match(matches[step.index], state[step.side])
        state = _peel((roots, state[1]) if step.side == 0 else (state[0], roots))
    return state[0] == state[1]


# --------------------------------------------------------------------------
# concrete instantiation and refutation


def permute_as_swaps(perm: Sequence[int]) -> list[Gate]:
    """SWAP gates realizing the relabeling 'slot i moves to perm[i]'."""
    where = list(range(len(perm)))  # where[i]: current slot of original wire i
    occupant = list(range(len(perm)))
    out = []
    for i, target in enumerate(perm):
        cur = where[i]
        if cur == target:
            continue
        other = occupant[target]
        out.append(Gate("SWAP", (cur, target)))
        occupant[cur], occupant[target] = other, i
        where[i], where[other] = target, cur
    return out


def concretize(items: Sequence[Item], env: dict, n: int, erase_opaque: bool = False) -> Circuit:
    gates: list[Gate] = []
    angles = {k: v for k, v in env.items() if isinstance(v, float)}
    for item in items:
        if isinstance(item, Gate):
            gates.append(item)
        elif isinstance(item, Frag):
            gates.extend(env[item.name])
        elif isinstance(item, Permute):
            gates.extend(permute_as_swaps(item.perm))
        elif item.op.kind.startswith("?"):
            g = env[item.op.kind]
            gates.append(g.relabel({i: q for i, q in enumerate(item.qubits)}))
        else:
            gates.append(Gate(item.op.kind, item.qubits,
                              tuple(p.evaluate(angles) for p in item.op.params),
                              item.op.conditioned))
    if erase_opaque:
        gates = [g for g in gates if g.is_unitary]
    return Circuit(n, tuple(gates))


_PARAM_COUNT = {"U1": 1, "U2": 2, "U3": 3, "RZ": 1}


def random_gate1(rng: random.Random, dom: GateDomain, shape: tuple[str, bool] | None = None) -> Gate:
    if shape is None:
        shape = (rng.choice(dom.kinds), dom.allow_conditioned and rng.random() < 0.5)
    kind, cond = shape
    params = tuple(rng.uniform(-2 * math.pi, 2 * math.pi) for _ in range(_PARAM_COUNT.get(kind, 0)))
    return Gate(kind, (0,), params, cond)


def gate_shapes(dom: GateDomain) -> list[tuple[str, bool]]:
    conds = (False, True) if dom.allow_conditioned else (False,)
    return [(k, c) for c in conds for k in dom.kinds]


def random_seq(rng: random.Random, dom: SeqDomain, n: int) -> list[Gate]:
    out = []
    for _ in range(rng.randint(0, dom.max_len)):
        kind = rng.choice(dom.kinds)
        if kind in ("CX", "SWAP"):
            if n < 2:
                continue
            a, b = rng.sample(range(n), 2)
            out.append(Gate(kind, (a, b)))
        else:
            out.append(Gate(kind, (rng.randrange(n),)))
    return out


def sample_env(goal: ProofGoal, rng: random.Random, shapes: dict | None = None) -> dict | None:
    n = len(goal.slots)
    shapes = shapes or {}
    env: dict = {}
    derived = []
    for name, kind in sorted(goal.variables.items()):
        dom = goal.domains.get(name)
        if isinstance(dom, DerivedDomain):
            derived.append((name, dom))
        elif kind == "frag":
            env[name] = random_seq(rng, dom or SeqDomain(), n)
        elif kind == "gate":
            env[name] = random_gate1(rng, dom or GateDomain(), shapes.get(name))
        else:
            env[name] = rng.uniform(-2 * math.pi, 2 * math.pi)
    for name, dom in derived:
        value = dom.fn(env)
        if value is None:
            return None
        env[name] = value
    return env


def _render(value):
    if isinstance(value, list):
        return [str(g) for g in value]
    return str(value) if isinstance(value, Gate) else value


def check_instance(goal: ProofGoal, env: dict, tol: float = 1e-9) -> dict | None:
    """If ``env`` satisfies constraints and assumptions but separates the two
    sides (structurally and by the matrix oracle), return the witness."""
    n = len(goal.slots)
    if not all(c(env) for c in goal.constraints):
        return None
    for a in goal.assumptions:
        if circuit_distance(concretize(a.lhs, env, n, True), concretize(a.rhs, env, n, True)) > tol:
            return None
    lc = concretize(goal.lhs, env, n, goal.erase_opaque)
    rc = concretize(goal.rhs, env, n, goal.erase_opaque)
    reg = tuple(Base(f"q{i}") for i in range(n))
    if sym_apply(lc.gates, reg) == sym_apply(rc.gates, reg):
        return None
    dev = circuit_distance(lc, rc)
    if dev <= 1e-6:
        return None
    return {
        "assignment": {k: _render(v) for k, v in sorted(env.items())},
        "slots": {s: i for i, s in enumerate(goal.slots)},
        "lhs": [str(g) for g in lc.gates],
        "rhs": [str(g) for g in rc.gates],
        "deviation": dev,
        "_env": env,
    }


def _shape_schedule(goal: ProofGoal, trials: int) -> list[dict]:
    """Every combination of gate-variable kinds once, in domain order, when
    that fits in the trial budget; random shapes afterwards."""
    names = [v for v, k in goal.variables.items()
             if k == "gate" and not isinstance(goal.domains.get(v), DerivedDomain)]
    per = [gate_shapes(goal.domains.get(v) or GateDomain()) for v in names]
    total = math.prod(len(p) for p in per) if names else 0
    if not names or total > trials // 2:
        return []
    return [dict(zip(names, combo)) for combo in itertools.product(*per)]


def find_refutation(goal: ProofGoal, trials: int = 400, seed: int = 0) -> dict | None:
    rng = random.Random(seed)
    attempts = trials if goal.variables else 1
    schedule = _shape_schedule(goal, attempts)
    for i in range(attempts):
        env = sample_env(goal, rng, schedule[i] if i < len(schedule) else None)
        if env is None:
            continue
        w = check_instance(goal, env)
        if w is not None:
            return w
    return None
