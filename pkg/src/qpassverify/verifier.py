"""Proof obligations for passes, their discharge, counterexamples and
translation validation.

A pass written with the loop templates yields a top-level contract, one
subgoal per declared branch and, for ``WhileGateRemaining`` loops, a
termination obligation. Subgoals go to the symbolic prover; termination is
checked statically (every branch deletes from the remaining list) and, when
that fails, refuted by a bounded concrete search for a revisited loop state.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

from sklearn.base import clone

from .benchmarks import ghz, random_circuit
from .circuit import Circuit, CircuitError, Gate
from .framework import BranchSpec, NonTermination, TemplateError, WhileGateRemaining, _Template
from .passes.base import DEFAULT_SEED, BasePass
from .semantics import MAX_QUBITS, RegisterTooLargeError, circuit_distance, circuit_unitary, phase_distance
from .symbolic.prover import (PROVED, REFUTED, UNKNOWN, ProofGoal, ProofResult, concretize,
                              permute_as_swaps, prove_equiv)
from .symbolic.terms import Permute

EQUIVALENCE = "Equivalence"
PERMUTATION_EQUIVALENCE = "PermutationEquivalence"
READ_ONLY = "ReadOnly"
TERMINATION = "Termination"
SUBGOAL = "LoopInvariantSubgoal"

MAX_EXPANDED_PATHS = 64
CEX_MAX_GATES = 6
TOL = 1e-9


class PassNotTemplateExpressible(CircuitError):
    """The pass rewrites circuits but declares no loop templates."""


@dataclass
class Obligation:
    id: str
    kind: str
    origin: str
    goal: ProofGoal | None = None
    pass_: BasePass | None = field(default=None, repr=False)
    template: _Template | None = field(default=None, repr=False)
    branch: BranchSpec | None = field(default=None, repr=False)


@dataclass
class Counterexample:
    """A concrete failing input, confirmed by the matrix oracle (or by a
    replayed state cycle for termination failures)."""

    kind: str  # "semantic" | "nontermination"
    input: Circuit
    output: Circuit | None = None
    deviation: float | None = None
    cycle: dict | None = None
    group: list[str] | None = None
    shrunk: bool = True

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "nqreg": self.input.nqreg,
                             "input": [str(g) for g in self.input.gates]}
        if self.output is not None:
            d["output"] = [str(g) for g in self.output.gates]
        if self.deviation is not None:
            d["deviation"] = self.deviation
        if self.cycle is not None:
            d["cycle"] = self.cycle
        if self.group is not None:
            d["group"] = self.group
        d["shrunk"] = self.shrunk
        return d


@dataclass
class ObligationResult:
    obligation: Obligation
    verdict: str
    trace: list[str] = field(default_factory=list)
    witness: dict | None = None
    reason: str = ""
    millis: float = 0.0
    counterexample: Counterexample | None = None
    instance: dict | None = field(default=None, repr=False)

    def to_dict(self, timings: bool = True) -> dict:
        o = self.obligation
        d: dict[str, Any] = {"id": o.id, "origin": o.origin, "kind": o.kind, "verdict": self.verdict}
        if self.verdict == PROVED:
            d["trace"] = self.trace
        if self.witness is not None:
            d["witness"] = self.witness
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample.to_dict()
        if self.reason:
            d["reason"] = self.reason
        if timings:
            d["millis"] = round(self.millis, 3)
        return d


@dataclass
class VerificationReport:
    pass_name: str
    kind: str
    results: list[ObligationResult]
    seed: int
    millis: float = 0.0

    @property
    def verified(self) -> bool:
        return bool(self.results) and all(r.verdict == PROVED for r in self.results)

    @property
    def subgoals(self) -> int:
        return sum(r.obligation.kind == SUBGOAL for r in self.results)

    @property
    def verdict(self) -> str:
        if self.verified:
            return "Verified"
        if any(r.verdict == REFUTED for r in self.results):
            failed = [r for r in self.results if r.verdict == REFUTED]
            return "NonTerminating" if all(r.obligation.kind == TERMINATION for r in failed) else "Refuted"
        return "Unknown"

    def counts(self) -> dict:
        out = {SUBGOAL: 0, TERMINATION: 0, "top-level": 0}
        for r in self.results:
            key = r.obligation.kind if r.obligation.kind in (SUBGOAL, TERMINATION) else "top-level"
            out[key] += 1
        return out

    def failures(self) -> list[ObligationResult]:
        return [r for r in self.results if r.verdict != PROVED]

    def to_dict(self, timings: bool = True) -> dict:
        d = {"pass": self.pass_name, "kind": self.kind, "verdict": self.verdict,
             "verified": self.verified, "subgoals": self.subgoals, "seed": self.seed,
             "obligations": [r.to_dict(timings) for r in self.results]}
        if timings:
            d["millis"] = round(self.millis, 3)
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# obligation generation


def verification_instance(p: BasePass) -> BasePass:
    """A copy of ``p`` configured for verification runs (routing passes get
    their default device when none was given)."""
    q = clone(p)
    params = q.get_params()
    if "coupling_map" in params and params["coupling_map"] is None:
        cmap = p.verification_map()
        if cmap is not None:
            q.set_params(coupling_map=cmap)
    return q


def generate_obligations(p: BasePass) -> list[Obligation]:
    name = p.pass_name
    if not p.modifies_circuit:
        return [Obligation(f"{name}/read-only", READ_ONLY, f"{name}:contract", pass_=p)]
    templates = p.templates()
    if not templates:
        raise PassNotTemplateExpressible(f"{name} rewrites circuits but declares no loop templates")
    top = p.top_level_goal()
    out = [Obligation(f"{name}/top-level", p.kind.obligation, f"{name}:contract", top, p)]
    paths = 0
    for t in templates:
        for b in t.branches:
            paths += 1
            if paths > MAX_EXPANDED_PATHS:
                raise PassNotTemplateExpressible(
                    f"{name}: more than {MAX_EXPANDED_PATHS} expanded branches")
            goal = b.goal()
            goal.name = f"{t.name}/{b.name}"
            out.append(Obligation(f"{name}/{t.name}/{b.name}", SUBGOAL,
                                  f"{name}:{t.name}:{b.name}" + (":lemma" if b.contract else ""),
                                  goal, p, t, b))
        if isinstance(t, WhileGateRemaining):
            out.append(Obligation(f"{name}/{t.name}/termination", TERMINATION,
                                  f"{name}:{t.name}", None, p, t))
    return out


# --------------------------------------------------------------------------
# discharge


def _probe_inputs(p: BasePass, seed: int) -> list[Circuit]:
    rng = random.Random(seed)
    cmap = p.verification_map()
    n = cmap.nodes if cmap is not None else 4
    return [ghz(3), Circuit(n, ())] + [random_circuit(rng, min(n, 4), 8) for _ in range(3)]


def _discharge_read_only(o: Obligation, seed: int) -> ObligationResult:
    p = verification_instance(o.pass_)
    if p.templates():
        return ObligationResult(o, REFUTED, reason="a read-only pass must not declare rewriting loops")
    for c in _probe_inputs(p, seed):
        out = p.transform(c)
        if out is not c and not (out.nqreg == c.nqreg and out.same_as(c, tol=0.0)):
            return ObligationResult(o, REFUTED, reason="output differs from input",
                                    witness={"input": [str(g) for g in c.gates],
                                             "output": [str(g) for g in out.gates]})
    return ObligationResult(o, PROVED, trace=["no rewriting loops", "structural identity on probes"])


def _termination_candidates(p: BasePass, seed: int, budget: int):
    yield from p.termination_corpus()
    rng = random.Random(seed)
    for _ in range(budget):
        yield p.random_input(rng, CEX_MAX_GATES)


def _run_detecting(p: BasePass, c: Circuit):
    try:
        return p.run(c, {}, detect_cycles=True)
    except TypeError:
        return p.run(c, {})


def _touched_identity(gates: Sequence[Gate]) -> float:
    """Deviation from identity of ``gates`` restricted to the wires they use."""
    wires = sorted({q for g in gates for q in g.qubits})
    if not wires:
        return 0.0
    index = {q: i for i, q in enumerate(wires)}
    c = Circuit(len(wires), tuple(g.relabel(index) for g in gates if g.is_unitary))
    return phase_distance(circuit_unitary(c), circuit_unitary(Circuit(len(wires), ())))


def _discharge_termination(o: Obligation, seed: int, budget: int) -> ObligationResult:
    loop_branches = [b for b in o.template.branches if not b.contract]
    lazy = [b.name for b in loop_branches if b.deletions < 1]
    if not lazy:
        return ObligationResult(o, PROVED, trace=[f"{b.name}: deletes {b.deletions}" for b in loop_branches])
    p = verification_instance(o.pass_)
    for c in _termination_candidates(p, seed, budget):
        try:
            _run_detecting(p, c)
        except NonTermination as e:
            if e.cycle_length <= 0:
                continue
            # confirm: the cycle replays and its emitted gates do nothing net
            try:
                _run_detecting(p, c)
                continue
            except NonTermination as again:
                if (again.cycle_start, again.cycle_length) != (e.cycle_start, e.cycle_length):
                    continue
            dev = _touched_identity(e.gates)
            if dev > TOL:
                continue
            cycle = {"start": e.cycle_start, "length": e.cycle_length,
                     "gates": [str(g) for g in e.gates], "net_deviation": dev}
            cmap = p.verification_map()
            if cmap is not None:
                cycle["coupling_map"] = cmap.to_dict()
            cex = Counterexample("nontermination", c, cycle=cycle)
            return ObligationResult(o, REFUTED, witness={"branches_without_deletion": lazy, **cycle},
                                    reason="loop state revisited", counterexample=cex)
        except (TemplateError, CircuitError):
            continue
    return ObligationResult(o, UNKNOWN, reason=f"branches {lazy} may not delete; no cycle found "
                                               f"in {budget} bounded inputs")


def discharge(o: Obligation, seed: int = DEFAULT_SEED, termination_budget: int = 200,
              rules=None) -> ObligationResult:
    t0 = time.perf_counter()
    if o.kind == READ_ONLY:
        res = _discharge_read_only(o, seed)
    elif o.kind == TERMINATION:
        res = _discharge_termination(o, seed, termination_budget)
    else:
        pr: ProofResult = prove_equiv(o.goal, rules, seed=seed)
        res = ObligationResult(o, pr.verdict, [str(s) for s in pr.trace], pr.witness,
                               "" if pr.proved else pr.reason, instance=pr.instance)
    res.millis = (time.perf_counter() - t0) * 1000
    return res


# --------------------------------------------------------------------------
# counterexamples


def _semantic_failure(p: BasePass, c: Circuit) -> tuple[Circuit, float] | None:
    try:
        out = p.transform(c)
    except (TemplateError, CircuitError):
        return None
    if out.nqreg > MAX_QUBITS or not (c.is_unitary and out.is_unitary):
        return None
    perm = getattr(p, "final_layout_", None)
    dev = circuit_distance(Circuit(out.nqreg, c.gates), out,
                           list(perm) if perm is not None else None)
    return (out, dev) if dev > 1e-6 else None


def shrink(p: BasePass, c: Circuit) -> Circuit:
    """Delete gates one at a time while the pass still fails on the result."""
    gates = list(c.gates)
    changed = True
    while changed:
        changed = False
        for i in range(len(gates)):
            trial = Circuit(c.nqreg, tuple(gates[:i] + gates[i + 1:]))
            if _semantic_failure(p, trial):
                gates = list(trial.gates)
                changed = True
                break
    return Circuit(c.nqreg, tuple(gates))


def _pool(res: ObligationResult, n: int) -> list[Gate]:
    env = res.instance or {}
    pool: list[Gate] = []
    for v in env.values():
        for g in (v if isinstance(v, list) else [v] if isinstance(v, Gate) else []):
            if max(g.qubits) < n and g not in pool:
                pool.append(g)
    goal = res.obligation.goal
    for side in (goal.lhs, goal.rhs):
        for g in concretize(side, env, n, erase_opaque=True).gates:
            if g not in pool:
                pool.append(g)
    return pool


def _candidates(res: ObligationResult, n: int, seed: int):
    b, env = res.obligation.branch, res.instance or {}
    base = []
    if b is not None:
        items = b.lhs_override if b.lhs_override is not None else b.consumed
        base.append(list(concretize(items, env, n, erase_opaque=True).gates))
    yield from base
    pool = _pool(res, n)
    # the witness itself, padded with up to two pool gates anywhere
    for seq in base:
        for k in (1, 2):
            for pos in itertools.combinations_with_replacement(range(len(seq) + 1), k):
                for extra in itertools.product(pool, repeat=k):
                    out = list(seq)
                    for j, (at, g) in enumerate(zip(pos, extra)):
                        out.insert(at + j, g)
                    yield out
    for k in range(1, 4):
        yield from (list(s) for s in itertools.product(pool, repeat=k))
    rng = random.Random(seed)
    for _ in range(2000):
        yield [rng.choice(pool) for _ in range(rng.randint(1, CEX_MAX_GATES))] if pool else []


def find_counterexample(res: ObligationResult, seed: int = DEFAULT_SEED) -> Counterexample | None:
    """Lift a refuted obligation to a concrete failing input of the pass."""
    o = res.obligation
    if o.kind == TERMINATION:
        return res.counterexample
    if res.verdict != REFUTED or o.goal is None:
        return None
    p = verification_instance(o.pass_)
    n = len(o.goal.slots)
    group = res.witness.get("lhs") if (o.branch is not None and o.branch.contract) else None
    for gates in _candidates(res, n, seed):
        if not gates or len(gates) > CEX_MAX_GATES + 2:
            continue
        c = Circuit(n, tuple(gates))
        if _semantic_failure(p, c) is None:
            continue
        small = shrink(p, c)
        out, dev = _semantic_failure(p, small)
        return Counterexample("semantic", small, out, dev, group=group,
                              shrunk=len(small) <= CEX_MAX_GATES)
    return None


# --------------------------------------------------------------------------
# whole-pass verification


def verify_pass(p: BasePass, seed: int = DEFAULT_SEED, jobs: int = 1,
                counterexamples: bool = True) -> VerificationReport:
    t0 = time.perf_counter()
    obligations = generate_obligations(p)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(lambda o: discharge(o, seed), obligations))
    else:
        results = [discharge(o, seed) for o in obligations]
    if counterexamples:
        for r in results:
            if r.verdict == REFUTED and r.counterexample is None:
                r.counterexample = find_counterexample(r, seed)
    return VerificationReport(p.pass_name, p.kind.value, results, seed,
                              (time.perf_counter() - t0) * 1000)


# --------------------------------------------------------------------------
# translation validation


@dataclass
class ValidationResult:
    equivalent: bool
    tier: str
    deviation: float | None = None
    reason: str = ""

    def __bool__(self):
        return self.equivalent

    def to_dict(self) -> dict:
        return {"equivalent": self.equivalent, "tier": self.tier,
                "deviation": self.deviation, "reason": self.reason}


SYMBOLIC_GATE_LIMIT = 200


def _unitary_prefix(c: Circuit) -> Circuit:
    """Drop opaque operations (measure-free comparison of the unitary part)."""
    return Circuit(c.nqreg, tuple(g for g in c.gates if g.is_unitary), c.ncreg)


def _is_identity(p) -> bool:
    return p is None or list(p) == list(range(len(p)))


def validate_translation(a: Circuit, b: Circuit, perm: Sequence[int] | None = None,
                         initial: Sequence[int] | None = None,
                         tiers: Sequence[str] = ("symbolic", "oracle")) -> ValidationResult:
    """Check one compile: ``b`` implements ``a`` with virtual qubit ``i``
    starting on ``initial[i]`` and ending on ``perm[i]`` (identity if None)."""
    if a.nqreg > b.nqreg:
        raise CircuitError(f"output register ({b.nqreg}) narrower than input ({a.nqreg})")
    n = b.nqreg
    a, b = _unitary_prefix(Circuit(n, a.gates)), _unitary_prefix(b)
    for p in (perm, initial):
        if p is not None and sorted(p) != list(range(n)):
            raise CircuitError(f"{tuple(p)} is not a permutation of {n} qubits")
    if "symbolic" in tiers and len(a) + len(b) <= SYMBOLIC_GATE_LIMIT:
        rhs: list = []
        if not _is_identity(initial):
            inv = [0] * n
            for i, x in enumerate(initial):
                inv[x] = i
            rhs.append(Permute(tuple(inv)))
        rhs += list(a.gates)
        if not _is_identity(perm):
            rhs.append(Permute(tuple(perm)))
        goal = ProofGoal(tuple(f"q{i}" for i in range(n)), b.gates, tuple(rhs),
                         timeout=2.0, max_nodes=20_000, name="translation")
        if prove_equiv(goal, refute=False).proved:
            return ValidationResult(True, "symbolic", 0.0)
    if "oracle" in tiers and n <= MAX_QUBITS:
        spec = list(a.gates)
        if not _is_identity(initial):
            inv = [0] * n
            for i, x in enumerate(initial):
                inv[x] = i
            spec = permute_as_swaps(inv) + spec
        dev = circuit_distance(Circuit(n, tuple(spec)), b,
                               None if _is_identity(perm) else list(perm))
        return ValidationResult(dev < TOL, "oracle", dev,
                                "" if dev < TOL else f"deviation {dev:.3g} exceeds {TOL}")
    if "oracle" in tiers:
        raise RegisterTooLargeError(
            f"{n} qubits: symbolic tier undecided and the oracle is limited to {MAX_QUBITS}")
    if "symbolic" in tiers:
        # undecided counts as a failure: validation never passes on Unknown
        return ValidationResult(False, "symbolic", None, "symbolic tier could not decide")
    raise ValueError(f"no validation tier selected from {tuple(tiers)}")
