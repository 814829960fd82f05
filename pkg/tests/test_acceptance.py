"""Acceptance suite: one test per criterion, each printing PASS or FAIL."""

import contextlib
import json
import os
import random
import re
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from qpassverify.benchmarks import large_circuit, random_circuit
from qpassverify.circuit import (
    BARRIER, CX, MEASURE, RZ, SWAP, U1, U3, X, Z, Circuit, CouplingMap, Gate, Layout, ibm16,
)
from qpassverify.cli import PipelineSpec, main, run_pipeline
from qpassverify.framework import FuseTripped, merge_1q
from qpassverify.passes import (
    BasicSwap, CommutativeCancellation, GateDirection, LookaheadSwap, PassConfig, lookahead_trap_circuit,
    make_pass, pass_names,
)
from qpassverify.qasm import parse_qasm
from qpassverify.semantics import circuit_distance, circuit_unitary
from qpassverify.symbolic.prover import Assumption, ProofGoal
from qpassverify.symbolic.smtlib import export_smtlib
from qpassverify.symbolic.terms import Frag
from qpassverify.verifier import SUBGOAL, TERMINATION, generate_obligations, validate_translation, verify_pass

from conftest import run_solver

TOL = 1e-9


@contextlib.contextmanager
def criterion(n, title):
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] criterion {n} ({title}): FAIL")
        raise
    print(f"\n[acceptance] criterion {n} ({title}): PASS")


def random_map(rng, n, directed=False):
    """A random connected coupling map: a random spanning tree plus a few chords."""
    order = list(range(n))
    rng.shuffle(order)
    edges = {tuple(sorted((order[i], order[rng.randrange(i)]))) for i in range(1, n)}
    for _ in range(rng.randint(0, n)):
        a, b = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if a != b:
            edges.add(tuple(sorted((a, b))))
    out = []
    for a, b in sorted(edges):
        if directed and rng.random() < 0.5:
            out.append((b, a, "directed"))
        elif directed:
            out.append((a, b, "directed"))
        else:
            out.append((a, b))
    return CouplingMap.from_edges(n, out)


def on_edges(c, cmap):
    return all(cmap.has_edge(*g.qubits) for g in c.gates if g.num_qubits == 2)


def unitary_part(c):
    return Circuit(c.nqreg, tuple(g for g in c.gates if g.is_unitary), c.ncreg)


def parse_gate(text):
    kind, args = re.fullmatch(r"(\w+)\[([\d, ]+)\]", text).groups()
    return Gate(kind, tuple(int(q) for q in args.split(",")))


# ---------------------------------------------------------------------------


def test_criterion_1_rule_soundness(tmp_path):
    with criterion(1, "rule catalog certified"):
        rep = tmp_path / "rules.json"
        t0 = time.perf_counter()
        code = main(["check-rules", "--samples", "100", "--trials", "50", "--report", str(rep)])
        elapsed = time.perf_counter() - t0
        doc = json.loads(rep.read_text())
        assert code == 0 and not doc["failed"]
        assert doc["certified"] == doc["rules"] >= 20
        for cert in doc["certificates"]:
            assert cert["local_deviation"] < TOL
            assert cert["embedding_deviation"] is None or cert["embedding_deviation"] < TOL
        assert elapsed < 60, elapsed


def test_criterion_2_pass_verification():
    with criterion(2, "all shipped passes verified"):
        counts = {}
        for name in pass_names():
            t0 = time.perf_counter()
            rep = verify_pass(make_pass(name, require_map=False))
            assert time.perf_counter() - t0 < 60
            assert rep.verdict == "Verified", rep.to_json()
            counts[name] = rep.counts()
        print(json.dumps(counts, indent=1))
        cx = counts["cx_cancellation"]
        assert (cx[SUBGOAL], cx[TERMINATION], cx["top-level"]) == (3, 1, 1)
        assert len(counts) >= 12


def test_criterion_3_bug_reproduction():
    def mutant(name):
        return make_pass(name, demo_bugs=True, require_map=False)

    with criterion(3, "three demo bugs reproduced"):
        # (a) merge without the conditioned-gate guard
        rep = verify_pass(mutant("optimize_1q_gates_unguarded"))
        assert rep.verdict == "Refuted"
        cex = next(r.counterexample for r in rep.failures() if r.counterexample)
        assert any(g.conditioned for g in cex.input.gates)
        out = mutant("optimize_1q_gates_unguarded").transform(cex.input)
        assert circuit_distance(cex.input, out) > 0.1

        # (b) grouping that assumes commutation is transitive
        rep = verify_pass(mutant("commutative_cancellation_transitive"))
        assert rep.verdict == "Refuted"
        group = next(r.counterexample.group for r in rep.failures()
                     if r.counterexample and r.counterexample.group)
        assert len(group) == 3
        lhs = [parse_gate(s) for s in group]
        n = 1 + max(q for g in lhs for q in g.qubits)
        # the first two gates commute with the middle one, yet not with each other
        u = [circuit_unitary(Circuit(n, (g,))) for g in lhs]
        commute = lambda a, b: np.allclose(a @ b, b @ a)
        assert commute(u[0], u[1]) and commute(u[1], u[2]) and not commute(u[0], u[2])
        cex = next(r.counterexample for r in rep.failures() if r.counterexample)
        out = mutant("commutative_cancellation_transitive").transform(cex.input)
        assert circuit_distance(cex.input, out) > 0.1

        # (c) lookahead routing without the progress fix cycles
        rep = verify_pass(mutant("lookahead_swap_unfixed"))
        assert rep.verdict == "NonTerminating"
        cex = next(r.counterexample for r in rep.failures() if r.obligation.kind == TERMINATION)
        cnots = [g for g in cex.input.gates if g.kind == "CX"]
        assert len(cnots) == 4 and {q for g in cnots for q in g.qubits} == {0, 8, 7, 15}
        assert CouplingMap.from_dict(cex.cycle["coupling_map"]) == ibm16()
        swaps = [parse_gate(s) for s in cex.cycle["gates"]]
        touched = sorted({q for g in swaps for q in g.qubits})
        local = {q: i for i, q in enumerate(touched)}
        loop = Circuit(len(touched), tuple(g.relabel(local) for g in swaps))
        # the SWAPs of one cycle restore the layout: identity under the oracle
        assert circuit_distance(loop, Circuit(len(touched), ())) < TOL


def _check_pass(name, rng):
    nq = rng.randint(1, 6)
    cmap = random_map(rng, nq)
    c = random_circuit(rng, nq, rng.randint(0, 40), conditioned=0.05)
    config = PassConfig(coupling_map=cmap, seed=rng.randrange(2**31))
    if name == "apply_layout":
        lay = list(range(nq))
        rng.shuffle(lay)
        config.layout = Layout(lay)
        out = make_pass(name, config).transform(c)
        return validate_translation(c, out, lay, lay, tiers=("oracle",)).equivalent
    if name == "gate_direction":
        cmap = random_map(rng, nq, directed=True)
        c = BasicSwap(cmap).transform(c)
        out = GateDirection(cmap).transform(c)
        return circuit_distance(c, out) < TOL
    if name in ("remove_final_measure", "merge_adjacent_barriers", "barrier_before_final_measure"):
        gates = list(c.gates)
        for _ in range(rng.randint(0, 3)):
            gates.insert(rng.randint(0, len(gates)), BARRIER(*range(nq)))
        gates += [MEASURE(q) for q in range(nq) if rng.random() < 0.7]
        c = Circuit(nq, tuple(gates))
    p = make_pass(name, config)
    out = p.transform(c)
    perm = getattr(p, "final_layout_", None)
    return circuit_distance(unitary_part(c), unitary_part(out), perm) < TOL


def test_criterion_4_differential_oracle():
    with criterion(4, "differential oracle, 500 circuits per pass"):
        failures = {}
        for i, name in enumerate(pass_names()):
            rng = random.Random(1000 + i)
            bad = sum(not _check_pass(name, rng) for _ in range(500))
            if bad:
                failures[name] = bad
        assert not failures, failures


def _lookahead_batch(seed, count):
    rng = random.Random(seed)
    tripped = 0
    for k in range(count):
        cmap = ibm16() if k % 5 == 0 else random_map(rng, rng.randint(2, 16))
        c = random_circuit(rng, cmap.nodes, rng.randint(1, 25), ("H", "T", "CX", "U1"))
        try:
            out = LookaheadSwap(cmap, seed=seed + k).transform(c)
        except FuseTripped:
            tripped += 1
            continue
        assert on_edges(out, cmap)
    return tripped


def test_criterion_5_lookahead_termination():
    with criterion(5, "fixed lookahead terminates on 10,000 instances"):
        batches = 40
        with ProcessPoolExecutor(max(1, min(8, os.cpu_count() or 1))) as ex:
            tripped = sum(ex.map(_lookahead_batch, range(0, 10_000, 250), [250] * batches))
        assert tripped == 0
        # the trap instance is part of the corpus by construction
        assert on_edges(LookaheadSwap(ibm16()).transform(lookahead_trap_circuit()), ibm16())


def test_criterion_6_routing_legality():
    with criterion(6, "routing and direction legality"):
        rng = random.Random(6)
        for k in range(600):
            cmap = ibm16() if k % 10 == 0 else random_map(rng, rng.randint(2, 8), directed=True)
            c = random_circuit(rng, cmap.nodes, rng.randint(0, 30))
            router = BasicSwap(cmap) if k % 2 else LookaheadSwap(cmap, seed=k)
            routed = router.transform(c)
            assert on_edges(routed, cmap)
            fixed = GateDirection(cmap).transform(routed)
            for g in fixed.gates:
                if g.kind == "CX":
                    assert cmap.allowed_direction(*g.qubits) in (None, g.qubits), g


def test_criterion_7_reference_fixtures():
    with criterion(7, "reference fixtures"):
        ghz = parse_qasm('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\ncreg c[3];\n'
                         'h q[0];\ncx q[0],q[1];\ncx q[1],q[2];\n')
        assert [(g.kind, g.qubits) for g in ghz.gates] == [("H", (0,)), ("CX", (0, 1)), ("CX", (1, 2))]

        # u3(θ2, φ2, λ2) followed in time by u1(λ1) folds λ1 into the φ slot
        l1, t2, p2, lam2 = 0.37, 1.1, -0.4, 2.3
        pair = Circuit(1, (U3(t2, p2, lam2, 0), U1(l1, 0)))
        merged = merge_1q(*pair.gates)
        assert merged.kind == "U3"
        assert merged.params == pytest.approx((t2, l1 + p2, lam2), abs=TOL)
        assert circuit_distance(pair, Circuit(1, (merged,))) < TOL

        before = Circuit(2, (CX(1, 0), Z(0), X(1), CX(0, 1), Z(0), CX(0, 1), CX(1, 0)))
        after = CommutativeCancellation().transform(before)
        assert after.gates == (CX(1, 0), X(1), CX(1, 0))
        assert circuit_distance(before, after) < TOL

        original = Circuit(3, (CX(0, 2), CX(1, 2), CX(1, 0), RZ(0.4, 2)))
        routed = Circuit(3, (SWAP(1, 2), CX(0, 1), CX(2, 1), RZ(0.4, 1), SWAP(1, 2), CX(1, 0)))
        res = validate_translation(original, routed, (0, 1, 2))
        assert res.equivalent
        assert circuit_distance(original, routed, (0, 1, 2)) < TOL


def test_criterion_8_compile_performance():
    with criterion(8, "5000-gate pipeline under 5 s"):
        c = large_circuit(16, 5000, seed=8)
        spec = PipelineSpec(["trivial_layout", "apply_layout", "basic_swap", "gate_direction",
                             "cx_cancellation"], PassConfig(coupling_map=ibm16()))
        t0 = time.perf_counter()
        out, report = run_pipeline(c, spec)
        elapsed = time.perf_counter() - t0
        print(json.dumps(report["passes"], indent=1))
        assert elapsed < 5, elapsed
        assert [p["pass"] for p in report["passes"]] == spec.passes
        assert all("millis" in p for p in report["passes"])
        assert on_edges(out, ibm16())


def test_criterion_9_smtlib(solver):
    with criterion(9, "SMT-LIB goals discharged by an external solver"):
        c1, c2 = Frag("C1"), Frag("C2")
        next_gate = Assumption("next-gate", (c1, CX(0, 1)), (CX(0, 1), c1))
        goals = [ProofGoal(("a", "b", "r"), (CX(0, 1), c1, CX(0, 1), c2), (c1, c2), (next_gate,), name="cx-sandwich")]
        for name in ("cx_cancellation", "commutative_cancellation", "basic_swap", "optimize_1q_gates",
                     "gate_direction", "unroll_to_basis"):
            goals += [o.goal for o in generate_obligations(make_pass(name, require_map=False))
                      if o.goal is not None][:2]
        assert len(goals) >= 10
        answers = [solver(export_smtlib(g)) for g in goals]
        assert answers == ["unsat"] * len(goals), answers
        assert solver(export_smtlib(ProofGoal(("a", "b"), (CX(0, 1),), ()))) == "sat"
