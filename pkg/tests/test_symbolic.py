import math

import pytest

from qpassverify.circuit import CX, H, S, SWAP, T, U1, U3, X, Gate
from qpassverify.symbolic.prover import (
    PROVED, REFUTED, Assumption, GateDomain, ProofGoal, prove_equiv, replay,
)
from qpassverify.symbolic.rules import builtin_rules, rule_by_name
from qpassverify.symbolic.smtlib import export_smtlib
from qpassverify.symbolic.terms import (
    App1, App2, Base, DepthBoundExceeded, Frag, Permute, base_register, sym_apply,
)

C1, C2 = Frag("C1"), Frag("C2")
NEXT_GATE = Assumption("next-gate", (C1, CX(0, 1)), (CX(0, 1), C1))


def sandwich_goal():
    return ProofGoal(("a", "b", "r"), (CX(0, 1), C1, CX(0, 1), C2), (C1, C2), (NEXT_GATE,), name="cx-sandwich")


def test_sym_apply_skip_and_single_gate():
    q = base_register(["q0", "q1"])
    assert sym_apply([], q) == q
    out = sym_apply([X(0)], q)
    assert isinstance(out[0], App1) and out[0].op.kind == "X" and out[1] == q[1]


def test_sym_apply_ghz():
    q0, q1, q2 = sym_apply([H(0), CX(0, 1), CX(1, 2)], base_register(["q0", "q1", "q2"]))
    assert isinstance(q0, App2) and q0.k == 1 and q0.op.kind == "CX"
    assert isinstance(q0.a1, App1) and q0.a1.op.kind == "H"
    assert str(q0) == "app2(CX, app1(H, q0), q1, 1)"
    assert isinstance(q2, App2) and q2.k == 2


def test_sym_apply_index_checks():
    with pytest.raises(IndexError):
        sym_apply([X(3)], base_register(["a", "b"]))


def test_sym_apply_depth_bound():
    with pytest.raises(DepthBoundExceeded):
        sym_apply([H(0)] * 50, base_register(["a"]), depth_bound=10)


def test_catalog_contents():
    names = {r.name for r in builtin_rules()}
    assert {"cx-cancel", "swap-projection", "h-cancel"} <= names
    assert len(names) >= 16
    cx = rule_by_name("cx-cancel")
    # both projections of CX;CX are identities
    assert len(cx.lhs) == 2


def test_sandwich_proved_with_next_gate_then_cancel():
    g = sandwich_goal()
    r = prove_equiv(g)
    assert r.verdict == PROVED
    assert [s.rule for s in r.trace] == ["next-gate", "cx-cancel"]
    assert replay(g, r.trace)


def test_skip_goal():
    r = prove_equiv(ProofGoal(("a",), (), ()))
    assert r.verdict == PROVED and r.trace == []


def test_cx_is_not_skip():
    r = prove_equiv(ProofGoal(("a", "b"), (CX(0, 1),), ()))
    assert r.verdict == REFUTED
    assert r.witness["deviation"] >= 1


def test_sandwich_without_assumption_is_refuted():
    g = ProofGoal(("a", "b", "r"), (CX(0, 1), C1, CX(0, 1), C2), (C1, C2))
    assert prove_equiv(g).verdict == REFUTED


@pytest.mark.parametrize("lhs,rhs", [
    ((CX(1, 0),), (H(0), H(1), CX(0, 1), H(0), H(1))),
    ((SWAP(0, 1),), (CX(0, 1), CX(1, 0), CX(0, 1))),
    ((T(0), T(0)), (S(0),)),
    ((U1(0.3, 0), U3(0.1, 0.2, 0.4, 0)), (U3(0.1, 0.2, 0.7, 0),)),
])
def test_concrete_identities(lhs, rhs):
    n = 1 + max(q for g in lhs + rhs for q in g.qubits)
    slots = tuple("abc"[:n])
    assert prove_equiv(ProofGoal(slots, lhs, rhs)).verdict == PROVED


def test_permute_items():
    # a SWAP followed by undoing the relabeling is the identity
    g = ProofGoal(("a", "b"), (SWAP(0, 1), Permute((1, 0))), ())
    assert prove_equiv(g).verdict == PROVED


def test_conditioned_merge_refuted():
    from qpassverify.symbolic.terms import Op, SymGate
    m = SymGate(Op("?M"), (0,))
    dom = {"?M": GateDomain(("U3",), allow_conditioned=True)}
    cond = Gate("U1", (0,), (0.5,), True)
    g = ProofGoal(("q",), (cond, m), (Gate("U1", (0,), (0.5,)), m), domains=dom)
    assert prove_equiv(g).verdict == REFUTED


def test_one_sided_fragment_needs_assumption():
    with pytest.raises(ValueError):
        ProofGoal(("a",), (C1,), (C2,))
    ProofGoal(("a",), (C1,), (C2,), (Assumption("link", (C1,), (C2,)),))


def test_smtlib_goal_shapes():
    text = export_smtlib(sandwich_goal())
    assert "(check-sat)" in text and "declare-sort Q" in text
    assert "cx-cancel" in text


def test_smtlib_against_solver(solver):
    assert solver(export_smtlib(sandwich_goal())) == "unsat"
    assert solver(export_smtlib(ProofGoal(("a",), (), ()))) == "unsat"
    assert solver(export_smtlib(ProofGoal(("a", "b"), (CX(0, 1),), ()))) == "sat"
