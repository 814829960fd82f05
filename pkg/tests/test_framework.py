import math

import pytest

from qpassverify.benchmarks import ghz
from qpassverify.circuit import CX, H, U1, U3, X, Z, Circuit, CircuitError, Gate
from qpassverify.framework import (
    AmbiguousBindingError, BranchSpec, CollectRuns, IterateAllGates, PassKind, ProgressViolation,
    TemplateError, UnboundPlaceholderError, WhileGateRemaining, collect_commutation_groups,
    infer_invariant, merge_1q, run_template, transitivity_violations,
)
from qpassverify.passes import CXCancellation, wire_runs
from qpassverify.semantics import circuit_distance

C = Gate("H", (0,))  # any concrete gate works as a placeholder declaration
KEEP = BranchSpec("keep", ("a", "r"), (C,), (C,))


def identity_body(state, g):
    state.branch("keep")
    state.append(g)


def test_pass_kind_obligations():
    assert PassKind.ANALYSIS.obligation == "ReadOnly"
    assert PassKind.ROUTING.obligation == "PermutationEquivalence"
    assert PassKind.OPTIMIZATION.obligation == "Equivalence"


def test_iterate_identity_on_ghz():
    t = IterateAllGates(identity_body, [KEEP], name="id")
    assert run_template(t, ghz(3), checked=True).gates == ghz(3).gates
    schema = infer_invariant(t)
    assert "input[:i+1]" in schema.shape


def test_while_cx_cancellation():
    (loop,) = CXCancellation().templates()
    assert run_template(loop, Circuit(2, (CX(0, 1), CX(0, 1))), checked=True).gates == ()


def test_collect_runs_partition():
    c2 = Circuit(2, (U1(0.1, 0), U1(0.2, 0), CX(0, 1)))
    t = CollectRuns(lambda c: wire_runs(c, ("U1",)), lambda s, b: None, [], name="runs")
    assert t.batches(c2) == [[0, 1], [2]]  # [u1, u1] then [CX]


def test_collect_runs_must_cover():
    t = CollectRuns(lambda c: [[0]], lambda s, b: None, [], name="bad")
    with pytest.raises(TemplateError):
        t.batches(Circuit(1, (X(0), X(0))))


def test_infer_invariant_cx_cancellation():
    (loop,) = CXCancellation().templates()
    schema = infer_invariant(loop)
    assert schema.bindings == {"?output": "output", "?remaining_gates": "remain", "?input": "input"}


def test_infer_invariant_errors():
    two = BranchSpec("two", ("a", "r"), (C,), (C,), appends_to=("output", "scratch"))
    with pytest.raises(AmbiguousBindingError):
        infer_invariant(IterateAllGates(identity_body, [two]))
    none = BranchSpec("none", ("a", "r"), (C,), (C,), appends_to=())
    with pytest.raises(UnboundPlaceholderError):
        infer_invariant(IterateAllGates(identity_body, [none]))
    lazy = BranchSpec("lazy", ("a", "r"), (C,), (C,))
    with pytest.raises(UnboundPlaceholderError):
        infer_invariant(WhileGateRemaining(lambda s: None, [lazy]))


def test_progress_violation_in_checked_mode():
    spin = BranchSpec("spin", ("a", "r"), (C,), (C,))

    def body(state):
        state.branch("spin")

    t = WhileGateRemaining(body, [spin], name="spin")
    with pytest.raises(ProgressViolation):
        t.run(Circuit(1, (X(0),)), checked=True)


def test_undeclared_branch_and_effect():
    t = IterateAllGates(lambda s, g: (s.branch("other"), s.append(g)), [KEEP])
    with pytest.raises(TemplateError):
        t.run(Circuit(1, (X(0),)), checked=True)
    t = IterateAllGates(lambda s, g: (s.branch("keep"), s.append(g, target="scratch")), [KEEP])
    with pytest.raises(TemplateError):
        t.run(Circuit(1, (X(0),)), checked=True)


def test_shadow_check_catches_wrong_body():
    t = IterateAllGates(lambda s, g: (s.branch("keep"), s.append(X(0))), [KEEP])
    with pytest.raises(TemplateError, match="invariant"):
        t.run(Circuit(1, (H(0),)), checked=True)


def test_merge_1q():
    # state order: u1 first, then u3 -> the u1 angle lands on lambda
    m = merge_1q(U1(0.3, 0), U3(0.1, 0.2, 0.4, 0))
    assert m.kind == "U3" and m.params == pytest.approx((0.1, 0.2, 0.7))
    # matrix-product order of the same two gates: u3 first, then u1 -> phi
    m = merge_1q(U3(0.1, 0.2, 0.4, 0), U1(0.3, 0))
    assert m.params == pytest.approx((0.1, 0.5, 0.4))
    assert merge_1q(U1(0.3, 0), Gate("U3", (0,), (0.1, 0.2, 0.4), True)) is None
    assert merge_1q(U1(0.2, 0), U1(0.5, 0)).params == pytest.approx((0.7,))
    with pytest.raises(CircuitError):
        merge_1q(U1(0.1, 0), U1(0.1, 1))
    with pytest.raises(CircuitError):
        merge_1q(CX(0, 1), U1(0.1, 0))


def test_merge_1q_general_is_exact():
    import random
    rng = random.Random(5)
    kinds = ["H", "X", "Z", "T", "S", "U2", "U3", "RZ"]
    for _ in range(100):
        gs = []
        for _ in range(2):
            k = rng.choice(kinds)
            n = {"U2": 2, "U3": 3, "RZ": 1}.get(k, 0)
            gs.append(Gate(k, (0,), tuple(rng.uniform(-6, 6) for _ in range(n))))
        m = merge_1q(*gs)
        assert circuit_distance(Circuit(1, tuple(gs)), Circuit(1, (m,))) < 1e-9


COMMUTE_EXAMPLE = Circuit(2, (CX(1, 0), Z(0), X(1), CX(0, 1), Z(0), CX(0, 1), CX(1, 0)))


def test_commutation_groups_example():
    # three groups: the outer CXs alone, the middle five together
    assert collect_commutation_groups(COMMUTE_EXAMPLE) == [[0], [1, 2, 3, 4, 5], [6]]


def test_commutation_groups_simple():
    assert collect_commutation_groups([Z(0), U1(0.3, 0), Z(0)]) == [[0, 1, 2]]
    assert collect_commutation_groups([H(0), H(0)]) == [[0, 1]]


def test_transitivity_is_false():
    bad = transitivity_violations([H(0), H(1), X(0)])
    assert (H(0), H(1), X(0)) in bad
    pairwise = collect_commutation_groups([H(0), H(1), X(0)])
    chained = collect_commutation_groups([H(0), H(1), X(0)], pairwise=False)
    assert pairwise == [[0, 1], [2]] and chained == [[0, 1, 2]]
