import cmath
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpassverify.benchmarks import ghz, random_circuit
from qpassverify.circuit import CX, RZ, SWAP, U1, X, Z, BARRIER, Circuit, Gate, MEASURE
from qpassverify.semantics import (
    NonUnitaryGateError, RegisterTooLargeError, apply_circuit, circuit_distance, circuit_unitary,
    equiv_up_to_permutation, equiv_up_to_phase, gate_matrix, is_unitary,
)


def test_gate_matrices():
    assert np.allclose(gate_matrix(X(0)), [[0, 1], [1, 0]])
    lam = 0.7
    assert np.allclose(gate_matrix(U1(lam, 0)), [[1, 0], [0, cmath.exp(1j * lam)]])
    assert np.allclose(gate_matrix(CX(0, 1)), [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    with pytest.raises(NonUnitaryGateError):
        gate_matrix(MEASURE(0))
    with pytest.raises(NonUnitaryGateError):
        gate_matrix(BARRIER(0, 1))


def test_empty_circuit_is_identity():
    assert np.allclose(circuit_unitary(Circuit(2, ())), np.eye(4))


def test_ghz_state():
    psi = np.zeros(8, complex)
    psi[0] = 1
    out = apply_circuit(ghz(3), psi)
    expect = np.zeros(8, complex)
    expect[0] = expect[7] = 1 / math.sqrt(2)
    assert np.allclose(out, expect)
    assert np.allclose(circuit_unitary(ghz(3)) @ psi, expect)


def test_cx_pair_is_identity():
    u = circuit_unitary(Circuit(2, (CX(0, 1), CX(0, 1))))
    assert np.linalg.norm(u - np.eye(4)) < 1e-12


def test_qubit_zero_is_most_significant():
    # X on qubit 0 maps |00> to |10>, which is basis index 2
    psi = np.zeros(4, complex)
    psi[0] = 1
    assert np.allclose(apply_circuit(Circuit(2, (X(0),)), psi), [0, 0, 1, 0])


def test_phase_equivalence():
    x = gate_matrix(X(0))
    assert equiv_up_to_phase(x, cmath.exp(1j * math.pi / 4) * x)
    assert not equiv_up_to_phase(x, gate_matrix(Z(0)))
    rng = random.Random(3)
    for _ in range(100):
        lam = rng.uniform(-7, 7)
        assert equiv_up_to_phase(gate_matrix(U1(lam, 0)), gate_matrix(RZ(lam, 0)))


def test_permutation_equivalence():
    swap = circuit_unitary(Circuit(2, (SWAP(0, 1),)))
    assert equiv_up_to_permutation(np.eye(4), swap, (1, 0))
    u = circuit_unitary(ghz(3))
    assert equiv_up_to_permutation(u, u, (0, 1, 2)) == equiv_up_to_phase(u, u)


def test_routed_example_up_to_permutation():
    theta = 0.4
    original = Circuit(3, (CX(0, 2), CX(1, 2), CX(1, 0), RZ(theta, 2)))
    routed = Circuit(3, (SWAP(1, 2), CX(0, 1), CX(2, 1), RZ(theta, 1), SWAP(1, 2), CX(1, 0)))
    # the two SWAPs cancel, so the net relabeling is the identity
    assert circuit_distance(original, routed, (0, 1, 2)) < 1e-9


def test_register_cap():
    with pytest.raises(RegisterTooLargeError):
        circuit_unitary(Circuit(13, ()))


def test_conditioned_gate_gets_control():
    cond = Circuit(1, (Gate("X", (0,), (), True),))
    plain = Circuit(1, (X(0),))
    assert circuit_distance(cond, plain) > 0.1
    assert circuit_distance(cond, cond) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(0, 20))
def test_unitarity_property(seed, n, k):
    c = random_circuit(random.Random(seed), n, k)
    assert is_unitary(circuit_unitary(c))
