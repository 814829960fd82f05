import math

import pytest
from hypothesis import given, settings, strategies as st

from qpassverify.circuit import (
    CX, H, SWAP, U1, X, Z, Circuit, CircuitError, CouplingMap, DisconnectedMapError, Gate, Layout,
    MEASURE, UnsupportedGateError, commutes, ibm16, next_gate, shortest_path,
)
from qpassverify.qasm import QasmSyntaxError, QubitIndexError, UnsupportedConstructError, emit_qasm, parse_qasm

GHZ_SRC = """OPENQASM 2.0;
include "qelib1.inc";
qreg q[3];
creg c[3];
h q[0];
cx q[0],q[1];
cx q[1],q[2];
"""


def test_gate_validation():
    with pytest.raises(CircuitError):
        Gate("CX", (1, 1))
    with pytest.raises(CircuitError):
        Gate("U1", (0,), ())
    with pytest.raises(CircuitError):
        Gate("FOO", (0,))
    with pytest.raises(CircuitError):
        Circuit(2, (CX(0, 2),))


def test_concatenation_identity_and_associativity():
    a, b, c = Circuit(2, (H(0),)), Circuit(2, (CX(0, 1),)), Circuit(2, (X(1),))
    skip = Circuit(2, ())
    assert (a + skip).gates == a.gates == (skip + a).gates
    assert ((a + b) + c).gates == (a + (b + c)).gates


def test_parse_ghz():
    c = parse_qasm(GHZ_SRC)
    assert c.nqreg == 3
    assert c.gates == (H(0), CX(0, 1), CX(1, 2))


def test_parse_empty_register():
    c = parse_qasm('OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\n')
    assert c.nqreg == 2 and c.gates == ()


def test_parse_errors():
    with pytest.raises(UnsupportedConstructError, match="ccx"):
        parse_qasm('OPENQASM 2.0;\nqreg q[3];\nccx q[0],q[1],q[2];\n')
    with pytest.raises(QubitIndexError):
        parse_qasm('OPENQASM 2.0;\nqreg q[2];\nh q[5];\n')
    with pytest.raises(QasmSyntaxError) as exc:
        parse_qasm('OPENQASM 2.0;\nqreg q[2];\nh q[0]\ncx q[0] q[1];\n')
    assert exc.value.line >= 3


def test_emit_round_trip():
    c = parse_qasm(GHZ_SRC)
    assert parse_qasm(emit_qasm(c)).gates == c.gates
    empty = Circuit(2, ())
    text = emit_qasm(empty)
    assert "qreg q[2];" in text and parse_qasm(text).gates == ()


def test_emit_angle_exact():
    c = Circuit(1, (U1(math.pi / 4, 0),))
    back = parse_qasm(emit_qasm(c))
    assert back.gates[0].params[0] == math.pi / 4


def test_conditioned_round_trip():
    c = Circuit(1, (Gate("U3", (0,), (0.1, 0.2, 0.3), True),), 1)
    back = parse_qasm(emit_qasm(c))
    assert back.gates[0].conditioned


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["H", "X", "T", "CX", "U1", "U3"]),
                          st.integers(0, 2), st.integers(0, 2),
                          st.floats(-6, 6, allow_nan=False)), max_size=12))
def test_emit_parse_round_trip_property(spec):
    gates = []
    for kind, a, b, angle in spec:
        if kind == "CX":
            if a == b:
                continue
            gates.append(CX(a, b))
        elif kind == "U1":
            gates.append(U1(angle, a))
        elif kind == "U3":
            gates.append(Gate("U3", (a,), (angle, -angle, angle / 2)))
        else:
            gates.append(Gate(kind, (a,)))
    c = Circuit(3, tuple(gates))
    assert parse_qasm(emit_qasm(c)).gates == c.gates


def test_next_gate():
    assert next_gate([CX(0, 1), H(2), CX(0, 1)], 0) == 2
    assert next_gate([CX(0, 1)], 0) is None
    assert next_gate([CX(0, 1), H(1), CX(0, 1)], 0) == 1
    with pytest.raises(IndexError):
        next_gate([CX(0, 1)], 3)


def test_shortest_path():
    line = CouplingMap.line(3)
    assert shortest_path(line, 0, 2) == [0, 1, 2]
    assert shortest_path(line, 1, 1) == [1]
    ring = CouplingMap.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert shortest_path(ring, 0, 2) == [0, 1, 2]
    split = CouplingMap.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedMapError):
        shortest_path(split, 0, 3)


def test_commutes():
    assert commutes(Z(0), CX(0, 1))
    assert commutes(X(1), CX(0, 1))
    assert not commutes(H(0), CX(0, 1))
    assert commutes(H(0), H(0))
    with pytest.raises(UnsupportedGateError):
        commutes(MEASURE(0), H(0))


def test_coupling_map_documents():
    m = ibm16()
    assert m.nodes == 16 and len(m.edges) == 22 and m.is_connected
    assert CouplingMap.from_dict(m.to_dict()) == m
    assert m.allowed_direction(0, 1) == (1, 0)


def test_layout():
    lay = Layout((2, 0, 1))
    assert lay.inverse() == (1, 2, 0)
    assert lay.compose(lay.inverse()).is_identity()
    with pytest.raises(CircuitError):
        Layout((0, 0, 1))
    assert Layout.parse("2,0,1") == lay


def test_swap_gate_kind():
    assert SWAP(0, 1).num_qubits == 2
