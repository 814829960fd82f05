"""Benchmark circuit families and random circuit generators."""

from __future__ import annotations

import math
import random

from .circuit import PARAM_ARITY, Circuit, Gate

UNITARY_KINDS = ("X", "Y", "Z", "H", "T", "S", "RZ", "U1", "U2", "U3", "CX", "SWAP")


def ghz(n: int = 3) -> Circuit:
    gates = [Gate("H", (0,))] + [Gate("CX", (i, i + 1)) for i in range(n - 1)]
    return Circuit(n, tuple(gates))


def bell() -> Circuit:
    return ghz(2)


def cat(n: int = 4) -> Circuit:
    """Cat state prepared with a fan-out from qubit 0."""
    gates = [Gate("H", (0,))] + [Gate("CX", (0, i)) for i in range(1, n)]
    return Circuit(n, tuple(gates))


def _ccx(a: int, b: int, c: int) -> list[Gate]:
    """Toffoli in the CX + T/H basis (exact, up to global phase)."""
    tdg = lambda q: Gate("U1", (q,), (-math.pi / 4,))
    T = lambda q: Gate("T", (q,))
    return [Gate("H", (c,)), Gate("CX", (b, c)), tdg(c), Gate("CX", (a, c)), T(c),
            Gate("CX", (b, c)), tdg(c), Gate("CX", (a, c)), T(b), T(c), Gate("H", (c,)),
            Gate("CX", (a, b)), T(a), tdg(b), Gate("CX", (a, b))]


def ripple_carry_adder(n: int = 2) -> Circuit:
    """Cuccaro-style ripple-carry adder of two n-bit registers.

    Wires: carry-in c0, then interleaved b_i, a_i, then carry-out z
    (2n + 2 qubits).
    """
    cin, z = 0, 2 * n + 1
    b = [1 + 2 * i for i in range(n)]
    a = [2 + 2 * i for i in range(n)]
    prev = [cin] + a[:-1]

    def maj(x, y, w):
        return [Gate("CX", (w, y)), Gate("CX", (w, x))] + _ccx(x, y, w)

    def uma(x, y, w):
        return _ccx(x, y, w) + [Gate("CX", (w, x)), Gate("CX", (x, y))]

    gates: list[Gate] = []
    for i in range(n):
        gates += maj(prev[i], b[i], a[i])
    gates.append(Gate("CX", (a[-1], z)))
    for i in reversed(range(n)):
        gates += uma(prev[i], b[i], a[i])
    return Circuit(2 * n + 2, tuple(gates))


def random_gate(rng: random.Random, n: int, kinds=UNITARY_KINDS, conditioned: float = 0.0) -> Gate:
    kind = rng.choice([k for k in kinds if n >= 2 or k not in ("CX", "SWAP")])
    params = tuple(rng.uniform(-2 * math.pi, 2 * math.pi) for _ in range(PARAM_ARITY.get(kind, 0)))
    if kind in ("CX", "SWAP"):
        qubits = tuple(rng.sample(range(n), 2))
    else:
        qubits = (rng.randrange(n),)
    return Gate(kind, qubits, params, rng.random() < conditioned)


def random_circuit(rng: random.Random, n: int, ngates: int, kinds=UNITARY_KINDS,
                   conditioned: float = 0.0) -> Circuit:
    return Circuit(n, tuple(random_gate(rng, n, kinds, conditioned) for _ in range(ngates)))


def random_clifford_t(rng: random.Random, n: int, ngates: int) -> Circuit:
    return random_circuit(rng, n, ngates, ("H", "X", "Z", "T", "S", "CX"))


def large_circuit(n: int = 16, ngates: int = 5000, seed: int = 0) -> Circuit:
    """The compile-performance workload: random Clifford+T on ``n`` qubits."""
    return random_clifford_t(random.Random(seed), n, ngates)
