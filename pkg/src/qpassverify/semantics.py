"""Dense-matrix semantics of circuits: the ground-truth oracle.

Conventions:
  * qubit 0 is the most significant bit of a basis-state index;
  * ``circuit_unitary(c1 + c2) == circuit_unitary(c2) @ circuit_unitary(c1)``,
    i.e. matrices act on column state vectors and the first gate acts first;
  * equivalence is up to global phase.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import Circuit, CircuitError, Gate

MAX_QUBITS = 12
DEFAULT_TOL = 1e-9

_SQ2 = 1 / np.sqrt(2)


class NonUnitaryGateError(CircuitError):
    pass


class RegisterTooLargeError(CircuitError):
    pass


def u1(lam):
    return np.array([[1, 0], [0, np.exp(1j * lam)]], dtype=complex)


def u2(phi, lam):
    return _SQ2 * np.array(
        [[1, -np.exp(1j * lam)], [np.exp(1j * phi), np.exp(1j * (lam + phi))]],
        dtype=complex,
    )


def u3(theta, phi, lam):
    # cos(theta)/sin(theta), not the half angle
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (lam + phi)) * c]],
        dtype=complex,
    )


def rz(lam):
    return np.diag([np.exp(-0.5j * lam), np.exp(0.5j * lam)])


_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": _SQ2 * np.array([[1, 1], [1, -1]], dtype=complex),
    "T": u1(np.pi / 4),
    "S": np.diag([1, 1j]),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_PARAM = {"U1": u1, "U2": u2, "U3": u3, "RZ": rz}


def gate_matrix(g: Gate) -> np.ndarray:
    """Matrix of ``g`` on its own qubits, in the order ``g.qubits`` lists them."""
    if not g.is_unitary:
        raise NonUnitaryGateError(f"{g.kind} has no unitary semantics")
    if g.kind in _PARAM:
        return _PARAM[g.kind](*g.params)
    return _FIXED[g.kind].copy()


def apply_gate(state: np.ndarray, n: int, g: Gate) -> np.ndarray:
    """Apply ``g`` to the leading ``n`` qubit axes of a (2,)*n + rest tensor."""
    k = g.num_qubits
    m = gate_matrix(g).reshape((2,) * (2 * k))
    out = np.tensordot(m, state, axes=(list(range(k, 2 * k)), list(g.qubits)))
    # tensordot puts the gate's output axes first; move them back in place
    return np.moveaxis(out, list(range(k)), list(g.qubits))


def has_conditioned(c: Circuit) -> bool:
    return any(g.conditioned for g in c.gates)


def _apply_controlled(u: np.ndarray, n: int, g: Gate) -> np.ndarray:
    # the classical condition is modelled as a control qubit on axis n
    idx = (slice(None),) * n + (1,)
    u = u.copy()
    u[idx] = apply_gate(u[idx], n, g)
    return u


def circuit_unitary(c: Circuit, with_condition: bool | None = None) -> np.ndarray:
    """Unitary of ``c`` (qubit 0 most significant).

    Conditioned gates are modelled by appending one extra qubit (index
    ``nqreg``) that stands for the classical condition and controls every
    conditioned gate. ``with_condition`` forces (or suppresses) that extra
    qubit; by default it is added iff the circuit has a conditioned gate.
    """
    if with_condition is None:
        with_condition = has_conditioned(c)
    elif not with_condition and has_conditioned(c):
        raise NonUnitaryGateError("circuit has conditioned gates; the condition qubit is required")
    n = c.nqreg
    total = n + (1 if with_condition else 0)
    if total > MAX_QUBITS:
        raise RegisterTooLargeError(f"{total} qubits exceeds the oracle cap of {MAX_QUBITS}")
    dim = 1 << total
    u = np.eye(dim, dtype=complex).reshape((2,) * total + (dim,))
    for g in c.gates:
        if not g.is_unitary:
            raise NonUnitaryGateError(f"{g.kind} has no unitary semantics")
        u = _apply_controlled(u, n, g) if g.conditioned else apply_gate(u, total, g)
    return u.reshape(dim, dim)


def circuit_distance(a: Circuit, b: Circuit, perm: Sequence[int] | None = None) -> float:
    """Phase-insensitive distance between two circuits on the same register;
    with ``perm`` the output of ``b`` is compared against ``a`` relabeled."""
    if a.nqreg != b.nqreg:
        raise ValueError(f"register sizes differ: {a.nqreg} vs {b.nqreg}")
    cond = has_conditioned(a) or has_conditioned(b)
    ua, ub = circuit_unitary(a, cond), circuit_unitary(b, cond)
    if perm is not None:
        p = list(perm) + ([a.nqreg] if cond else [])
        ua = permutation_matrix(p) @ ua
    return phase_distance(ua, ub)


def apply_circuit(c: Circuit, state: np.ndarray) -> np.ndarray:
    n = c.nqreg
    psi = np.asarray(state, dtype=complex).reshape((2,) * n)
    for g in c.gates:
        psi = apply_gate(psi, n, g)
    return psi.reshape(-1)


def num_qubits(u: np.ndarray) -> int:
    n = int(round(np.log2(u.shape[0])))
    if u.shape != (1 << n, 1 << n):
        raise CircuitError(f"not a qubit operator: shape {u.shape}")
    return n


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min``-style deviation ``||a - phi*b||_F`` with phi read off b's
    largest-magnitude entry."""
    if a.shape != b.shape:
        raise CircuitError(f"dimension mismatch: {a.shape} vs {b.shape}")
    k = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[k]) == 0:
        return float(np.linalg.norm(a))
    ratio = a[k] / b[k]
    phi = ratio / abs(ratio) if abs(ratio) > 0 else 1.0
    return float(np.linalg.norm(a - phi * b))


def equiv_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return phase_distance(a, b) < tol


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """Operator sending qubit i's state to qubit ``perm[i]``."""
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise CircuitError(f"{tuple(perm)} is not a bijection on [0, {n})")
    dim = 1 << n
    idx = np.arange(dim)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    target = np.zeros(dim, dtype=np.int64)
    for i, p in enumerate(perm):
        target |= bits[:, i] << (n - 1 - p)
    pm = np.zeros((dim, dim), dtype=complex)
    pm[target, idx] = 1
    return pm


def equiv_up_to_permutation(a: np.ndarray, b: np.ndarray, perm: Sequence[int],
                            tol: float = DEFAULT_TOL) -> bool:
    if a.shape != b.shape:
        raise CircuitError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if len(perm) != num_qubits(a):
        raise CircuitError("permutation size does not match the register")
    return equiv_up_to_phase(permutation_matrix(perm) @ a, b, tol)


def relabeled_distance(a: np.ndarray, b: np.ndarray, final: Sequence[int],
                       initial: Sequence[int] | None = None) -> float:
    """Deviation of ``b`` from ``P_final @ a @ P_initial^dagger``.

    ``initial``/``final`` give the physical position of each qubit of ``a``
    before and after the circuit ``b``.
    """
    pf = permutation_matrix(final)
    target = pf @ a
    if initial is not None:
        target = target @ permutation_matrix(initial).conj().T
    return phase_distance(target, b)


def is_unitary(u: np.ndarray, tol: float = 1e-8) -> bool:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))) < tol


@lru_cache(maxsize=4096)
def _commute_cached(a: Gate, b: Gate) -> bool:
    support = sorted(set(a.qubits) | set(b.qubits))
    pos = {q: i for i, q in enumerate(support)}
    n = len(support)
    ga, gb = a.relabel(pos), b.relabel(pos)
    ab = circuit_unitary(Circuit(n, (ga, gb)))
    ba = circuit_unitary(Circuit(n, (gb, ga)))
    return float(np.linalg.norm(ab - ba)) < 1e-9


def gates_commute_numeric(a: Gate, b: Gate) -> bool:
    """Exact commutation (not up to phase) on the gates' joint qubits."""
    return _commute_cached(a, b)


def dump_matrix(u: np.ndarray) -> list[list[list[float]]]:
    """Row-major ``[re, im]`` pairs for debug output."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in u]
