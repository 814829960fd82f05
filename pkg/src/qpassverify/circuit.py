"""Circuit data model: gates, circuits, coupling maps, layouts and the
shared utility functions (``next_gate``, ``shortest_path``, ``commutes``)."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Sequence

ONE_QUBIT = frozenset({"X", "Y", "Z", "H", "T", "S", "RZ", "U1", "U2", "U3"})
TWO_QUBIT = frozenset({"CX", "SWAP"})
OPAQUE = frozenset({"BARRIER", "MEASURE"})
GATE_KINDS = ONE_QUBIT | TWO_QUBIT | OPAQUE
PARAM_ARITY = {"U1": 1, "U2": 2, "U3": 3, "RZ": 1}
SELF_INVERSE = frozenset({"X", "Y", "Z", "H", "CX", "SWAP"})

# gate set on which ``commutes`` is defined
COMMUTATION_SET = frozenset({"CX", "X", "Z", "H", "T", "U1", "U2", "U3"})

ANGLE_TOL = 1e-9


class CircuitError(ValueError):
    """Malformed gate, circuit, layout or coupling map."""


class UnsupportedGateError(CircuitError):
    pass


class DisconnectedMapError(CircuitError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    conditioned: bool = False
    clbit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in GATE_KINDS:
            raise UnsupportedGateError(f"unsupported gate kind {self.kind!r}")
        n = len(self.qubits)
        if self.kind in ONE_QUBIT or self.kind == "MEASURE":
            ok = n == 1
        elif self.kind in TWO_QUBIT:
            ok = n == 2
        else:
            ok = n >= 1
        if not ok:
            raise CircuitError(f"{self.kind} cannot act on {n} qubits")
        if len(set(self.qubits)) != n:
            raise CircuitError(f"repeated qubit in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError("negative qubit index")
        if len(self.params) != PARAM_ARITY.get(self.kind, 0):
            raise CircuitError(
                f"{self.kind} takes {PARAM_ARITY.get(self.kind, 0)} params, "
                f"got {len(self.params)}"
            )

    @property
    def is_unitary(self) -> bool:
        return self.kind not in OPAQUE

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def shares_qubit(self, other: Gate) -> bool:
        return not set(self.qubits).isdisjoint(other.qubits)

    def relabel(self, mapping: Sequence[int] | dict[int, int]) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits),
                    self.params, self.conditioned, self.clbit)

    def same_op(self, other: Gate, tol: float = ANGLE_TOL) -> bool:
        """Equal up to angle tolerance (structural equality otherwise)."""
        return (
            self.kind == other.kind
            and self.qubits == other.qubits
            and self.conditioned == other.conditioned
            and self.clbit == other.clbit
            and len(self.params) == len(other.params)
            and all(abs(a - b) <= tol for a, b in zip(self.params, other.params))
        )

    def __str__(self):
        p = "(" + ",".join(f"{x:.6g}" for x in self.params) + ")" if self.params else ""
        c = "?" if self.conditioned else ""
        return f"{c}{self.kind}{p}{list(self.qubits)}"


# convenience constructors used throughout tests and passes
def X(q): return Gate("X", (q,))
def Y(q): return Gate("Y", (q,))
def Z(q): return Gate("Z", (q,))
def H(q): return Gate("H", (q,))
def T(q): return Gate("T", (q,))
def S(q): return Gate("S", (q,))
def RZ(lam, q): return Gate("RZ", (q,), (lam,))
def U1(lam, q): return Gate("U1", (q,), (lam,))
def U2(phi, lam, q): return Gate("U2", (q,), (phi, lam))
def U3(theta, phi, lam, q): return Gate("U3", (q,), (theta, phi, lam))
def CX(c, t): return Gate("CX", (c, t))
def SWAP(a, b): return Gate("SWAP", (a, b))
def BARRIER(*qs): return Gate("BARRIER", tuple(qs))
def MEASURE(q, clbit=None): return Gate("MEASURE", (q,), clbit=q if clbit is None else clbit)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a register of ``nqreg`` qubits."""

    nqreg: int
    gates: tuple[Gate, ...] = ()
    ncreg: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.nqreg < 0:
            raise CircuitError("negative register size")
        for g in self.gates:
            if not isinstance(g, Gate):
                raise CircuitError(f"not a gate: {g!r}")
            if max(g.qubits) >= self.nqreg:
                raise CircuitError(
                    f"qubit index out of range in {g} (nqreg={self.nqreg})"
                )

    def __len__(self):
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Circuit(self.nqreg, self.gates[i], self.ncreg)
        return self.gates[i]

    def __add__(self, other: Circuit) -> Circuit:
        return Circuit(max(self.nqreg, other.nqreg), self.gates + other.gates,
                       max(self.ncreg, other.ncreg))

    def with_gates(self, gates: Iterable[Gate]) -> Circuit:
        return Circuit(self.nqreg, tuple(gates), self.ncreg)

    @property
    def is_unitary(self) -> bool:
        return all(g.is_unitary for g in self.gates)

    def same_as(self, other: Circuit, tol: float = ANGLE_TOL) -> bool:
        return (
            self.nqreg == other.nqreg
            and len(self.gates) == len(other.gates)
            and all(a.same_op(b, tol) for a, b in zip(self.gates, other.gates))
        )

    def __str__(self):
        return f"Circuit({self.nqreg}, [{', '.join(map(str, self.gates))}])"


def next_gate(c: Circuit | Sequence[Gate], i: int) -> int | None:
    """Index of the first gate after ``i`` sharing a qubit with gate ``i``."""
    gates = c.gates if isinstance(c, Circuit) else c
    if not 0 <= i < len(gates):
        raise IndexError(f"gate index {i} out of range")
    qs = set(gates[i].qubits)
    for x in range(i + 1, len(gates)):
        if qs.intersection(gates[x].qubits):
            return x
    return None


@dataclass(frozen=True)
class CouplingMap:
    """Device connectivity. ``directions`` maps an undirected edge (a<b) to
    the allowed CX (control, target) pair when the edge is directed."""

    nodes: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    directions: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.nodes and 0 <= b < self.nodes):
                raise CircuitError(f"invalid edge ({a}, {b})")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))
        for e, (c, t) in self.directions:
            if e not in norm or {c, t} != set(e):
                raise CircuitError(f"direction {c}->{t} not on edge {e}")

    @classmethod
    def from_edges(cls, nodes: int, edges: Iterable[Sequence]) -> CouplingMap:
        """Edges are ``(a, b)`` or ``(a, b, "directed")`` meaning CX a->b only."""
        und, dirs = set(), []
        for e in edges:
            a, b = int(e[0]), int(e[1])
            und.add((min(a, b), max(a, b)))
            if len(e) > 2 and e[2] == "directed":
                dirs.append(((min(a, b), max(a, b)), (a, b)))
        return cls(nodes, frozenset(und), tuple(sorted(dirs)))

    @classmethod
    def line(cls, n: int) -> CouplingMap:
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def load(cls, path: str | Path) -> CouplingMap:
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_dict(cls, doc: dict) -> CouplingMap:
        if "nodes" not in doc or "edges" not in doc:
            raise CircuitError("coupling map needs 'nodes' and 'edges'")
        return cls.from_edges(int(doc["nodes"]), doc["edges"])

    def to_dict(self) -> dict:
        d = dict(self.directions)
        edges = []
        for e in sorted(self.edges):
            edges.append([*d[e], "directed"] if e in d else list(e))
        return {"nodes": self.nodes, "edges": edges}

    @cached_property
    def edge_list(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    @cached_property
    def distance(self) -> tuple[tuple[int, ...], ...]:
        """All-pairs hop distance; -1 marks unreachable pairs."""
        rows = []
        for s in range(self.nodes):
            dist = [-1] * self.nodes
            dist[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in self.neighbors[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            rows.append(tuple(dist))
        return tuple(rows)

    @property
    def is_connected(self) -> bool:
        return self.nodes <= 1 or all(d >= 0 for d in self.distance[0])

    def check_connected(self):
        if not self.is_connected:
            raise DisconnectedMapError("coupling map is not connected")

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def allowed_direction(self, a: int, b: int) -> tuple[int, int] | None:
        """The permitted (control, target) on edge {a, b}, or None if undirected."""
        return dict(self.directions).get((min(a, b), max(a, b)))


def shortest_path(m: CouplingMap, a: int, b: int) -> list[int]:
    """Lexicographically smallest among the shortest a->b paths."""
    if not (0 <= a < m.nodes and 0 <= b < m.nodes):
        raise CircuitError(f"node out of range: {a}, {b}")
    to_b = m.distance[b]
    if to_b[a] < 0:
        raise DisconnectedMapError(f"no path between {a} and {b}")
    path = [a]
    while path[-1] != b:
        here = path[-1]
        path.append(min(v for v in m.neighbors[here] if to_b[v] == to_b[here] - 1))
    return path


def ibm16() -> CouplingMap:
    """The 16-qubit IBM ladder device (ibmqx5).

    Top row Q1..Q8, bottom row Q0, Q15, Q14, ..., Q9, with a rung in every
    column. Edges are listed as allowed CNOT directions (control, target).
    """
    directed = [(1, 0), (1, 2), (2, 3), (3, 4), (3, 14), (5, 4), (6, 5), (6, 7),
                (6, 11), (7, 10), (8, 7), (9, 8), (9, 10), (11, 10), (12, 5),
                (12, 11), (12, 13), (13, 4), (13, 14), (15, 0), (15, 2), (15, 14)]
    return CouplingMap.from_edges(16, [[c, t, "directed"] for c, t in directed])


class Layout(tuple):
    """Bijective map logical qubit -> physical qubit, stored as a tuple."""

    def __new__(cls, mapping: Iterable[int], nphys: int | None = None):
        self = super().__new__(cls, (int(x) for x in mapping))
        n = len(self) if nphys is None else nphys
        if len(set(self)) != len(self) or any(not 0 <= p < n for p in self):
            raise CircuitError(f"layout {tuple(self)} is not injective into [0, {n})")
        return self

    @classmethod
    def identity(cls, n: int) -> Layout:
        return cls(range(n))

    @classmethod
    def parse(cls, text: str) -> Layout:
        return cls(int(x) for x in text.replace(" ", "").split(",") if x)

    def inverse(self) -> Layout:
        inv = [0] * len(self)
        for i, p in enumerate(self):
            inv[p] = i
        return Layout(inv)

    def compose(self, then: Sequence[int]) -> Layout:
        """Apply ``self`` first, then ``then``."""
        return Layout(then[p] for p in self)

    def is_identity(self) -> bool:
        return all(i == p for i, p in enumerate(self))


# Commutation table for the non-parametric part of the restricted gate set.
_DIAGONAL = frozenset({"Z", "T"})


def _table_commutes(a: Gate, b: Gate) -> bool:
    if not a.shares_qubit(b):
        return True
    if a.num_qubits == 1 and b.num_qubits == 1:
        return a.kind == b.kind or (a.kind in _DIAGONAL and b.kind in _DIAGONAL)
    if a.num_qubits == 2 and b.num_qubits == 1:
        a, b = b, a
    if a.num_qubits == 1:
        c, t = b.qubits
        q = a.qubits[0]
        return a.kind in _DIAGONAL if q == c else a.kind == "X"
    (c1, t1), (c2, t2) = a.qubits, b.qubits
    return c1 != t2 and t1 != c2


def commutes(a: Gate, b: Gate) -> bool:
    """Whether ``a;b`` and ``b;a`` have the same unitary.

    Defined on {CX, X, Z, H, T, U1, U2, U3}. Non-parametric pairs come from
    a fixed table; pairs involving parametric gates are decided on the
    gates' joint qubits by the matrix oracle.
    """
    for g in (a, b):
        if g.kind not in COMMUTATION_SET:
            raise UnsupportedGateError(f"commutes() undefined for {g.kind}")
        if g.conditioned:
            raise UnsupportedGateError("commutes() undefined for conditioned gates")
    if not a.shares_qubit(b):
        return True
    if not a.params and not b.params:
        return _table_commutes(a, b)
    from .semantics import gates_commute_numeric
    return gates_commute_numeric(a, b)
