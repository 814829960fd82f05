"""Symbolic qubit terms and symbolic execution of circuit fragments.

Terms are hash-consed: two structurally equal terms are the same object, so
register comparison is identity comparison.
"""

from __future__ import annotations

import math
from fractions import Fraction
import weakref
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

from ..circuit import Gate

DEFAULT_DEPTH_BOUND = 10_000


class DepthBoundExceeded(RuntimeError):
    pass


_PI_DENOMS = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 64, 128)


def _canon(x: float) -> float:
    """Canonical float for an angle constant: near-multiples of pi/d snap to
    the exact rational multiple, anything else is rounded to 12 decimals."""
    x = float(x)
    for d in _PI_DENOMS:
        r = x / math.pi * d
        k = round(r)
        if abs(r - k) < 1e-9:
            fr = Fraction(int(k), d)
            return 0.0 if fr == 0 else fr.numerator * math.pi / fr.denominator
    r = round(x, 12)
    return 0.0 if r == 0 else r


def _canon_coef(x: float) -> float:
    r = round(float(x), 12)
    return 0.0 if r == 0 else r


@dataclass(frozen=True)
class Angle:
    """Linear angle expression ``sum(coef * var) + const``."""

    coeffs: tuple[tuple[str, float], ...] = ()
    const: float = 0.0

    def __post_init__(self):
        merged: dict[str, float] = {}
        for v, c in self.coeffs:
            merged[v] = merged.get(v, 0.0) + c
        object.__setattr__(self, "coeffs", tuple(
            (v, _canon_coef(c)) for v, c in sorted(merged.items()) if _canon_coef(c) != 0))
        object.__setattr__(self, "const", _canon(self.const))

    @classmethod
    def var(cls, name: str) -> Angle:
        return cls(((name, 1.0),))

    @classmethod
    def of(cls, x: Union[float, str, "Angle"]) -> Angle:
        if isinstance(x, Angle):
            return x
        if isinstance(x, str):
            return cls.var(x)
        return cls((), x)

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    @property
    def single_var(self) -> str | None:
        if len(self.coeffs) == 1 and self.coeffs[0][1] == 1.0 and self.const == 0:
            return self.coeffs[0][0]
        return None

    def __add__(self, other):
        other = Angle.of(other)
        return Angle(self.coeffs + other.coeffs, self.const + other.const)

    def __neg__(self):
        return Angle(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other):
        return self + (-Angle.of(other))

    def scale(self, k: float) -> Angle:
        return Angle(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def substitute(self, env: dict[str, "Angle"]) -> Angle:
        out = Angle((), self.const)
        for v, c in self.coeffs:
            out = out + (env[v].scale(c) if v in env else Angle(((v, c),)))
        return out

    def evaluate(self, env: dict[str, float] | None = None) -> float:
        env = env or {}
        return self.const + sum(c * env[v] for v, c in self.coeffs)

    def vars(self) -> set[str]:
        return {v for v, _ in self.coeffs}

    def __str__(self):
        parts = [(f"{c:g}*" if c != 1 else "") + v for v, c in self.coeffs]
        if self.const or not parts:
            parts.append(f"{self.const:.6g}")
        return "+".join(parts)


@dataclass(frozen=True)
class Op:
    """A gate kind with (possibly symbolic) angles. Kinds starting with ``?``
    are gate variables that no rewrite rule mentions."""

    kind: str
    params: tuple[Angle, ...] = ()
    conditioned: bool = False

    @classmethod
    def of_gate(cls, g: Gate) -> Op:
        return cls(g.kind, tuple(Angle.of(p) for p in g.params), g.conditioned)

    def __str__(self):
        p = "(" + ",".join(map(str, self.params)) + ")" if self.params else ""
        return ("c_" if self.conditioned else "") + self.kind + p


_TABLE: "weakref.WeakValueDictionary[tuple, Term]" = weakref.WeakValueDictionary()


class Term:
    __slots__ = ("depth", "size", "__weakref__")

    def children(self) -> tuple["Term", ...]:
        return ()


class Base(Term):
    """A register slot's initial value, or (``is_var``) a pattern variable."""

    __slots__ = ("name", "is_var")

    def __new__(cls, name: str, is_var: bool = False):
        key = ("B", name, is_var)
        t = _TABLE.get(key)
        if t is None:
            t = object.__new__(cls)
            t.name, t.is_var, t.depth, t.size = name, is_var, 0, 1
            _TABLE[key] = t
        return t

    def __repr__(self):
        return ("?" if self.is_var else "") + self.name


class App1(Term):
    __slots__ = ("op", "arg")

    def __new__(cls, op: Op, arg: Term):
        key = ("A1", op, id(arg))
        t = _TABLE.get(key)
        if t is None:
            t = object.__new__(cls)
            t.op, t.arg = op, arg
            t.depth, t.size = arg.depth + 1, arg.size + 1
            _TABLE[key] = t
        return t

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"app1({self.op}, {self.arg!r})"


class App2(Term):
    __slots__ = ("op", "a1", "a2", "k")

    def __new__(cls, op: Op, a1: Term, a2: Term, k: int):
        if k not in (1, 2):
            raise ValueError("App2 output slot must be 1 or 2")
        key = ("A2", op, id(a1), id(a2), k)
        t = _TABLE.get(key)
        if t is None:
            t = object.__new__(cls)
            t.op, t.a1, t.a2, t.k = op, a1, a2, k
            t.depth = max(a1.depth, a2.depth) + 1
            t.size = a1.size + a2.size + 1
            _TABLE[key] = t
        return t

    def children(self):
        return (self.a1, self.a2)

    def __repr__(self):
        return f"app2({self.op}, {self.a1!r}, {self.a2!r}, {self.k})"


class Opaque(Term):
    """Output slot ``k`` of an unknown fragment applied to a whole register."""

    __slots__ = ("frag", "args", "k")

    def __new__(cls, frag: str, args: tuple[Term, ...], k: int):
        args = tuple(args)
        key = ("O", frag, tuple(map(id, args)), k)
        t = _TABLE.get(key)
        if t is None:
            t = object.__new__(cls)
            t.frag, t.args, t.k = frag, args, k
            t.depth = max((a.depth for a in args), default=0) + 1
            t.size = sum(a.size for a in args) + 1
            _TABLE[key] = t
        return t

    def children(self):
        return self.args

    def __repr__(self):
        return f"{self.frag}[{self.k}]({', '.join(map(repr, self.args))})"


@dataclass(frozen=True)
class Frag:
    """A fragment variable: an unknown sub-circuit over the whole register."""

    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class SymGate:
    """A gate whose operation may be symbolic (angle or gate variables)."""

    op: Op
    qubits: tuple[int, ...]

    @classmethod
    def of(cls, g: Gate) -> SymGate:
        return cls(Op.of_gate(g), g.qubits)

    def __str__(self):
        return f"{self.op}{list(self.qubits)}"


@dataclass(frozen=True)
class Permute:
    """A wire relabeling with no gate content: slot i moves to slot perm[i]."""

    perm: tuple[int, ...]

    def inverse(self) -> Permute:
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return Permute(tuple(inv))

    def __str__(self):
        return f"perm{list(self.perm)}"


Item = Union[Gate, SymGate, Frag, Permute]
SymbolicRegister = tuple


def base_register(names: Sequence[str] | int, is_var: bool = False) -> SymbolicRegister:
    if isinstance(names, int):
        names = [f"q{i}" for i in range(names)]
    return tuple(Base(n, is_var) for n in names)


def sym_apply(fragment: Iterable[Item], q: Sequence[Term], *,
              depth_bound: int = DEFAULT_DEPTH_BOUND,
              erase_opaque: bool = False) -> SymbolicRegister:
    """Symbolically execute ``fragment`` on register ``q``.

    ``erase_opaque`` drops BARRIER/MEASURE (the unitary projection used for
    gate-structural obligations); otherwise they are applied as opaque ops.
    """
    reg = list(q)
    n = len(reg)
    for item in fragment:
        if isinstance(item, Frag):
            args = tuple(reg)
            reg = [Opaque(item.name, args, k) for k in range(n)]
            continue
        if isinstance(item, Permute):
            if sorted(item.perm) != list(range(n)):
                raise ValueError(f"{item} is not a permutation of {n} slots")
            moved = [None] * n
            for i, p in enumerate(item.perm):
                moved[p] = reg[i]
            reg = moved
            continue
        if isinstance(item, Gate):
            if erase_opaque and not item.is_unitary:
                continue
            for idx in item.qubits:
                _check_index(idx, n)
            if item.kind == "MEASURE":
                reg[item.qubits[0]] = App1(Op("MEASURE"), reg[item.qubits[0]])
                continue
            if item.kind == "BARRIER":
                args = tuple(reg[i] for i in item.qubits)
                for j, idx in enumerate(item.qubits):
                    reg[idx] = Opaque("BARRIER", args, j)
                continue
            item = SymGate.of(item)
        qs = item.qubits
        for idx in qs:
            _check_index(idx, n)
        if len(qs) == 1:
            reg[qs[0]] = App1(item.op, reg[qs[0]])
            new = (reg[qs[0]],)
        elif len(qs) == 2:
            i, j = qs
            a, b = reg[i], reg[j]
            reg[i], reg[j] = App2(item.op, a, b, 1), App2(item.op, a, b, 2)
            new = (reg[i], reg[j])
        else:
            raise ValueError(f"symbolic gates act on 1 or 2 qubits, got {qs}")
        if any(t.depth > depth_bound for t in new):
            raise DepthBoundExceeded(f"term depth exceeds {depth_bound}")
    return tuple(reg)


def _check_index(idx: int, n: int):
    if not 0 <= idx < n:
        raise IndexError(f"qubit index {idx} out of range for register of {n}")


def subterms(roots: Iterable[Term]) -> Iterator[Term]:
    """Post-order, deduplicated, deterministic traversal (iterative)."""
    seen: set[int] = set()
    for root in roots:
        stack = [(root, False)]
        while stack:
            t, done = stack.pop()
            if id(t) in seen:
                continue
            if done:
                seen.add(id(t))
                yield t
            else:
                stack.append((t, True))
                for c in reversed(t.children()):
                    if id(c) not in seen:
                        stack.append((c, False))


def register_size(reg: Sequence[Term]) -> int:
    return sum(1 for _ in subterms(reg))


def leaves(reg: Sequence[Term]) -> set[Term]:
    return {t for t in subterms(reg) if isinstance(t, Base)}


def pretty(t: Term) -> str:
    return repr(t)


def angle_close(a: Angle, b: Angle, tol: float = 1e-9) -> bool:
    return a.coeffs == b.coeffs and abs(a.const - b.const) <= tol


def angle_mod_equal(a: Angle, b: Angle, period: float = 2 * math.pi, tol: float = 1e-9) -> bool:
    if a.coeffs != b.coeffs:
        return False
    d = (a.const - b.const) % period
    return min(d, period - d) <= tol
