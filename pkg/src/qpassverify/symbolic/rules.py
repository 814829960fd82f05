"""Rewrite rules over symbolic registers, and the matcher that applies them.

A rule is a pair of small circuits on ``arity`` pattern qubits (optionally
followed by an output relabeling on the right). Executing both sides
symbolically on a pattern register yields one term equation per slot; a rule
fires only when every slot of its left side is found in the term graph and
its intermediate nodes are used by nothing else, i.e. the match is a genuine
sub-circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

from ..circuit import Circuit, Gate
from .terms import (
    Angle, App1, App2, Base, Frag, Item, Op, Opaque, SymGate, Term,
    base_register, subterms, sym_apply,
)

PI = math.pi


def _is_angle_var(name: str) -> bool:
    return name.startswith("?")


@dataclass(frozen=True)
class Equation:
    """Slot-wise term equations ``lhs[k] == rhs[k]`` over pattern variables."""

    name: str
    lhs: tuple[Term, ...]
    rhs: tuple[Term, ...]
    oriented: bool = False

    @cached_property
    def qubit_vars(self) -> frozenset:
        return frozenset(t for t in subterms(self.lhs) if isinstance(t, Base) and t.is_var)

    def sides(self, reverse: bool = False):
        return (self.rhs, self.lhs) if reverse else (self.lhs, self.rhs)

    def pairs(self, reverse: bool = False) -> list[tuple[Term, Term]]:
        """Non-trivial slot equations, primary (all-covering, largest) first."""
        src, dst = self.sides(reverse)
        pairs = [(a, b) for a, b in zip(src, dst) if a is not b]
        moved = [a for a, _ in pairs]
        vars_ = frozenset(t for t in subterms(moved) if isinstance(t, Base) and t.is_var)
        angle_vars = set()
        for t in subterms(moved):
            if isinstance(t, (App1, App2)):
                for p in t.op.params:
                    angle_vars |= {v for v in p.vars() if _is_angle_var(v)}

        def covers(t):
            st = list(subterms([t]))
            qv = {x for x in st if isinstance(x, Base) and x.is_var}
            av = set()
            for x in st:
                if isinstance(x, (App1, App2)):
                    for p in x.op.params:
                        av |= {v for v in p.vars() if _is_angle_var(v)}
            return qv == vars_ and av == angle_vars

        pairs = [p for p in pairs if not (isinstance(p[0], Base) and p[0].is_var)]
        pairs.sort(key=lambda p: (not covers(p[0]), -p[0].size))
        if pairs and not covers(pairs[0][0]):
            return []
        if any(isinstance(x, Base) and x.is_var and x not in vars_ for x in subterms([b for _, b in pairs])):
            return []
        return pairs


@dataclass(frozen=True)
class RewriteRule:
    name: str
    arity: int
    lhs_circuit: tuple[SymGate, ...]
    rhs_circuit: tuple[SymGate, ...]
    out_perm: tuple[int, ...] | None = None
    oriented: bool = False
    angle_relation: str = ""
    doc: str = ""

    @property
    def parametric(self) -> bool:
        return bool(self.angle_vars)

    @cached_property
    def angle_vars(self) -> tuple[str, ...]:
        vs = set()
        for g in self.lhs_circuit + self.rhs_circuit:
            for p in g.op.params:
                vs |= p.vars()
        return tuple(sorted(vs))

    @cached_property
    def pattern_register(self) -> tuple[Term, ...]:
        return base_register(["x", "y", "z"][: self.arity], is_var=True)

    @cached_property
    def lhs(self) -> tuple[Term, ...]:
        return sym_apply(self.lhs_circuit, self.pattern_register)

    @cached_property
    def rhs(self) -> tuple[Term, ...]:
        r = sym_apply(self.rhs_circuit, self.pattern_register)
        if self.out_perm is not None:
            r = tuple(r[self.out_perm[k]] for k in range(self.arity))
        return r

    @cached_property
    def equation(self) -> Equation:
        return Equation(self.name, self.lhs, self.rhs, self.oriented)

    def concrete(self, angles: dict[str, float]) -> tuple[Circuit, Circuit, tuple[int, ...]]:
        """Both sides as concrete circuits on qubits 0..arity-1, plus the
        output relabeling of the right side (rhs qubit k ends on slot perm[k])."""
        def conc(gs):
            return Circuit(self.arity, tuple(
                Gate(g.op.kind, g.qubits, tuple(p.evaluate(angles) for p in g.op.params),
                     g.op.conditioned) for g in gs))
        perm = tuple(range(self.arity))
        if self.out_perm is not None:
            inv = [0] * self.arity
            for k, src in enumerate(self.out_perm):
                inv[src] = k
            perm = tuple(inv)
        return conc(self.lhs_circuit), conc(self.rhs_circuit), perm

    def __str__(self):
        l = "; ".join(map(str, self.lhs_circuit)) or "skip"
        r = "; ".join(map(str, self.rhs_circuit)) or "skip"
        if self.out_perm is not None:
            r += f" relabel{self.out_perm}"
        return f"{self.name}: {l} == {r}"


def _g(kind: str, *qubits: int, params=(), cond=False) -> SymGate:
    return SymGate(Op(kind, tuple(Angle.of(p) for p in params), cond), tuple(qubits))


def _rule(name, arity, lhs, rhs, **kw) -> RewriteRule:
    return RewriteRule(name, arity, tuple(lhs), tuple(rhs), **kw)


def builtin_rules() -> list[RewriteRule]:
    """The shipped catalog. Every rule is certified by the matrix oracle in
    the test suite (local check and random embeddings)."""
    a, b, c = "?a", "?b", "?c"
    t, p, l = "?t", "?p", "?l"
    rules = [
        _rule("swap-projection", 2, [_g("SWAP", 0, 1)], [], out_perm=(1, 0), oriented=True,
              doc="app2(SWAP,x,y,1) = y and app2(SWAP,x,y,2) = x"),
        _rule("cx-cancel", 2, [_g("CX", 0, 1), _g("CX", 0, 1)], [], oriented=True),
        _rule("h-cancel", 1, [_g("H", 0), _g("H", 0)], [], oriented=True),
        _rule("x-cancel", 1, [_g("X", 0), _g("X", 0)], [], oriented=True),
        _rule("y-cancel", 1, [_g("Y", 0), _g("Y", 0)], [], oriented=True),
        _rule("z-cancel", 1, [_g("Z", 0), _g("Z", 0)], [], oriented=True),
        _rule("swap-cancel", 2, [_g("SWAP", 0, 1), _g("SWAP", 0, 1)], [], oriented=True),
        _rule("z-control-commute", 2, [_g("Z", 0), _g("CX", 0, 1)],
              [_g("CX", 0, 1), _g("Z", 0)]),
        _rule("x-target-commute", 2, [_g("X", 1), _g("CX", 0, 1)],
              [_g("CX", 0, 1), _g("X", 1)]),
        _rule("u1-control-commute", 2, [_g("U1", 0, params=[a]), _g("CX", 0, 1)],
              [_g("CX", 0, 1), _g("U1", 0, params=[a])], angle_relation="a unchanged"),
        _rule("cx-shared-target-commute", 3, [_g("CX", 0, 1), _g("CX", 2, 1)],
              [_g("CX", 2, 1), _g("CX", 0, 1)]),
        _rule("cx-shared-control-commute", 3, [_g("CX", 0, 1), _g("CX", 0, 2)],
              [_g("CX", 0, 2), _g("CX", 0, 1)]),
        _rule("u1-merge", 1, [_g("U1", 0, params=[a]), _g("U1", 0, params=[b])],
              [_g("U1", 0, params=[Angle.var(a) + Angle.var(b)])], oriented=True,
              angle_relation="sum: a + b"),
        _rule("u1-u3-merge", 1, [_g("U1", 0, params=[c]), _g("U3", 0, params=[t, p, l])],
              [_g("U3", 0, params=[t, p, Angle.var(l) + Angle.var(c)])], oriented=True,
              angle_relation="sum: lambda + lambda1"),
        _rule("u3-u1-merge", 1, [_g("U3", 0, params=[t, p, l]), _g("U1", 0, params=[c])],
              [_g("U3", 0, params=[t, Angle.var(p) + Angle.var(c), l])], oriented=True,
              angle_relation="sum: phi + lambda1"),
        _rule("u1-zero", 1, [_g("U1", 0, params=[0.0])], [], oriented=True,
              angle_relation="constant 0 (mod 2pi)"),
        _rule("z-as-u1", 1, [_g("Z", 0)], [_g("U1", 0, params=[PI])], oriented=True),
        _rule("t-as-u1", 1, [_g("T", 0)], [_g("U1", 0, params=[PI / 4])], oriented=True),
        _rule("s-as-u1", 1, [_g("S", 0)], [_g("U1", 0, params=[PI / 2])], oriented=True),
        _rule("rz-as-u1", 1, [_g("RZ", 0, params=[a])], [_g("U1", 0, params=[a])],
              oriented=True, angle_relation="equal angle, up to global phase"),
        _rule("x-as-u3", 1, [_g("X", 0)], [_g("U3", 0, params=[PI / 2, 0.0, PI])]),
        _rule("y-as-u3", 1, [_g("Y", 0)], [_g("U3", 0, params=[PI / 2, PI / 2, PI / 2])]),
        _rule("h-as-u2", 1, [_g("H", 0)], [_g("U2", 0, params=[0.0, PI])]),
        _rule("u2-as-u3", 1, [_g("U2", 0, params=[p, l])],
              [_g("U3", 0, params=[PI / 4, p, l])], angle_relation="phi, lambda unchanged"),
        _rule("cx-direction", 2, [_g("CX", 0, 1)],
              [_g("H", 0), _g("H", 1), _g("CX", 1, 0), _g("H", 0), _g("H", 1)]),
        # the same identity with every gate under one shared classical condition
        _rule("cx-direction-conditioned", 2, [_g("CX", 0, 1, cond=True)],
              [_g(k, *q, cond=True) for k, q in
               (("H", (0,)), ("H", (1,)), ("CX", (1, 0)), ("H", (0,)), ("H", (1,)))]),
        _rule("swap-decomposition", 2, [_g("SWAP", 0, 1)],
              [_g("CX", 0, 1), _g("CX", 1, 0), _g("CX", 0, 1)]),
    ]
    return rules


def rule_by_name(name: str, rules: Sequence[RewriteRule] | None = None) -> RewriteRule:
    for r in rules if rules is not None else builtin_rules():
        if r.name == name:
            return r
    raise KeyError(name)


# --------------------------------------------------------------------------
# matching and application

Subst = dict  # Base var -> Term, angle var name -> Angle


def _match_angle(pat: Angle, val: Angle, s: Subst) -> bool:
    v = pat.single_var
    if v is not None and _is_angle_var(v):
        if v in s:
            return s[v].coeffs == val.coeffs and abs(s[v].const - val.const) <= 1e-9
        s[v] = val
        return True
    if any(_is_angle_var(x) for x in pat.vars()):
        return False
    if pat.coeffs != val.coeffs:
        return False
    d = (pat.const - val.const) % (2 * PI)
    return min(d, 2 * PI - d) <= 1e-9


def _match_op(pat: Op, op: Op, s: Subst) -> bool:
    if pat.kind != op.kind or pat.conditioned != op.conditioned or len(pat.params) != len(op.params):
        return False
    return all(_match_angle(a, b, s) for a, b in zip(pat.params, op.params))


def match(pat: Term, t: Term, s: Subst | None = None) -> Subst | None:
    s = dict(s or {})
    stack = [(pat, t)]
    while stack:
        p, x = stack.pop()
        if isinstance(p, Base):
            if p.is_var:
                if p in s:
                    if s[p] is not x:
                        return None
                else:
                    s[p] = x
            elif p is not x:
                return None
        elif isinstance(p, App1):
            if not isinstance(x, App1) or not _match_op(p.op, x.op, s):
                return None
            stack.append((p.arg, x.arg))
        elif isinstance(p, App2):
            if not isinstance(x, App2) or x.k != p.k or not _match_op(p.op, x.op, s):
                return None
            stack.extend([(p.a2, x.a2), (p.a1, x.a1)])
        elif isinstance(p, Opaque):
            if not isinstance(x, Opaque) or x.frag != p.frag or x.k != p.k or len(x.args) != len(p.args):
                return None
            stack.extend(reversed(list(zip(p.args, x.args))))
        else:
            return None
    return s


def instantiate(pat: Term, s: Subst, memo: dict | None = None) -> Term:
    memo = {} if memo is None else memo
    for node in subterms([pat]):
        if id(node) in memo:
            continue
        if isinstance(node, Base):
            out = s[node] if node.is_var else node
        elif isinstance(node, App1):
            out = App1(_inst_op(node.op, s), memo[id(node.arg)])
        elif isinstance(node, App2):
            out = App2(_inst_op(node.op, s), memo[id(node.a1)], memo[id(node.a2)], node.k)
        else:
            out = Opaque(node.frag, tuple(memo[id(a)] for a in node.args), node.k)
        memo[id(node)] = out
    return memo[id(pat)]


def _inst_op(op: Op, s: Subst) -> Op:
    if not op.params:
        return op
    env = {k: v for k, v in s.items() if isinstance(k, str)}
    return Op(op.kind, tuple(p.substitute(env) for p in op.params), op.conditioned)


def substitute(roots: Sequence[Term], repl: dict[int, Term]) -> tuple[Term, ...]:
    """Rebuild ``roots`` replacing nodes (keyed by id) per ``repl``."""
    memo: dict[int, Term] = {}
    for node in subterms(roots):
        if id(node) in repl:
            memo[id(node)] = repl[id(node)]
            continue
        if isinstance(node, Base):
            out = node
        elif isinstance(node, App1):
            arg = memo[id(node.arg)]
            out = node if arg is node.arg else App1(node.op, arg)
        elif isinstance(node, App2):
            a1, a2 = memo[id(node.a1)], memo[id(node.a2)]
            out = node if (a1 is node.a1 and a2 is node.a2) else App2(node.op, a1, a2, node.k)
        else:
            args = tuple(memo[id(a)] for a in node.args)
            out = node if all(x is y for x, y in zip(args, node.args)) else Opaque(node.frag, args, node.k)
        memo[id(node)] = out
    return tuple(memo[id(r)] for r in roots)


@dataclass
class Match:
    equation: Equation
    reverse: bool
    subst: Subst
    replacements: dict[int, Term] = field(default_factory=dict)


def _head(t: Term):
    if isinstance(t, App1):
        return ("1", t.op.kind)
    if isinstance(t, App2):
        return ("2", t.op.kind, t.k)
    if isinstance(t, Opaque):
        return ("o", t.frag, t.k)
    return ("b",)


class TermGraph:
    """Shared-node view of a register: node list, parent sets, head index."""

    def __init__(self, roots: Sequence[Term]):
        self.roots = tuple(roots)
        self.nodes = list(subterms(self.roots))
        self.present = {id(n) for n in self.nodes}
        self.parents: dict[int, set[int]] = {}
        self.by_head: dict[tuple, list[Term]] = {}
        for n in self.nodes:
            self.by_head.setdefault(_head(n), []).append(n)
            for ch in n.children():
                self.parents.setdefault(id(ch), set()).add(id(n))
        self.root_ids = {id(r) for r in self.roots}

    def candidates(self, pattern: Term) -> list[Term]:
        if isinstance(pattern, Base) and pattern.is_var:
            return self.nodes
        return self.by_head.get(_head(pattern), [])


def _pattern_nodes(pat: Term, inst: Term) -> set[int]:
    """Ids of the nodes of ``inst`` that correspond to non-variable nodes of
    ``pat`` (the body of the matched instance, excluding variable images)."""
    out = set()
    stack = [(pat, inst)]
    while stack:
        p, x = stack.pop()
        if isinstance(p, Base):
            continue
        out.add(id(x))
        stack.extend(zip(p.children(), x.children()))
    return out


def find_matches(eq: Equation, roots: Sequence[Term] | TermGraph, reverse: bool = False,
                 limit: int | None = None) -> Iterator[Match]:
    """All sub-circuit matches of one side of ``eq`` in the term graph."""
    pairs = eq.pairs(reverse)
    if not pairs:
        return
    graph = roots if isinstance(roots, TermGraph) else TermGraph(roots)
    primary = pairs[0][0]
    found = 0
    for node in graph.candidates(primary):
        s = match(primary, node)
        if s is None:
            continue
        lhs_inst, rhs_inst = [], []
        ok = True
        for lp, rp in pairs:
            li = instantiate(lp, s) if lp is not primary else node
            if id(li) not in graph.present:
                ok = False
                break
            lhs_inst.append(li)
            rhs_inst.append(instantiate(rp, s))
        if not ok:
            continue
        outputs = {id(x) for x in lhs_inst}
        internal = set()
        for (lp, _), li in zip(pairs, lhs_inst):
            internal |= _pattern_nodes(lp, li)
        internal -= outputs
        allowed = internal | outputs
        if internal & graph.root_ids:
            continue
        if any(not graph.parents.get(i, set()) <= allowed for i in internal):
            continue
        if all(li is ri for li, ri in zip(lhs_inst, rhs_inst)):
            continue
        repl = {id(li): ri for li, ri in zip(lhs_inst, rhs_inst)}
        yield Match(eq, reverse, s, repl)
        found += 1
        if limit is not None and found >= limit:
            return


def apply_match(m: Match, roots: Sequence[Term]) -> tuple[Term, ...]:
    return substitute(roots, m.replacements)
