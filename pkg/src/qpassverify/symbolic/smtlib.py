"""SMT-LIB 2 export of equivalence goals.

Qubit terms live in an uninterpreted sort ``Q``; every gate kind becomes an
uninterpreted function (one per output slot for two-qubit gates), every rule
and assumption a universally quantified slot equation, and the goal is
asserted negated, so ``unsat`` certifies it.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Sequence

from .prover import ProofGoal
from .rules import Equation, RewriteRule, TermGraph, apply_match, builtin_rules, find_matches
from .terms import Angle, App1, App2, Base, Op, Opaque, Term, subterms, sym_apply


def _sym(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name.lstrip("?")) or "v"


def _num(x: float) -> str:
    if x < 0:
        return f"(- {_num(-x)})"
    fr = Fraction(x).limit_denominator(10**12)
    return f"{fr.numerator}.0" if fr.denominator == 1 else f"(/ {fr.numerator}.0 {fr.denominator}.0)"


def _const(x: float) -> str:
    """Multiples of pi stay symbolic (exact arithmetic); others are decimals."""
    r = x / math.pi
    fr = Fraction(r).limit_denominator(128)
    if x != 0 and abs(float(fr) - r) < 1e-12:
        return f"(* {_num(float(fr))} pi)" if fr != 1 else "pi"
    return _num(round(x, 12))


def _angle(a: Angle, prefix: str) -> str:
    parts = [f"(* {_num(c)} {prefix}{_sym(v)})" if c != 1 else f"{prefix}{_sym(v)}"
             for v, c in a.coeffs]
    if a.const or not parts:
        parts.append(_const(a.const))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _fname(op: Op, k: int | None = None) -> str:
    base = ("app1_" if k is None else "app2_") + _sym(op.kind)
    if op.conditioned:
        base += "_c"
    return base if k is None else f"{base}_{k}"


class _Encoder:
    def __init__(self):
        self.funcs: dict[str, str] = {}

    def term(self, t: Term, bound: set) -> str:
        memo: dict[int, str] = {}
        for node in subterms([t]):
            if isinstance(node, Base):
                out = ("p_" if node.is_var else "s_") + _sym(node.name)
            elif isinstance(node, App1):
                f = _fname(node.op)
                self._declare(f, len(node.op.params), 1)
                args = [_angle(p, "p_" if _is_pattern(p) else "v_") for p in node.op.params]
                out = f"({f} {' '.join(args + [memo[id(node.arg)]])})"
            elif isinstance(node, App2):
                f = _fname(node.op, node.k)
                self._declare(f, len(node.op.params), 2)
                args = [_angle(p, "p_" if _is_pattern(p) else "v_") for p in node.op.params]
                out = f"({f} {' '.join(args + [memo[id(node.a1)], memo[id(node.a2)]])})"
            else:
                f = f"frag_{_sym(node.frag)}_{node.k}"
                self._declare(f, 0, len(node.args))
                out = f"({f} {' '.join(memo[id(a)] for a in node.args)})" if node.args else f
            memo[id(node)] = out
        return memo[id(t)]

    def _declare(self, f: str, nreal: int, nq: int):
        sig = " ".join(["Real"] * nreal + ["Q"] * nq)
        self.funcs.setdefault(f, f"(declare-fun {f} ({sig}) Q)")


def _is_pattern(a: Angle) -> bool:
    return any(v.startswith("?") for v in a.vars())


def _vars_of(terms: Sequence[Term]) -> tuple[list[str], list[str]]:
    qv, av = [], []
    for t in subterms(terms):
        if isinstance(t, Base) and t.is_var:
            qv.append("p_" + _sym(t.name))
        elif isinstance(t, (App1, App2)):
            for p in t.op.params:
                av += ["p_" + _sym(v) for v in sorted(p.vars()) if v.startswith("?")]
    return sorted(set(qv)), sorted(set(av))


def _kinds(terms: Sequence[Term]) -> set:
    return {(t.op.kind, t.op.conditioned) for t in subterms(terms) if isinstance(t, (App1, App2))}


def _vocabulary(rules: Sequence[RewriteRule], kinds: set) -> set:
    """Gate kinds of the goal, closed under the right sides of oriented rules."""
    kinds = set(kinds)
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.oriented and _kinds(r.lhs) <= kinds and not _kinds(r.rhs) <= kinds:
                kinds |= _kinds(r.rhs)
                changed = True
    return kinds


def _relevant(rules: Sequence[RewriteRule], registers: Sequence[tuple[Term, ...]],
              assumptions: Sequence[Equation], rounds: int = 4, max_states: int = 400) -> list[RewriteRule]:
    """Rules inside the goal's vocabulary that fire somewhere in a bounded
    exploration of the goal's registers. Keeps the quantified theory small
    (and free of vocabulary-expanding rules), so solvers can also find models."""
    vocab = _vocabulary(rules, set().union(*(_kinds(r) for r in registers)) |
                        set().union(set(), *(_kinds(e.lhs + e.rhs) for e in assumptions)))
    allowed = [r for r in rules
               if (_kinds(r.lhs) <= vocab if r.oriented else (_kinds(r.lhs) | _kinds(r.rhs)) <= vocab)]
    eqs = [(r.name, r.equation, r.oriented) for r in allowed] + [(a.name, a, False) for a in assumptions]
    seen = set(registers)
    frontier = list(registers)
    used: set[str] = set()
    for _ in range(rounds):
        nxt = []
        for reg in frontier:
            graph = TermGraph(reg)
            for name, eq, oriented in eqs:
                for reverse in ((False,) if oriented else (False, True)):
                    for m in find_matches(eq, graph, reverse, 8):
                        used.add(name)
                        new = apply_match(m, reg)
                        if new not in seen and len(seen) < max_states:
                            seen.add(new)
                            nxt.append(new)
        frontier = nxt
        if not frontier:
            break
    return [r for r in allowed if r.name in used]


def _forall(enc: _Encoder, name: str, lhs, rhs) -> list[str]:
    out = [f"; {name}"]
    for l, r in zip(lhs, rhs):
        if l is r:
            continue
        qv, av = _vars_of([l, r])
        body = f"(= {enc.term(l, set())} {enc.term(r, set())})"
        binders = " ".join([f"({v} Q)" for v in qv] + [f"({v} Real)" for v in av])
        out.append(f"(assert (forall ({binders}) {body}))" if binders else f"(assert {body})")
    return out


def export_smtlib(goal: ProofGoal, rules: Sequence[RewriteRule] | None = None,
                  relevant_only: bool = True) -> str:
    rules = builtin_rules() if rules is None else list(rules)
    reg = tuple(Base(s) for s in goal.slots)
    left = sym_apply(goal.lhs, reg, erase_opaque=goal.erase_opaque)
    right = sym_apply(goal.rhs, reg, erase_opaque=goal.erase_opaque)
    eqs = [a.equation(goal.slots) for a in goal.assumptions]
    chosen = _relevant(rules, [left, right], eqs) if relevant_only else rules

    enc = _Encoder()
    body: list[str] = []
    for r in chosen:
        body += _forall(enc, f"rule {r.name}", r.lhs, r.rhs)
    for e in eqs:
        body += _forall(enc, f"assumption {e.name}", e.lhs, e.rhs)
    goal_eqs = [f"(= {enc.term(l, set())} {enc.term(r, set())})" for l, r in zip(left, right)]
    negated = "(assert (not (and " + " ".join(goal_eqs) + " true)))" if goal_eqs else "(assert false)"

    angle_vars = set()
    for t in subterms(left + right):
        if isinstance(t, (App1, App2)):
            for p in t.op.params:
                angle_vars |= {v for v in p.vars() if not v.startswith("?")}
    header = [f"; equivalence goal {goal.name}: unsat certifies lhs == rhs",
              "(set-logic ALL)", "(declare-sort Q 0)", "(declare-const pi Real)",
              "(assert (> pi 3.0))"]
    header += [f"(declare-const s_{_sym(s)} Q)" for s in goal.slots]
    header += [f"(declare-const v_{_sym(v)} Real)" for v in sorted(angle_vars)]
    header += list(enc.funcs.values())
    return "\n".join(header + body + ["; negated goal", negated, "(check-sat)", ""])
