"""Matrix-oracle certification of rewrite rules.

Each rule is checked on its own qubits over sampled angles, and again inside
larger registers: random target qubits (in random order) with random context
circuits before and after the rewritten fragment.
"""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .semantics import circuit_distance, circuit_unitary, has_conditioned, permutation_matrix, phase_distance
from .symbolic.rules import RewriteRule, _g, _rule, builtin_rules
from .symbolic.terms import Angle

CERTIFIED, FAILED = "Certified", "Failed"


class ArityTooLargeError(ValueError):
    pass


@dataclass
class SoundnessCertificate:
    rule: str
    local_deviation: float | None = None
    embedding_deviation: float | None = None
    samples: int = 0
    trials: int = 0
    tol: float = 1e-9
    worst: dict | None = None
    status: str = CERTIFIED

    def merge(self, other: SoundnessCertificate) -> SoundnessCertificate:
        worst = self.worst
        if other.status == FAILED and (self.status != FAILED):
            worst = other.worst
        return SoundnessCertificate(
            self.rule,
            self.local_deviation if self.local_deviation is not None else other.local_deviation,
            _max(self.embedding_deviation, other.embedding_deviation),
            self.samples + other.samples, self.trials + other.trials, self.tol, worst,
            FAILED if FAILED in (self.status, other.status) else CERTIFIED)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        return asdict(self)


def _max(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _sample_angles(rule: RewriteRule, rng: random.Random) -> dict[str, float]:
    return {v: rng.uniform(-2 * math.pi, 2 * math.pi) for v in rule.angle_vars}


def check_rule(rule: RewriteRule, param_samples: int = 100, tol: float = 1e-9,
               seed: int = 0) -> SoundnessCertificate:
    """Both sides on ``arity`` qubits must agree up to phase for every sample."""
    if rule.arity > 3:
        raise ArityTooLargeError(f"{rule.name}: arity {rule.arity} > 3")
    rng = random.Random(seed)
    worst_dev, worst = -1.0, None
    samples = param_samples if rule.angle_vars else 1
    for _ in range(samples):
        angles = _sample_angles(rule, rng)
        lhs, rhs, perm = rule.concrete(angles)
        dev = circuit_distance(rhs, lhs, perm)
        if dev > worst_dev:
            worst_dev, worst = dev, {"angles": angles, "lhs": str(lhs), "rhs": str(rhs)}
    status = CERTIFIED if worst_dev < tol else FAILED
    return SoundnessCertificate(rule.name, worst_dev, None, samples, 0, tol,
                                worst if status == FAILED else None, status)


_CONTEXT_KINDS = ("H", "X", "Y", "Z", "T", "S", "CX", "SWAP", "U1", "U2", "U3", "RZ")
_NPARAMS = {"U1": 1, "U2": 2, "U3": 3, "RZ": 1}


def random_context(rng: random.Random, n: int, max_gates: int = 8) -> list[Gate]:
    out = []
    for _ in range(rng.randint(0, max_gates)):
        kind = rng.choice(_CONTEXT_KINDS)
        params = tuple(rng.uniform(-2 * math.pi, 2 * math.pi) for _ in range(_NPARAMS.get(kind, 0)))
        if kind in ("CX", "SWAP"):
            if n < 2:
                continue
            out.append(Gate(kind, tuple(rng.sample(range(n), 2))))
        else:
            out.append(Gate(kind, (rng.randrange(n),), params))
    return out


def check_embedding(rule: RewriteRule, n: int, trials: int = 50, tol: float = 1e-9,
                    seed: int = 0) -> SoundnessCertificate:
    """pre; lhs; post == pre; rhs; relabel; post on random targets in n qubits."""
    if rule.arity > n:
        raise ArityTooLargeError(f"{rule.name}: arity {rule.arity} exceeds register of {n}")
    if n > 8:
        raise ArityTooLargeError("embedding checks are limited to 8 qubits")
    rng = random.Random(seed * 1_000_003 + n)
    worst_dev, worst = -1.0, None
    for _ in range(trials):
        targets = rng.sample(range(n), rule.arity)
        angles = _sample_angles(rule, rng)
        lhs, rhs, perm = rule.concrete(angles)
        emb = {i: t for i, t in enumerate(targets)}
        pre = Circuit(n, tuple(random_context(rng, n)))
        post = Circuit(n, tuple(random_context(rng, n)))
        cond = has_conditioned(lhs) or has_conditioned(rhs)
        u_l = circuit_unitary(Circuit(n, tuple(g.relabel(emb) for g in lhs.gates)), cond)
        u_r = circuit_unitary(Circuit(n, tuple(g.relabel(emb) for g in rhs.gates)), cond)
        full = list(range(n)) + ([n] if cond else [])
        for i, t in enumerate(targets):
            full[t] = targets[perm[i]]
        u_pre, u_post = circuit_unitary(pre, cond), circuit_unitary(post, cond)
        a = u_post @ u_l @ u_pre
        b = u_post @ permutation_matrix(full) @ u_r @ u_pre
        dev = phase_distance(b, a)
        if dev > worst_dev:
            worst_dev = dev
            worst = {"n": n, "targets": targets, "angles": angles,
                     "pre": [str(g) for g in pre.gates], "post": [str(g) for g in post.gates]}
    status = CERTIFIED if worst_dev < tol else FAILED
    return SoundnessCertificate(rule.name, None, worst_dev, 0, trials, tol,
                                worst if status == FAILED else None, status)


def certify(rule: RewriteRule, param_samples: int = 100, sizes: Sequence[int] = (3, 4, 5, 6),
            trials: int = 50, tol: float = 1e-9, seed: int = 0) -> SoundnessCertificate:
    cert = check_rule(rule, param_samples, tol, seed)
    for n in sizes:
        if n >= rule.arity:
            cert = cert.merge(check_embedding(rule, n, trials, tol, seed))
    return cert


def mutation_corpus() -> list[RewriteRule]:
    """Deliberately wrong rules; every one must fail certification."""
    a, b = "?a", "?b"
    t, p, l = "?t", "?p", "?l"
    return [
        _rule("bogus-x-idempotent", 1, [_g("X", 0), _g("X", 0)], [_g("X", 0)]),
        _rule("bogus-cx-reversed-cancel", 2, [_g("CX", 0, 1), _g("CX", 1, 0)], []),
        _rule("bogus-z-target-commute", 2, [_g("Z", 1), _g("CX", 0, 1)],
              [_g("CX", 0, 1), _g("Z", 1)]),
        _rule("bogus-x-control-commute", 2, [_g("X", 0), _g("CX", 0, 1)],
              [_g("CX", 0, 1), _g("X", 0)]),
        _rule("bogus-u1-difference", 1, [_g("U1", 0, params=[a]), _g("U1", 0, params=[b])],
              [_g("U1", 0, params=[Angle.var(a) - Angle.var(b)])]),
        _rule("bogus-u1-u3-wrong-slot", 1, [_g("U1", 0, params=[b]), _g("U3", 0, params=[t, p, l])],
              [_g("U3", 0, params=[t, Angle.var(p) + Angle.var(b), l])]),
        _rule("bogus-swap-no-relabel", 2, [_g("SWAP", 0, 1)], []),
        _rule("bogus-h-x-commute", 1, [_g("H", 0), _g("X", 0)], [_g("X", 0), _g("H", 0)]),
        _rule("bogus-cx-mixed-commute", 3, [_g("CX", 0, 1), _g("CX", 1, 2)],
              [_g("CX", 1, 2), _g("CX", 0, 1)]),
    ]


def certify_catalog(rules: Sequence[RewriteRule] | None = None, **kw) -> list[SoundnessCertificate]:
    return [certify(r, **kw) for r in (builtin_rules() if rules is None else rules)]
