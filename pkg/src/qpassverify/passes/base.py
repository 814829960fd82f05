"""Common machinery for passes: the estimator base class, configuration and
the symbolic vocabulary used in branch declarations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from sklearn.base import BaseEstimator, TransformerMixin

from ..circuit import Circuit, CircuitError, CouplingMap, Gate, Layout
from ..framework import BranchSpec, PassKind, _Template
from ..symbolic.prover import Assumption, ProofGoal
from ..symbolic.terms import Angle, Frag, Op, Permute, SymGate

DEFAULT_SEED = 20220613

OUT, REM, INPUT = Frag("OUT"), Frag("REM"), Frag("INPUT")
C1, C2 = Frag("C1"), Frag("C2")
SLOTS2 = ("a", "b", "r")
SLOTS1 = ("q", "r")


class ConfigError(CircuitError):
    """A pass was configured inconsistently (e.g. routing without a map)."""


@dataclass
class PassConfig:
    coupling_map: CouplingMap | None = None
    layout: Layout | None = None
    basis: tuple[str, ...] | None = None
    seed: int = DEFAULT_SEED
    lookahead_depth: int = 4
    lookahead_width: int = 4


def sg(kind: str, *qubits: int, params=(), conditioned: bool = False) -> SymGate:
    return SymGate(Op(kind, tuple(Angle.of(p) for p in params), conditioned), tuple(qubits))


def gvar(name: str, *qubits: int) -> SymGate:
    """A gate variable (any gate of the domain) on the given slots."""
    return SymGate(Op(name), tuple(qubits))


def inverse_perm(p) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, x in enumerate(p):
        inv[x] = i
    return tuple(inv)


def exit_goal(name: str = "top-level") -> ProofGoal:
    """At loop exit the remaining list is empty, so the invariant
    ``output ; skip == input`` yields the pass contract."""
    return ProofGoal(SLOTS2, (OUT,), (INPUT,),
                     (Assumption("loop-exit", (OUT,), (INPUT,)),), name=name)


# Representative layout used for relabeling lemmas: virtual slot i sits on
# physical slot PI[i].
PI = (1, 2, 0)


def permuted_exit_goal(name: str = "top-level") -> ProofGoal:
    """Exit of a relabeling loop: ``output ; P^-1 == input`` gives
    ``output == input ; P``."""
    back = Permute(inverse_perm(PI))
    return ProofGoal(SLOTS2, (OUT,), (INPUT, Permute(PI)),
                     (Assumption("loop-exit", (OUT, back), (INPUT,)),), name=name)


class BasePass(BaseEstimator, TransformerMixin):
    """A compiler pass in estimator form.

    ``transform`` takes a circuit and returns the rewritten circuit; values
    computed along the way (layouts, analysis results) are left in
    ``property_set_``. Subclasses implement ``run`` and describe their loops
    through ``templates`` so the verifier can derive proof obligations.
    """

    kind: PassKind = PassKind.ASSORTED
    pass_name: str = "pass"
    demo_bug: bool = False
    modifies_circuit: bool = True

    def fit(self, X, y=None):
        return self

    def transform(self, X, y=None):
        props: dict = {}
        out = self.run(X, props)
        self.property_set_ = props
        return out

    def run(self, c: Circuit, props: dict) -> Circuit:
        raise NotImplementedError

    # -- verification hooks -------------------------------------------------
    def templates(self) -> list[_Template]:
        return []

    def top_level_goal(self) -> ProofGoal | None:
        if not self.modifies_circuit:
            return None
        if self.kind.obligation == "PermutationEquivalence":
            return permuted_exit_goal(f"{self.pass_name}/top-level")
        return exit_goal(f"{self.pass_name}/top-level")

    def verification_map(self) -> CouplingMap | None:
        return getattr(self, "coupling_map", None)

    def termination_corpus(self) -> Iterator[Circuit]:
        """Regression inputs tried first by the cycle search."""
        return iter(())

    def random_input(self, rng, max_gates: int = 6) -> Circuit:
        from ..benchmarks import random_circuit
        return random_circuit(rng, rng.randint(2, 4), rng.randint(1, max_gates))

    def _run_checked(self) -> bool:
        return bool(getattr(self, "checked", False))


def require_map(p) -> CouplingMap:
    m = getattr(p, "coupling_map", None)
    if m is None:
        raise ConfigError(f"{p.pass_name} requires a coupling map")
    m.check_connected()
    return m


def widen(c: Circuit, n: int) -> Circuit:
    if c.nqreg > n:
        raise ConfigError(f"register of {c.nqreg} qubits exceeds the {n}-qubit device")
    return Circuit(n, c.gates, c.ncreg)


def all_branches(templates: Iterable[_Template]) -> list[BranchSpec]:
    return [b for t in templates for b in t.branches]
