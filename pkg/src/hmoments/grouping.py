"""Greedy partitioning of Pauli strings into simultaneously measurable groups."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence
import warnings

import numpy as np

from .circuit import Circuit
from .errors import ContractError
from .pauli import PauliString, PauliTerm, commutes, pauli_mul, qubitwise_commutes
from .simulator import StateVector, measurement_rotation, pauli_expectations

POLICIES = ("weight-descending", "lexicographic", "insertion")


def order_strings(strings: Iterable[PauliString], policy: str) -> list[PauliString]:
    strings = list(dict.fromkeys(strings))
    if policy == "weight-descending":
        return sorted(strings, key=lambda s: (-s.weight, s.label))
    if policy == "lexicographic":
        return sorted(strings, key=lambda s: s.label)
    if policy == "insertion":
        return strings
    raise ContractError(f"unknown ordering policy {policy!r}; choose from {POLICIES}")


@dataclass(frozen=True)
class GroupingPlan:
    groups: tuple[tuple[PauliString, ...], ...]
    rotations: tuple[Circuit, ...] | None
    policy: str = "weight-descending"
    relation: str = "qwc"

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def strings(self) -> list[PauliString]:
        return [s for g in self.groups for s in g]

    def validate(self) -> None:
        """Exhaustive pairwise check of the grouping relation."""
        pred = qubitwise_commutes if self.relation == "qwc" else commutes
        for g in self.groups:
            for i, a in enumerate(g):
                for b in g[i + 1:]:
                    if not pred(a, b):
                        raise ContractError(f"{a.label} and {b.label} share a group but fail {self.relation}")

    def to_text(self) -> str:
        return "".join(" ".join(s.label for s in g) + "\n" for g in self.groups)

    @classmethod
    def from_text(cls, text: str, policy: str = "insertion") -> "GroupingPlan":
        groups = tuple(tuple(PauliString.from_label(t) for t in line.split())
                       for line in text.splitlines() if line.strip())
        return cls(groups, tuple(measurement_rotation(g) for g in groups), policy)


def greedy_qwc_grouping(strings: Iterable[PauliString], policy: str = "weight-descending",
                        relation: str = "qwc") -> GroupingPlan:
    """First-fit greedy colouring of the non-commutation graph.

    Each string, taken in policy order, joins the first group whose members it
    all commutes with (qubitwise for ``relation="qwc"``, fully for
    ``"general"``); otherwise it opens a new group. General-commutation plans
    carry no measurement rotations.
    """
    ordered = order_strings(strings, policy)
    if not ordered:
        raise ContractError("nothing to group")
    n = ordered[0].n_qubits
    if any(s.n_qubits != n for s in ordered):
        raise ContractError("strings must share a qubit count")
    pred: Callable[[PauliString, PauliString], bool]
    if relation == "qwc":
        pred = qubitwise_commutes
    elif relation == "general":
        pred = commutes
    else:
        raise ContractError(f"unknown relation {relation!r}")
    groups: list[list[PauliString]] = []
    for s in ordered:
        for g in groups:
            if all(pred(s, t) for t in g):
                g.append(s)
                break
        else:
            groups.append([s])
    frozen = tuple(tuple(g) for g in groups)
    rotations = tuple(measurement_rotation(g) for g in frozen) if relation == "qwc" else None
    return GroupingPlan(frozen, rotations, policy, relation)


def group_covariances(plan: GroupingPlan, state: StateVector) -> list[np.ndarray]:
    """cov(P_i, P_j) = <P_i P_j> - <P_i><P_j> within each group."""
    single = pauli_expectations(state, plan.strings())
    out = []
    for g in plan.groups:
        k = len(g)
        cov = np.empty((k, k))
        prods = [pauli_mul_term(a, b) for a in g for b in g]
        vals = pauli_expectations(state, {p[0] for p in prods})
        for idx, (s, phase) in enumerate(prods):
            i, j = divmod(idx, k)
            cov[i, j] = (phase * vals[s]).real - single[g[i]] * single[g[j]]
        out.append(cov)
    return out


def pauli_mul_term(a: PauliString, b: PauliString):
    t = pauli_mul(PauliTerm(a), PauliTerm(b))
    return t.string, t.coefficient


def group_variances(plan: GroupingPlan, coefficients: Mapping[PauliString, float],
                    covariances: Sequence[np.ndarray]) -> np.ndarray:
    out = []
    for g, cov in zip(plan.groups, covariances):
        h = np.array([float(np.real(coefficients.get(s, 0.0))) for s in g])
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (len(g), len(g)):
            raise ContractError("covariance block does not match group size")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ContractError("covariance block is not symmetric")
        out.append(float(h @ cov @ h))
    return np.array(out)


def shot_budget(plan: GroupingPlan, coefficients: Mapping[PauliString, float], epsilon: float,
                covariances: Sequence[np.ndarray] | None = None,
                state: StateVector | None = None) -> float:
    """(sum_G sqrt(sum_{i,j in G} h_i h_j cov(P_i, P_j)) / epsilon)^2."""
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    if covariances is None:
        if state is None:
            raise ContractError("need covariances or a state to compute them from")
        covariances = group_covariances(plan, state)
    var = group_variances(plan, coefficients, covariances)
    if np.any(var < -1e-12):
        warnings.warn(f"clipping negative group variance {var.min():.3e} to zero", RuntimeWarning,
                      stacklevel=2)
    var = np.clip(var, 0.0, None)
    return (float(np.sum(np.sqrt(var))) / epsilon) ** 2


def optimal_allocation(variances: np.ndarray, epsilon: float) -> np.ndarray:
    """Shots per group, proportional to sqrt(variance), that reach ``epsilon``."""
    sd = np.sqrt(np.clip(variances, 0.0, None))
    total = (sd.sum() / epsilon) ** 2
    if sd.sum() == 0:
        return np.zeros_like(sd)
    return total * sd / sd.sum()
