import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmoments.errors import ContractError
from hmoments.grouping import (GroupingPlan, greedy_qwc_grouping, group_covariances, optimal_allocation,
                               shot_budget)
from hmoments.models import HeisenbergParams, build_ansatz, build_heisenberg, exact_spectrum
from hmoments.pauli import PauliString, basis_closure, index_masks, qubitwise_commutes
from hmoments.simulator import StateVector, apply_circuit, pauli_expectations, prepare

from oracles import pauli_matrix


def ps(*labels):
    return [PauliString.from_label(l) for l in labels]


def test_single_qwc_class():
    assert len(greedy_qwc_grouping(ps("XY", "XI", "IY", "II"))) == 1


def test_anticommuting_pair_splits():
    assert len(greedy_qwc_grouping(ps("XI", "ZI"))) == 2


@given(labels=st.lists(st.text("IXYZ", min_size=3, max_size=3), min_size=1, max_size=30),
       policy=st.sampled_from(["weight-descending", "lexicographic", "insertion"]))
@settings(max_examples=80, deadline=None)
def test_plan_is_valid_partition(labels, policy):
    strings = ps(*labels)
    plan = greedy_qwc_grouping(strings, policy)
    plan.validate()
    flat = plan.strings()
    assert len(flat) == len(set(flat))
    assert set(flat) == set(strings)
    for g in plan.groups:
        for i, a in enumerate(g):
            for b in g[i + 1:]:
                assert qubitwise_commutes(a, b)


def test_heisenberg_closure_grouping():
    H = build_heisenberg(HeisenbergParams(J=0.37, U=0.61, B=1.0))
    plan = greedy_qwc_grouping(basis_closure(H).strings)
    plan.validate()
    assert len(plan) <= 25
    assert len(plan.strings()) == 72


def test_first_fit_is_not_monotone_under_removal():
    # removing YXX lets YXI open its own group; first-fit colouring is order-sensitive
    full = ps("YIX", "IYX", "ZIX", "YXX", "YXI", "IYI")
    reduced = [s for s in full if s.label != "YXX"]
    assert len(greedy_qwc_grouping(full)) == 2
    assert len(greedy_qwc_grouping(reduced)) == 3


def test_single_removals_from_heisenberg_closure_never_add_groups():
    H = build_heisenberg(HeisenbergParams(J=0.37, U=0.61, B=1.0))
    strings = sorted(s for s in basis_closure(H).strings if not s.is_identity())
    base = len(greedy_qwc_grouping(strings))
    for i in range(len(strings)):
        assert len(greedy_qwc_grouping(strings[:i] + strings[i + 1:])) <= base


def test_text_roundtrip():
    plan = greedy_qwc_grouping(ps("XXI", "XIZ", "ZZZ", "YIY"))
    back = GroupingPlan.from_text(plan.to_text())
    assert back.groups == plan.groups


def test_general_relation_groups_more_coarsely():
    H = build_heisenberg(HeisenbergParams(J=1, U=1, B=1))
    strings = basis_closure(H).strings
    assert len(greedy_qwc_grouping(strings, relation="general")) <= len(greedy_qwc_grouping(strings))


def test_bad_policy():
    with pytest.raises(ContractError):
        greedy_qwc_grouping(ps("X"), policy="random")


def test_budget_single_string():
    s = PauliString.from_label("XZ")
    state = prepare(build_ansatz_like_2q())
    p = pauli_expectations(state, [s])[s]
    plan = greedy_qwc_grouping([s])
    budget = shot_budget(plan, {s: 0.7}, 0.01, state=state)
    assert budget == pytest.approx(0.49 * (1 - p ** 2) / 1e-4, rel=1e-12)


def build_ansatz_like_2q():
    from hmoments.circuit import Circuit
    return Circuit(2).add("ry", 0, angle=0.4).add("h", 1).add("cz", 0, 1)


def test_budget_singletons_reduce_to_sum():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = StateVector(3, psi / np.linalg.norm(psi))
    strings = ps("XII", "ZII")
    coeffs = {strings[0]: 0.3, strings[1]: -1.2}
    plan = greedy_qwc_grouping(strings)
    assert len(plan) == 2
    ev = pauli_expectations(state, strings)
    ref = (sum(abs(coeffs[s]) * np.sqrt(1 - ev[s] ** 2) for s in strings) / 0.05) ** 2
    assert shot_budget(plan, coeffs, 0.05, state=state) == pytest.approx(ref, rel=1e-12)


def test_budget_zero_when_every_covariance_vanishes():
    state = StateVector.from_label("0101")
    strings = ps("ZIII", "IZZI", "ZZZZ")
    plan = greedy_qwc_grouping(strings)
    assert shot_budget(plan, {s: 1.0 for s in strings}, 0.01, state=state) == pytest.approx(0, abs=1e-12)


def test_covariances_match_dense():
    rng = np.random.default_rng(3)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    plan = greedy_qwc_grouping(ps("XXII", "XIII", "IXZI", "IIIZ"))
    covs = group_covariances(plan, StateVector(4, psi))
    g = plan.groups[0]
    for i, a in enumerate(g):
        for j, b in enumerate(g):
            A, B = pauli_matrix(a.label), pauli_matrix(b.label)
            ref = np.vdot(psi, A @ B @ psi).real - np.vdot(psi, A @ psi).real * np.vdot(psi, B @ psi).real
            assert covs[0][i, j] == pytest.approx(ref, abs=1e-12)


def test_budget_matches_monte_carlo_variance():
    """Sampling the grouped estimator with the optimal allocation reproduces epsilon^2."""
    H = build_heisenberg(HeisenbergParams(J=1, U=1, B=1))
    state = prepare(build_ansatz(-2.0, 1.0))
    plan = greedy_qwc_grouping(basis_closure(H).strings)
    coeffs = {s: c.real for s, c in H.items()}
    eps = 0.01
    covs = group_covariances(plan, state)
    budget = shot_budget(plan, coeffs, eps, covariances=covs)
    var = np.array([float(np.array([coeffs.get(s, 0.0) for s in g]) @ c @ np.array([coeffs.get(s, 0.0) for s in g]))
                    for g, c in zip(plan.groups, covs)])
    shots = optimal_allocation(var, eps)
    assert shots.sum() == pytest.approx(budget, rel=1e-9)
    rng = np.random.default_rng(42)
    reps = 2000
    total = np.zeros(reps)
    idx = np.arange(16)
    for g, rot, n in zip(plan.groups, plan.rotations, shots):
        h = np.array([coeffs.get(s, 0.0) for s in g])
        if not h.any() or round(n) == 0:
            continue
        probs = apply_circuit(state, rot).probabilities()
        # eigenvalue of sum_i h_i P_i on each measured bitstring
        vals = np.zeros(16)
        for hi, s in zip(h, g):
            xi, zi = index_masks(s)
            vals += hi * (1 - 2 * (np.bitwise_count(idx & (xi | zi)).astype(int) & 1))
        counts = rng.multinomial(int(round(n)), probs / probs.sum(), size=reps)
        total += counts @ vals / round(n)
    emp = total.var(ddof=1)
    # chi-square spread of a 2000-sample variance is about 3 percent
    assert emp == pytest.approx(eps ** 2, rel=0.12)
