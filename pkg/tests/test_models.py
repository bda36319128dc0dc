import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmoments.errors import ContractError
from hmoments.models import (HeisenbergParams, Topology, build_ansatz, build_heisenberg,
                             build_magnetization, exact_spectrum)
from hmoments.simulator import prepare

from oracles import ansatz_state, heisenberg_matrix, magnetization_matrix

couplings = st.floats(-2, 2, allow_nan=False)


@given(J=couplings, U=couplings, B=couplings)
@settings(max_examples=40, deadline=None)
def test_hamiltonian_matches_kron(J, U, B):
    H = build_heisenberg(HeisenbergParams(J=J, U=U, B=B))
    # coefficients at or below the 1e-12 dropout are removed, hence the tolerance
    np.testing.assert_allclose(H.to_matrix(), heisenberg_matrix(J, U, B), atol=1e-10)


def test_ring_topology_adds_closing_bond():
    p = HeisenbergParams(J=0.7, U=0.4, B=1.0, topology=Topology.RING)
    np.testing.assert_allclose(build_heisenberg(p).to_matrix(), heisenberg_matrix(0.7, 0.4, 1.0, ring=True),
                               atol=1e-12)
    assert len(p.bonds()) == 4


def test_generic_hamiltonian_has_thirteen_terms():
    assert len(build_heisenberg(HeisenbergParams(J=1, U=1, B=1))) == 13


def test_field_only_model_is_diagonal():
    H = build_heisenberg(HeisenbergParams(J=0, U=0, B=1))
    assert all(s.is_diagonal() for s in H.strings())
    assert exact_spectrum(H).ground_energy == pytest.approx(-4.0)


def test_known_ground_energy():
    # (J, U, B) = (1, 1, 1): the isotropic chain ground energy lies in the M = -1 sector
    sp = exact_spectrum(build_heisenberg(HeisenbergParams(J=1, U=1, B=1)))
    ref = np.linalg.eigvalsh(heisenberg_matrix(1, 1, 1))[0]
    assert sp.ground_energy == pytest.approx(ref, abs=1e-12)
    assert sp.ground_energy == pytest.approx(-3 - 2 * np.sqrt(3) + 0.0, abs=1e-9)


def test_magnetization_commutes_with_hamiltonian():
    H = build_heisenberg(HeisenbergParams(J=0.3, U=0.8, B=1.0))
    M = build_magnetization(4)
    np.testing.assert_allclose(M.to_matrix(), magnetization_matrix(), atol=0)
    # individual terms fail to commute, yet the sum commutes
    assert any(not np.allclose(a.to_matrix() @ M.to_matrix(), M.to_matrix() @ a.to_matrix())
               for a in (s for s in H.strings()))
    assert len(H.commutator(M)) == 0


@pytest.mark.parametrize("t0,t1", [(-2.0, 1.0), (0.0, 0.0), (0.3, -1.7)])
def test_ansatz_matches_oracle(t0, t1):
    psi = prepare(build_ansatz(t0, t1)).amplitudes
    np.testing.assert_allclose(psi, ansatz_state(t0, t1), atol=1e-12)


def test_ansatz_zero_angles_basis_state():
    psi = prepare(build_ansatz(0.0, 0.0)).amplitudes
    # Ry(pi) takes qubit 3 to |1>; CZ(2,3) sees qubit 2 in |0>
    assert abs(psi[0b1101]) == pytest.approx(1.0)


def test_ansatz_is_four_qubit_only():
    with pytest.raises(ContractError):
        build_ansatz(0, 0, n_qubits=3)


def test_spectrum_weights_sum_to_one():
    sp = exact_spectrum(build_heisenberg(HeisenbergParams(J=0.5, U=0.5, B=1)))
    w = sp.weights(prepare(build_ansatz(-2, 1)))
    assert w.sum() == pytest.approx(1.0)


def test_non_hermitian_rejected():
    from hmoments.pauli import PauliSum
    with pytest.raises(ContractError):
        exact_spectrum(PauliSum.from_labels({"XY": 1j}))
