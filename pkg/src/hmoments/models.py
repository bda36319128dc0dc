"""Model Hamiltonians, observables, the trial-state circuit and a dense oracle."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .circuit import Circuit, Gate
from .errors import ContractError, ResourceError
from .pauli import PauliString, PauliSum

MAX_DENSE_QUBITS = 12


class Topology(str, Enum):
    OPEN = "open-chain"
    RING = "ring"


@dataclass(frozen=True)
class HeisenbergParams:
    J: float = 1.0
    U: float = 1.0
    B: float = 1.0
    n_sites: int = 4
    topology: Topology = Topology.OPEN

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if self.n_sites < 2:
            raise ContractError("need at least two sites")
        if not all(math.isfinite(v) for v in (self.J, self.U, self.B)):
            raise ContractError("couplings must be finite")

    def bonds(self) -> list[tuple[int, int]]:
        n = self.n_sites
        pairs = [(i, i + 1) for i in range(n - 1)]
        if self.topology is Topology.RING and n > 2:
            pairs.append((n - 1, 0))
        return pairs


def build_heisenberg(p: HeisenbergParams) -> PauliSum:
    """J sum (XX + YY) + U sum ZZ over bonds, plus B sum Z."""
    n = p.n_sites
    terms: dict[PauliString, float] = {}
    for i, j in p.bonds():
        m = (1 << i) | (1 << j)
        for s, c in ((PauliString(n, m, 0), p.J), (PauliString(n, m, m), p.J),
                     (PauliString(n, 0, m), p.U)):
            terms[s] = terms.get(s, 0.0) + c
    for i in range(n):
        s = PauliString(n, 0, 1 << i)
        terms[s] = terms.get(s, 0.0) + p.B
    return PauliSum(n, terms)


def build_magnetization(n_qubits: int) -> PauliSum:
    if n_qubits < 1:
        raise ContractError("n_qubits must be >= 1")
    return PauliSum(n_qubits, {PauliString(n_qubits, 0, 1 << i): 1.0 for i in range(n_qubits)})


def build_ansatz(theta0: float, theta1: float, n_qubits: int = 4) -> Circuit:
    """Hardware-efficient trial circuit on four qubits.

    Prepares |1100> (X on qubits 0 and 1), rotates Ry(theta0) on qubit 0,
    Ry(theta1) on qubit 2 and Ry(pi) on qubit 3, then entangles with the CZ
    ladder (0,1), (1,2), (2,3).
    """
    if n_qubits != 4:
        raise ContractError("the ansatz is defined for four qubits")
    gates = [
        Gate("x", (0,)), Gate("x", (1,)),
        Gate("ry", (0,), theta0), Gate("ry", (2,), theta1), Gate("ry", (3,), math.pi),
        Gate("cz", (0, 1)), Gate("cz", (1, 2)), Gate("cz", (2, 3)),
    ]
    return Circuit(4, gates)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def weights(self, state) -> np.ndarray:
        """Spectral weights |<psi_k|phi>|^2 of a state vector."""
        amp = getattr(state, "amplitudes", state)
        return np.abs(self.eigenvectors.conj().T @ amp) ** 2


def exact_spectrum(a: PauliSum, max_qubits: int = MAX_DENSE_QUBITS,
                   herm_tol: float = 1e-12) -> SpectrumResult:
    if a.n_qubits > max_qubits:
        raise ResourceError(f"{a.n_qubits} qubits exceeds the dense cap of {max_qubits}")
    mat = a.to_matrix(max_qubits)
    if np.max(np.abs(mat - mat.conj().T), initial=0.0) > herm_tol:
        raise ContractError("operator is not Hermitian")
    w, v = np.linalg.eigh(mat)
    return SpectrumResult(w, v)
