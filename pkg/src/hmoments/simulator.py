"""Dense statevector engine with shot sampling, readout noise and calibration.

Amplitude index convention: qubit 0 is the most significant bit of the basis
index, so ``StateVector.from_label("1100")`` is index ``0b1100 = 12``.
Computational-basis Z eigenvalues are +1 for |0> and -1 for |1>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .circuit import Circuit
from .errors import CalibrationError, ContractError, DimensionError
from .pauli import PauliString, PauliSum, index_masks, qubitwise_commutes

NORM_TOL = 1e-10
DEFAULT_SHOTS = 8192
DEFAULT_COND_CAP = 1e6


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128)
        if amp.shape != (1 << self.n_qubits,):
            raise DimensionError(f"expected {1 << self.n_qubits} amplitudes, got {amp.shape}")
        if abs(np.linalg.norm(amp) - 1.0) > NORM_TOL:
            raise ContractError(f"state norm {np.linalg.norm(amp):.12g} differs from 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amp = np.zeros(1 << n_qubits, dtype=np.complex128)
        amp[0] = 1.0
        return cls(n_qubits, amp)

    @classmethod
    def from_label(cls, bits: str) -> "StateVector":
        bits = bits.strip().strip("|>")
        amp = np.zeros(1 << len(bits), dtype=np.complex128)
        amp[int(bits, 2)] = 1.0
        return cls(len(bits), amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(n_qubits, v / np.linalg.norm(v))


def random_product_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    amp = np.array([1.0 + 0j])
    for _ in range(n_qubits):
        q = rng.normal(size=2) + 1j * rng.normal(size=2)
        amp = np.kron(amp, q / np.linalg.norm(q))
    return StateVector(n_qubits, amp)


def _apply_gate(amp: np.ndarray, gate, n: int) -> np.ndarray:
    if gate.name in ("cz", "cx"):
        c, t = gate.qubits
        cb, tb = n - 1 - c, n - 1 - t
        idx = np.arange(amp.shape[0])
        ctrl = (idx >> cb) & 1 == 1
        if gate.name == "cz":
            out = amp.copy()
            out[ctrl & ((idx >> tb) & 1 == 1)] *= -1
            return out
        src = np.where(ctrl, idx ^ (1 << tb), idx)
        return amp[src]
    return _kernels.apply_1q(amp, gate.matrix(), n - 1 - gate.qubits[0])


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if state.n_qubits != circuit.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, circuit {circuit.n_qubits}")
    amp = state.amplitudes
    for g in circuit:
        amp = _apply_gate(amp, g, state.n_qubits)
    return StateVector(state.n_qubits, amp)


def prepare(circuit: Circuit) -> StateVector:
    """Run ``circuit`` on |0...0>."""
    return apply_circuit(StateVector.zero(circuit.n_qubits), circuit)


def apply_pauli(state: StateVector, s: PauliString) -> StateVector:
    if s.n_qubits != state.n_qubits:
        raise DimensionError("qubit counts differ")
    xi, zi = index_masks(s)
    idx = np.arange(state.amplitudes.shape[0], dtype=np.int64)
    sign = 1 - 2 * (np.bitwise_count(idx & zi).astype(np.int64) & 1)
    phase = (1, 1j, -1, -1j)[(s.x & s.z).bit_count() % 4]
    out = np.empty_like(state.amplitudes)
    out[idx ^ xi] = phase * sign * state.amplitudes
    return StateVector(state.n_qubits, out)


def pauli_expectations(state: StateVector, strings: Iterable[PauliString]) -> dict[PauliString, float]:
    """Exact <P> for each string (real because every Pauli string is Hermitian)."""
    strings = list(strings)
    masks = [index_masks(s) for s in strings]
    xs = np.array([m[0] for m in masks], dtype=np.uint64)
    zs = np.array([m[1] for m in masks], dtype=np.uint64)
    vals = _kernels.pauli_expectations(state.amplitudes, xs, zs)
    return {s: float(v.real) for s, v in zip(strings, vals)}


def expectation(state: StateVector, a: PauliSum | PauliString, imag_tol: float = 1e-10) -> float:
    """<phi|A|phi> for a Hermitian Pauli sum or a single Pauli string."""
    if isinstance(a, PauliString):
        a = PauliSum.from_string(a)
    if a.n_qubits != state.n_qubits:
        raise DimensionError("qubit counts differ")
    if not a.is_hermitian():
        raise ContractError("expectation requires a Hermitian operator")
    strings = a.strings()
    masks = [index_masks(s) for s in strings]
    xs = np.array([m[0] for m in masks], dtype=np.uint64)
    zs = np.array([m[1] for m in masks], dtype=np.uint64)
    vals = _kernels.pauli_expectations(state.amplitudes, xs, zs)
    coeffs = np.array([a.coefficient(s) for s in strings])
    total = complex(np.sum(coeffs * vals))
    if abs(total.imag) > imag_tol:
        raise ContractError(f"expectation has imaginary part {total.imag:.3e}")
    return total.real


def check_qwc(group: Iterable[PauliString]) -> None:
    group = list(group)
    for a, b in combinations(group, 2):
        if not qubitwise_commutes(a, b):
            raise ContractError(f"{a.label} and {b.label} do not commute qubitwise")


def measurement_rotation(group: Iterable[PauliString]) -> Circuit:
    """Single-qubit Clifford layer that diagonalizes every member of a QWC group.

    X is measured after H, Y after Sdg then H, Z and I need nothing.
    """
    group = list(group)
    if not group:
        raise ContractError("empty group")
    n = group[0].n_qubits
    check_qwc(group)
    circ = Circuit(n)
    for q in range(n):
        letters = {s.letter(q) for s in group} - {"I"}
        letter = letters.pop() if letters else "I"
        if letter == "X":
            circ = circ.add("h", q)
        elif letter == "Y":
            circ = circ.add("sdg", q).add("h", q)
    return circ


@dataclass(frozen=True)
class ReadoutNoiseModel:
    """Independent asymmetric bit flips: p01 = P(read 1 | true 0), p10 = P(read 0 | true 1)."""

    p01: tuple[float, ...]
    p10: tuple[float, ...]

    def __post_init__(self):
        p01, p10 = tuple(map(float, self.p01)), tuple(map(float, self.p10))
        if len(p01) != len(p10):
            raise ContractError("p01 and p10 must have one entry per qubit")
        if not all(0.0 <= p <= 1.0 for p in p01 + p10):
            raise ContractError("flip probabilities must lie in [0, 1]")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @classmethod
    def uniform(cls, n_qubits: int, p01: float, p10: float | None = None) -> "ReadoutNoiseModel":
        p10 = p01 if p10 is None else p10
        return cls((p01,) * n_qubits, (p10,) * n_qubits)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    def is_trivial(self) -> bool:
        return not any(self.p01) and not any(self.p10)

    def qubit_matrix(self, q: int) -> np.ndarray:
        a, b = self.p01[q], self.p10[q]
        return np.array([[1 - a, b], [a, 1 - b]])


@dataclass(frozen=True)
class CountsVector:
    counts: np.ndarray
    total_shots: int
    seed: int | None = None
    unclipped: np.ndarray | None = None

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total_shots

    def to_csv(self) -> str:
        lines = ["index,count"]
        lines += [f"{i},{c:.12g}" for i, c in enumerate(self.counts)]
        return "\n".join(lines) + "\n"


def sample_counts(state: StateVector, rotation: Circuit | None, shots: int,
                  noise: ReadoutNoiseModel | None = None, seed: int = 0) -> CountsVector:
    """Draw computational-basis outcomes of the rotated state by CDF inversion."""
    if shots < 1:
        raise ContractError("shots must be >= 1")
    if rotation is not None and len(rotation):
        state = apply_circuit(state, rotation)
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(state.probabilities())
    cdf /= cdf[-1]
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    outcomes = np.minimum(outcomes, cdf.shape[0] - 1).astype(np.int64)
    if noise is not None and not noise.is_trivial():
        if noise.n_qubits != state.n_qubits:
            raise DimensionError("noise model and state disagree on qubit count")
        u = rng.random((shots, state.n_qubits))
        outcomes = _kernels.readout_flips(outcomes, u, noise.p01, noise.p10, state.n_qubits)
    counts = np.bincount(outcomes, minlength=1 << state.n_qubits).astype(np.float64)
    return CountsVector(counts, shots, seed)


def expectations_from_counts(counts: CountsVector, group: Iterable[PauliString]) -> dict[PauliString, float]:
    """Parity-weighted outcome averages, one per group member."""
    idx = np.arange(counts.counts.shape[0], dtype=np.int64)
    out = {}
    for s in group:
        xi, zi = index_masks(s)
        parity = np.bitwise_count(idx & (xi | zi)).astype(np.int64) & 1
        out[s] = float(np.dot(1 - 2 * parity, counts.counts) / counts.total_shots)
    return out


def hadamard_test(prep: Circuit | StateVector, p: PauliString, shots: int = 0,
                  seed: int = 0) -> float:
    """Estimate Re<phi|P|phi> from an ancilla interferometer.

    The ancilla is put in |+>, controls P on the register and is rotated back
    by H, leaving amplitudes (phi + P phi)/2 on ancilla 0 and (phi - P phi)/2
    on ancilla 1. ``shots=0`` returns the analytic value 2 p(0) - 1.
    """
    phi = prepare(prep) if isinstance(prep, Circuit) else prep
    branch0 = 0.5 * (phi.amplitudes + apply_pauli(phi, p).amplitudes)
    p0 = float(np.vdot(branch0, branch0).real)
    p0 = min(max(p0, 0.0), 1.0)
    if shots == 0:
        return 2 * p0 - 1
    if shots < 0:
        raise ContractError("shots must be >= 0")
    k = np.random.default_rng(seed).binomial(shots, p0)
    return 2 * k / shots - 1


@dataclass(frozen=True)
class CalibrationMatrix:
    """Column j is the observed outcome distribution for prepared basis state j."""

    matrix: np.ndarray
    shots_per_basis: int | None = None
    seed: int | None = None

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.matrix.shape[0]))

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def apply(self, probs: np.ndarray) -> np.ndarray:
        return self.matrix @ probs


def build_calibration(noise: ReadoutNoiseModel, n_qubits: int,
                      shots_per_basis: int | None = None, seed: int = 0) -> CalibrationMatrix:
    """Analytic (``shots_per_basis=None``) or sampled confusion matrix."""
    if noise.n_qubits != n_qubits:
        raise DimensionError("noise model and qubit count disagree")
    if shots_per_basis is None:
        mat = np.array([[1.0]])
        for q in range(n_qubits):
            mat = np.kron(mat, noise.qubit_matrix(q))
        return CalibrationMatrix(mat)
    if shots_per_basis < 1:
        raise ContractError("shots_per_basis must be >= 1")
    dim = 1 << n_qubits
    rng = np.random.default_rng(seed)
    mat = np.empty((dim, dim))
    for j in range(dim):
        u = rng.random((shots_per_basis, n_qubits))
        out = _kernels.readout_flips(np.full(shots_per_basis, j, dtype=np.int64), u,
                                     noise.p01, noise.p10, n_qubits)
        mat[:, j] = np.bincount(out, minlength=dim) / shots_per_basis
    return CalibrationMatrix(mat, shots_per_basis, seed)


def calibrate_counts(cal: CalibrationMatrix, noisy: CountsVector,
                     cond_cap: float = DEFAULT_COND_CAP) -> CountsVector:
    """Invert the confusion matrix, clip negative counts and restore the total."""
    cond = cal.condition_number()
    if not np.isfinite(cond) or cond > cond_cap:
        raise CalibrationError("calibration matrix is singular or ill-conditioned", cond)
    raw = np.linalg.solve(cal.matrix, noisy.counts)
    clipped = np.clip(raw, 0.0, None)
    s = clipped.sum()
    if s > 0:
        clipped *= noisy.total_shots / s
    return CountsVector(clipped, noisy.total_shots, noisy.seed, unclipped=raw)
