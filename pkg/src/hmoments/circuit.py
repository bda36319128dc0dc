"""Gate records and circuits."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ContractError

ONE_QUBIT = {"ry", "rz", "h", "s", "sdg", "x"}
TWO_QUBIT = {"cz", "cx"}
PARAMETRIC = {"ry", "rz"}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        name = self.name.lower()
        object.__setattr__(self, "name", name)
        if name in ONE_QUBIT:
            arity = 1
        elif name in TWO_QUBIT:
            arity = 2
        else:
            raise ContractError(f"unknown gate {self.name!r}")
        if len(self.qubits) != arity:
            raise ContractError(f"{name} acts on {arity} qubit(s)")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ContractError("control and target must differ")
        if (name in PARAMETRIC) != (self.angle is not None):
            raise ContractError(f"angle mismatch for {name}")

    def matrix(self) -> np.ndarray:
        """2x2 matrix of a single-qubit gate."""
        n = self.name
        if n == "ry":
            c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
            return np.array([[c, -s], [s, c]], dtype=np.complex128)
        if n == "rz":
            e = np.exp(-0.5j * self.angle)
            return np.array([[e, 0], [0, e.conjugate()]], dtype=np.complex128)
        if n == "h":
            return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
        if n == "s":
            return np.array([[1, 0], [0, 1j]], dtype=np.complex128)
        if n == "sdg":
            return np.array([[1, 0], [0, -1j]], dtype=np.complex128)
        if n == "x":
            return np.array([[0, 1], [1, 0]], dtype=np.complex128)
        raise ContractError(f"{n} is not a single-qubit gate")

    def __str__(self):
        args = ",".join(map(str, self.qubits))
        if self.angle is None:
            return f"{self.name.upper()}({args})"
        return f"{self.name.upper()}({self.angle:.6g};{args})"


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ContractError(f"{g} addresses a qubit outside 0..{self.n_qubits - 1}")

    def then(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ContractError("qubit counts differ")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    # builder shorthands
    def add(self, name, *qubits, angle=None) -> "Circuit":
        return Circuit(self.n_qubits, self.gates + (Gate(name, tuple(qubits), angle),))

    def __str__(self):
        return " ".join(str(g) for g in self.gates) or "<empty>"
