"""Pauli strings and weighted Pauli sums.

A string on ``n`` qubits is stored as two bit masks. Bit ``q`` of ``x`` is set
when the factor on qubit ``q`` contains sigma_x, bit ``q`` of ``z`` when it
contains sigma_z, so I=(0,0), X=(1,0), Z=(0,1), Y=(1,1). Strings carry no
phase; ``Y`` is the Hermitian Pauli matrix and products pick up their phase in
the coefficient.

Text literals such as ``"XYZI"`` list one letter per qubit with qubit 0 the
leftmost symbol, the same reading order as kets like ``|1100>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import ContractError, DimensionError, ResourceError

MAX_QUBITS = 64
DROPOUT_TOL = 1e-12

_LETTERS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_FROM_BITS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_IPOW = (1, 1j, -1, -1j)


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ContractError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        full = (1 << self.n_qubits) - 1
        if self.x & ~full or self.z & ~full or self.x < 0 or self.z < 0:
            raise ContractError("mask has bits beyond n_qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        x = z = 0
        for q, ch in enumerate(label):
            try:
                bx, bz = _LETTERS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        bx, bz = _LETTERS[letter]
        return cls(n_qubits, bx << qubit, bz << qubit)

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n_qubits))

    def letter(self, qubit: int) -> str:
        return _FROM_BITS[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return self.support.bit_count()

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def is_diagonal(self) -> bool:
        return self.x == 0

    def to_matrix(self) -> np.ndarray:
        return PauliSum.from_string(self).to_matrix()

    def __str__(self):
        return self.label

    def __repr__(self):
        return f"PauliString({self.label!r})"


@dataclass(frozen=True)
class PauliTerm:
    string: PauliString
    coefficient: complex = 1.0

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0) -> "PauliTerm":
        return cls(PauliString.from_label(label), complex(coefficient))

    @property
    def n_qubits(self) -> int:
        return self.string.n_qubits

    def __mul__(self, other):
        if isinstance(other, PauliTerm):
            return pauli_mul(self, other)
        return PauliTerm(self.string, self.coefficient * other)

    def __repr__(self):
        return f"PauliTerm({self.string.label!r}, {self.coefficient!r})"


def _check_same(a: int, b: int):
    if a != b:
        raise DimensionError(f"qubit counts differ: {a} vs {b}")


def _phase_exponent(ax, az, bx, bz):
    x, z = ax ^ bx, az ^ bz
    return ((ax & az).bit_count() + (bx & bz).bit_count() - (x & z).bit_count()
            + 2 * (az & bx).bit_count()) % 4


def pauli_mul(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product of two Pauli terms; the phase in {1, i, -1, -i} goes into the coefficient."""
    _check_same(a.n_qubits, b.n_qubits)
    sa, sb = a.string, b.string
    k = _phase_exponent(sa.x, sa.z, sb.x, sb.z)
    s = PauliString(sa.n_qubits, sa.x ^ sb.x, sa.z ^ sb.z)
    return PauliTerm(s, complex(a.coefficient) * complex(b.coefficient) * _IPOW[k])


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    """True when on every qubit the factors are equal or one of them is I."""
    _check_same(a.n_qubits, b.n_qubits)
    both = a.support & b.support
    return ((a.x ^ b.x) | (a.z ^ b.z)) & both == 0


def commutes(a: PauliString, b: PauliString) -> bool:
    _check_same(a.n_qubits, b.n_qubits)
    return ((a.x & b.z) ^ (a.z & b.x)).bit_count() % 2 == 0


class PauliSum:
    """Linear combination of Pauli strings with complex coefficients.

    Instances are treated as immutable. Coefficients smaller than ``tol`` in
    magnitude are dropped on construction.
    """

    __slots__ = ("n_qubits", "tol", "_terms")

    def __init__(self, n_qubits: int, terms: Mapping[PauliString, complex] | None = None,
                 tol: float = DROPOUT_TOL):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise ContractError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        self.n_qubits = n_qubits
        self.tol = tol
        merged: dict[PauliString, complex] = {}
        for s, c in (terms or {}).items():
            _check_same(n_qubits, s.n_qubits)
            c = complex(c)
            if not np.isfinite(c):
                raise ContractError(f"non-finite coefficient for {s.label}")
            merged[s] = merged.get(s, 0) + c
        self._terms = {s: c for s, c in sorted(merged.items()) if abs(c) > tol}

    # construction helpers
    @classmethod
    def from_terms(cls, terms: Iterable[PauliTerm], n_qubits: int | None = None,
                   tol: float = DROPOUT_TOL) -> "PauliSum":
        terms = list(terms)
        if n_qubits is None:
            if not terms:
                raise ContractError("n_qubits required for an empty sum")
            n_qubits = terms[0].n_qubits
        acc: dict[PauliString, complex] = {}
        for t in terms:
            _check_same(n_qubits, t.n_qubits)
            acc[t.string] = acc.get(t.string, 0) + complex(t.coefficient)
        return cls(n_qubits, acc, tol)

    @classmethod
    def from_labels(cls, labels: Mapping[str, complex], tol: float = DROPOUT_TOL) -> "PauliSum":
        terms = [PauliTerm.from_label(k, v) for k, v in labels.items()]
        return cls.from_terms(terms, tol=tol)

    @classmethod
    def from_string(cls, s: PauliString, coefficient: complex = 1.0) -> "PauliSum":
        return cls(s.n_qubits, {s: coefficient})

    @classmethod
    def identity(cls, n_qubits: int, coefficient: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {PauliString.identity(n_qubits): coefficient})

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits, {})

    # mapping-like access
    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def strings(self) -> list[PauliString]:
        return list(self._terms)

    def coefficient(self, s: PauliString | str) -> complex:
        if isinstance(s, str):
            s = PauliString.from_label(s)
        return self._terms.get(s, 0j)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return (PauliTerm(s, c) for s, c in self._terms.items())

    def __contains__(self, s):
        return s in self._terms

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def real(self) -> "PauliSum":
        """Drop imaginary parts (use after checking ``is_hermitian``)."""
        return PauliSum(self.n_qubits, {s: c.real for s, c in self._terms.items()}, self.tol)

    def arrays(self):
        """(x masks, z masks, coefficients) as numpy arrays in canonical order."""
        x = np.fromiter((s.x for s in self._terms), dtype=np.uint64, count=len(self))
        z = np.fromiter((s.z for s in self._terms), dtype=np.uint64, count=len(self))
        c = np.fromiter(self._terms.values(), dtype=np.complex128, count=len(self))
        return x, z, c

    # algebra
    def __add__(self, other):
        if not isinstance(other, PauliSum):
            other = PauliSum.identity(self.n_qubits, other)
        _check_same(self.n_qubits, other.n_qubits)
        acc = dict(self._terms)
        for s, c in other._terms.items():
            acc[s] = acc.get(s, 0) + c
        return PauliSum(self.n_qubits, acc, min(self.tol, other.tol))

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return sum_mul(self, other)
        return PauliSum(self.n_qubits, {s: c * other for s, c in self._terms.items()}, self.tol)

    def __rmul__(self, other):
        return self * other

    def __pow__(self, n: int):
        return sum_power(self, n)

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return sum_mul(self, other) - sum_mul(other, self)

    def allclose(self, other: "PauliSum", atol: float = 1e-10) -> bool:
        _check_same(self.n_qubits, other.n_qubits)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coefficient(k) - other.coefficient(k)) <= atol for k in keys)

    def to_matrix(self, max_qubits: int = 12) -> np.ndarray:
        """Dense 2^n x 2^n matrix (qubit 0 is the most significant index bit)."""
        n = self.n_qubits
        if n > max_qubits:
            raise ResourceError(f"dense matrix for {n} qubits exceeds cap of {max_qubits}")
        dim = 1 << n
        idx = np.arange(dim, dtype=np.int64)
        out = np.zeros((dim, dim), dtype=np.complex128)
        for s, c in self._terms.items():
            xi, zi = index_masks(s)
            sign = 1 - 2 * (np.bitwise_count(idx & zi).astype(np.int64) & 1)
            phase = _IPOW[(s.x & s.z).bit_count() % 4]
            # P|b> = phase * (-1)^{|z&b|} |b ^ x>
            out[idx ^ xi, idx] += c * phase * sign
        return out

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self._terms == other._terms

    def __hash__(self):
        return hash((self.n_qubits, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return f"PauliSum({self.n_qubits}, 0)"
        parts = [f"{_fmt(c)}*{s.label}" for s, c in self._terms.items()]
        return "PauliSum(" + " + ".join(parts) + ")"


def _fmt(c: complex) -> str:
    if abs(c.imag) < 1e-15:
        return f"{c.real:g}"
    return f"({c.real:g}{c.imag:+g}j)"


def index_masks(s: PauliString) -> tuple[int, int]:
    """Masks in statevector-index bit order (qubit q is index bit n-1-q)."""
    n = s.n_qubits
    xi = zi = 0
    for q in range(n):
        if (s.x >> q) & 1:
            xi |= 1 << (n - 1 - q)
        if (s.z >> q) & 1:
            zi |= 1 << (n - 1 - q)
    return xi, zi


def sum_mul(a: PauliSum, b: PauliSum) -> PauliSum:
    """Distribute the product, merge equal strings, drop tiny coefficients."""
    _check_same(a.n_qubits, b.n_qubits)
    tol = min(a.tol, b.tol)
    if not len(a) or not len(b):
        return PauliSum(a.n_qubits, {}, tol)
    x, z, c = _kernels.pauli_products(*a.arrays(), *b.arrays())
    keys, inverse = np.unique(np.stack([x, z], axis=1), axis=0, return_inverse=True)
    inverse = inverse.ravel()
    re = np.bincount(inverse, weights=c.real, minlength=len(keys))
    im = np.bincount(inverse, weights=c.imag, minlength=len(keys))
    n = a.n_qubits
    terms = {PauliString(n, int(kx), int(kz)): complex(r, i)
             for (kx, kz), r, i in zip(keys, re, im)}
    return PauliSum(n, terms, tol)


def prune_relative(op: PauliSum, rel_tol: float = DROPOUT_TOL) -> PauliSum:
    """Drop coefficients below ``rel_tol`` times the largest one.

    High powers of a Hamiltonian carry large coefficients, so round-off leaves
    residues far above any absolute threshold on strings whose exact
    coefficient is zero.
    """
    if not len(op):
        return op
    scale = max(abs(c) for _, c in op.items())
    cut = rel_tol * max(1.0, scale)
    return PauliSum(op.n_qubits, {s: c for s, c in op.items() if abs(c) > cut}, op.tol)


def sum_power(a: PauliSum, n: int) -> PauliSum:
    if n < 0:
        raise ContractError("power must be non-negative")
    out = PauliSum.identity(a.n_qubits)
    for _ in range(n):
        out = sum_mul(out, a)
    return out


@dataclass(frozen=True)
class Closure:
    strings: frozenset
    closed: bool
    power: int
    counts: tuple

    def __len__(self):
        return len(self.strings)

    def labels(self) -> list[str]:
        return sorted(s.label for s in self.strings)


def basis_closure(a: PauliSum, max_power: int = 32) -> Closure:
    """Strings appearing in a, a^2, ..., stopping once the set stops growing.

    ``power`` is the highest power that was expanded; ``counts`` records the
    size of the running union after each power.
    """
    if max_power < 1:
        raise ContractError("max_power must be >= 1")
    seen = set(a.strings())
    counts = [len(seen)]
    cur = a
    for k in range(2, max_power + 1):
        cur = prune_relative(sum_mul(cur, a))
        new = seen | set(cur.strings())
        counts.append(len(new))
        if new == seen:
            return Closure(frozenset(seen), True, k, tuple(counts))
        seen = new
    return Closure(frozenset(seen), False, max_power, tuple(counts))
