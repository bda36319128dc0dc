"""Hamiltonian moments <H^n>, connected moments, and related utilities.

Three independent routes produce the same table: repeated application of the
dense Hamiltonian, contraction of symbolic powers against Pauli expectation
values, and central finite differences of exact time evolution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial
from typing import Mapping
import warnings

import numpy as np

from .errors import ContractError, CoverageError, InsufficientMomentsError, ResourceError
from .pauli import DROPOUT_TOL, PauliString, PauliSum, PauliTerm, pauli_mul, prune_relative, sum_mul
from .simulator import StateVector

MAX_ORDER = 40
WARN_ORDER = 20
PROVENANCES = ("exact", "pauli-measured", "cfd")


@dataclass(frozen=True)
class MomentTable:
    """m_0..m_N with m_n = <phi|H^n|phi>."""

    values: np.ndarray
    provenance: str = "exact"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.provenance not in PROVENANCES:
            raise ContractError(f"unknown provenance {self.provenance!r}")

    @property
    def max_order(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)

    def require(self, order: int) -> None:
        if order > self.max_order:
            raise InsufficientMomentsError(order, self.max_order)

    def truncated(self, order: int) -> "MomentTable":
        self.require(order)
        return MomentTable(self.values[:order + 1], self.provenance, dict(self.meta))

    def shifted(self, c: float) -> "MomentTable":
        """Moments of H + c I, by binomial expansion."""
        N = self.max_order
        out = [sum(comb(n, k) * c ** (n - k) * self.values[k] for k in range(n + 1))
               for n in range(N + 1)]
        return MomentTable(out, self.provenance, dict(self.meta))

    def to_csv(self, header: Mapping[str, object] | None = None) -> str:
        lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
        lines.append("order,value,provenance")
        lines += [f"{n},{v:.12g},{self.provenance}" for n, v in enumerate(self.values)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "MomentTable":
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows or rows[0].strip() != "order,value,provenance":
            raise ContractError("not a moment table CSV")
        vals, prov = {}, None
        for ln in rows[1:]:
            o, v, p = ln.split(",")
            vals[int(o)] = float(v)
            prov = p.strip()
        if sorted(vals) != list(range(len(vals))):
            raise ContractError("moment orders must be contiguous from 0")
        return cls([vals[k] for k in range(len(vals))], prov or "exact")


@dataclass(frozen=True)
class ConnectedMomentTable:
    """c_1..c_N; index with ``table[n]`` for n >= 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def max_order(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> float:
        if n < 1:
            raise IndexError("connected moments start at order 1")
        return float(self.values[n - 1])

    def require(self, order: int) -> None:
        if order > self.max_order:
            raise InsufficientMomentsError(order, self.max_order)


def _check_order(N: int) -> None:
    if N < 0:
        raise ContractError("moment order must be non-negative")
    if N > MAX_ORDER:
        raise ContractError(f"moment order capped at {MAX_ORDER}")
    if N > WARN_ORDER:
        warnings.warn(f"moments beyond order {WARN_ORDER} are poorly conditioned",
                      RuntimeWarning, stacklevel=3)


def moments_exact(state: StateVector, H: PauliSum, N: int, symmetric: bool = True) -> MomentTable:
    """Power iteration with the dense Hamiltonian.

    With ``symmetric`` (default) m_2k = <v_k|v_k> and m_2k+1 = <v_k|H|v_k>
    where v_k = H^k phi; otherwise m_n = <phi|H^n phi>.
    """
    _check_order(N)
    if H.n_qubits != state.n_qubits:
        raise ContractError("state and Hamiltonian disagree on qubit count")
    mat = H.to_matrix()
    phi = state.amplitudes
    if not symmetric:
        vals, v = [], phi
        for _ in range(N + 1):
            vals.append(np.vdot(phi, v).real)
            v = mat @ v
        return MomentTable(vals, "exact")
    vs = [phi]
    for _ in range(N // 2 + 1):
        vs.append(mat @ vs[-1])
    vals = []
    for n in range(N + 1):
        k = n // 2
        vals.append(np.vdot(vs[k], vs[k + (n % 2)]).real)
    return MomentTable(vals, "exact")


def power_expansions(H: PauliSum, N: int) -> list[PauliSum]:
    """[H^0, H^1, ..., H^N] as Pauli sums."""
    out = [PauliSum.identity(H.n_qubits)]
    for _ in range(N):
        out.append(prune_relative(sum_mul(out[-1], H)))
    return out


def _normalize_expectations(expectations: Mapping) -> dict[PauliString, float]:
    out = {}
    for k, v in expectations.items():
        out[PauliString.from_label(k) if isinstance(k, str) else k] = float(v)
    return out


def contract(op: PauliSum, expectations: Mapping[PauliString, float], eps: float = 1e-6) -> float:
    """sum_P c_P <P> (real part). Raises ``CoverageError`` on missing strings."""
    missing = [s.label for s in op.strings() if s not in expectations and not s.is_identity()]
    if missing:
        raise CoverageError(missing)
    total = 0j
    for s, c in op.items():
        v = 1.0 if s.is_identity() else expectations[s]
        if abs(v) > 1 + eps:
            raise ContractError(f"<{s.label}> = {v} lies outside [-1, 1]")
        total += c * v
    return total.real


def moments_from_expectations(H: PauliSum, N: int, expectations: Mapping,
                              powers: list[PauliSum] | None = None) -> MomentTable:
    """Expand H^n symbolically and contract against measured <P> values."""
    _check_order(N)
    exp = _normalize_expectations(expectations)
    powers = powers if powers is not None else power_expansions(H, N)
    missing = sorted({s.label for p in powers[:N + 1] for s in p.strings()
                      if s not in exp and not s.is_identity()})
    if missing:
        raise CoverageError(missing)
    return MomentTable([contract(p, exp) for p in powers[:N + 1]], "pauli-measured")


def generalized_moment(state: StateVector | None, H: PauliSum, O: PauliSum, m: int, n: int,
                       expectations: Mapping | None = None) -> float:
    """<phi|H^m O H^n|phi>, from the state or from measured expectations."""
    if m < 0 or n < 0:
        raise ContractError("powers must be non-negative")
    if expectations is not None:
        op = sum_mul(sum_mul(H ** m, O), H ** n)
        return contract(op, _normalize_expectations(expectations))
    if state is None:
        raise ContractError("need a state or expectation values")
    mat, omat = H.to_matrix(), O.to_matrix()
    left, right = state.amplitudes, state.amplitudes
    for _ in range(m):
        left = mat @ left
    for _ in range(n):
        right = mat @ right
    return np.vdot(left, omat @ right).real


def generalized_moment_matrix(H: PauliSum, O: PauliSum, order: int,
                              state: StateVector | None = None,
                              expectations: Mapping | None = None) -> np.ndarray:
    """G[a, b] = <H^a O H^b> for a, b = 0..order."""
    if expectations is not None:
        return _generalized_from_expectations(H, O, order, _normalize_expectations(expectations))
    if state is None:
        raise ContractError("need a state or expectation values")
    mat, omat = H.to_matrix(), O.to_matrix()
    vs = [state.amplitudes]
    for _ in range(order):
        vs.append(mat @ vs[-1])
    V = np.array(vs).T
    return (V.conj().T @ omat @ V).real


@dataclass(frozen=True)
class MultiplicationClosure:
    """Pauli strings closed under left and right products with the strings of H.

    ``left`` and ``right`` are the matrices of X -> H X and X -> X H acting on
    coefficient vectors over ``strings``.
    """

    strings: tuple[PauliString, ...]
    left: np.ndarray
    right: np.ndarray

    def vector(self, op: PauliSum) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.strings)}
        v = np.zeros(len(self.strings), dtype=complex)
        for s, c in op.items():
            v[index[s]] = c
        return v


def multiplication_closure(H: PauliSum, seed: PauliSum, max_size: int = 4096) -> MultiplicationClosure:
    index: dict[PauliString, int] = {}
    order: list[PauliString] = []

    def add(s):
        if s not in index:
            if len(order) >= max_size:
                raise ResourceError(f"operator closure exceeds {max_size} strings")
            index[s] = len(order)
            order.append(s)

    for s in seed.strings():
        add(s)
    hterms = [PauliTerm(s, c) for s, c in H.items()]
    left, right = [], []
    k = 0
    while k < len(order):
        x = PauliTerm(order[k])
        for h in hterms:
            lt, rt = pauli_mul(h, x), pauli_mul(x, h)
            add(lt.string)
            add(rt.string)
            left.append((index[lt.string], k, lt.coefficient))
            right.append((index[rt.string], k, rt.coefficient))
        k += 1
    d = len(order)
    Lm = np.zeros((d, d), dtype=complex)
    Rm = np.zeros((d, d), dtype=complex)
    for i, j, c in left:
        Lm[i, j] += c
    for i, j, c in right:
        Rm[i, j] += c
    return MultiplicationClosure(tuple(order), Lm, Rm)


def generalized_operator_vectors(H: PauliSum, O: PauliSum, order: int):
    """Coefficient vectors of H^a O H^b over a multiplication closure."""
    cl = multiplication_closure(H, O)
    V = np.empty((order + 1, order + 1, len(cl.strings)), dtype=complex)
    col = cl.vector(O)
    for b in range(order + 1):
        v = col
        for a in range(order + 1):
            V[a, b] = v
            v = cl.left @ v
        col = cl.right @ col
    return cl, V


def generalized_strings(H: PauliSum, O: PauliSum, order: int, tol: float = DROPOUT_TOL) -> list[PauliString]:
    """Strings with a nonzero coefficient in some H^a O H^b, a, b <= order."""
    cl, V = generalized_operator_vectors(H, O, order)
    used = _support(V, tol)
    return [s for s, u in zip(cl.strings, used) if u]


def _support(V: np.ndarray, tol: float) -> np.ndarray:
    """Strings carrying a coefficient above ``tol`` relative to each operator's scale."""
    A = np.abs(V).reshape(-1, V.shape[-1])
    scale = np.maximum(1.0, A.max(axis=1, keepdims=True))
    return (A > tol * scale).any(axis=0)


def _generalized_from_expectations(H, O, order, exp: dict) -> np.ndarray:
    cl, V = generalized_operator_vectors(H, O, order)
    used = _support(V, DROPOUT_TOL)
    missing = [s.label for s, u in zip(cl.strings, used)
               if u and not s.is_identity() and s not in exp]
    if missing:
        raise CoverageError(missing)
    e = np.array([1.0 if s.is_identity() else exp.get(s, 0.0) for s in cl.strings])
    return (V @ e).real


def connected_moments(m: MomentTable) -> ConnectedMomentTable:
    """c_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) c_k m_{n-k}."""
    N = m.max_order
    if N < 1:
        raise ContractError("need moments through order >= 1")
    c = [0.0] * (N + 1)
    for n in range(1, N + 1):
        c[n] = m[n] - sum(comb(n - 1, k - 1) * c[k] * m[n - k] for k in range(1, n))
    return ConnectedMomentTable(c[1:])


def cumulants_closed_form(m: MomentTable) -> tuple[float, float, float, float]:
    """c_1..c_4 from the explicit polynomial expressions."""
    m.require(4)
    m1, m2, m3, m4 = (float(m[k]) for k in range(1, 5))
    return (m1, m2 - m1 ** 2, m3 - 3 * m2 * m1 + 2 * m1 ** 3,
            m4 - 4 * m3 * m1 - 3 * m2 ** 2 + 12 * m2 * m1 ** 2 - 6 * m1 ** 4)


def moments_via_cfd(state: StateVector, H: PauliSum, n: int, dt: float) -> float:
    """<H^n> from the central difference i^n [U(dt/2) - U(-dt/2)]^n / dt^n.

    U(t) = exp(-iHt) is applied exactly through the spectral decomposition of
    the dense Hamiltonian. The difference U(dt/2) - U(-dt/2) is formed first and
    then applied n times; expanding the power binomially instead cancels about
    2^n-sized terms down to (H dt)^n and loses every digit by n = 6 at dt = 1e-3.
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    if dt <= 0:
        raise ContractError("dt must be positive")
    if H.n_qubits > 12:
        raise ResourceError("dense propagator too large")
    w, V = np.linalg.eigh(H.to_matrix())
    coeffs = V.conj().T @ state.amplitudes
    diff = np.exp(-0.5j * dt * w) - np.exp(0.5j * dt * w)
    acc = coeffs.copy()
    for _ in range(n):
        acc = diff * acc
    val = (1j ** n) * np.vdot(coeffs, acc) / dt ** n
    return float(val.real)


def chebyshev_coefficients(n: int) -> np.ndarray:
    """C[k] with x^n = sum_k C[k] T_k(x) on [-1, 1]."""
    if n < 0:
        raise ContractError("n must be >= 0")
    C = np.zeros(n + 1)
    for k in range(n + 1):
        if (n - k) % 2:
            continue
        if k == 0:
            C[0] = comb(n, n // 2) / 2 ** n
        else:
            C[k] = comb(n, (n - k) // 2) / 2 ** (n - 1)
    return C


def taylor_weights(tau: float, order: int, scale: float = 0.5) -> np.ndarray:
    """(-scale tau)^a / a! for a = 0..order."""
    return np.array([(-scale * tau) ** a / factorial(a) for a in range(order + 1)])
