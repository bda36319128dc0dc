"""Dense reference implementations used as test oracles.

Everything here is written directly with np.kron and matrix algebra and does
not import the package, so agreement with it is independent evidence.
Qubit 0 is the leftmost Kronecker factor (most significant index bit).
"""
from math import comb, factorial

import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
H1 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def kron_all(mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_matrix(label):
    return kron_all(PAULI[ch] for ch in label)


def embed(op, qubit, n):
    return kron_all(op if q == qubit else I2 for q in range(n))


def heisenberg_matrix(J, U, B, n=4, ring=False):
    bonds = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if ring and n > 2 else [])
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i, j in bonds:
        H += J * (embed(X, i, n) @ embed(X, j, n) + embed(Y, i, n) @ embed(Y, j, n))
        H += U * embed(Z, i, n) @ embed(Z, j, n)
    for i in range(n):
        H += B * embed(Z, i, n)
    return H


def magnetization_matrix(n=4):
    return sum(embed(Z, i, n) for i in range(n))


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cz(i, j, n):
    d = np.ones(2 ** n, dtype=complex)
    for b in range(2 ** n):
        if (b >> (n - 1 - i)) & 1 and (b >> (n - 1 - j)) & 1:
            d[b] = -1
    return np.diag(d)


def ansatz_state(theta0, theta1):
    n = 4
    psi = np.zeros(16, dtype=complex)
    psi[0b1100] = 1.0
    psi = kron_all([ry(theta0), I2, ry(theta1), ry(np.pi)]) @ psi
    for i, j in [(0, 1), (1, 2), (2, 3)]:
        psi = cz(i, j, n) @ psi
    return psi


def random_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def moments(H, psi, N):
    out, v = [], psi.copy()
    for _ in range(N + 1):
        out.append(np.vdot(psi, v).real)
        v = H @ v
    return np.array(out)


def krylov_ground(H, psi, r):
    """Lowest eigenvalue of H projected on span{H^k psi}, via orthonormal QR basis."""
    K = np.array([np.linalg.matrix_power(H, k) @ psi for k in range(r + 1)]).T
    Q, R = np.linalg.qr(K)
    keep = np.abs(np.diag(R)) > 1e-8 * np.abs(R[0, 0])
    Q = Q[:, keep]
    return np.linalg.eigvalsh(Q.conj().T @ H @ Q)


def lanczos_vectors(H, psi, depth):
    """Textbook three-term Lanczos on vectors; returns alpha, beta."""
    alpha, beta = [], []
    q_prev = np.zeros_like(psi)
    q = psi / np.linalg.norm(psi)
    b = 0.0
    for _ in range(depth):
        w = H @ q - b * q_prev
        a = np.vdot(q, w).real
        w = w - a * q
        b = np.linalg.norm(w)
        alpha.append(a)
        beta.append(b)
        if b < 1e-10:
            break
        q_prev, q = q, w / b
    return np.array(alpha), np.array(beta)


def taylor_ite_energy(H, psi, tau, order, scale=0.5):
    P = sum(np.linalg.matrix_power(-scale * tau * H, a) / factorial(a) for a in range(order + 1))
    v = P @ psi
    return (np.vdot(v, H @ v) / np.vdot(v, v)).real


def exact_ite_energy(H, psi, tau):
    v = scipy.linalg.expm(-0.5 * tau * H) @ psi
    return (np.vdot(v, H @ v) / np.vdot(v, v)).real


def cumulants_from_distribution(values, weights, N):
    """Cumulants from the cumulant generating function log E[exp(tX)] by power-series log."""
    mu = np.array([np.sum(weights * values ** n) for n in range(N + 1)])
    # series of M(t) = sum mu_n t^n / n!; log via K' = M'/M in coefficient form
    a = np.array([mu[n] / factorial(n) for n in range(N + 1)])
    k = np.zeros(N + 1)  # coefficients of log M
    for n in range(1, N + 1):
        k[n] = (n * a[n] - sum(j * k[j] * a[n - j] for j in range(1, n))) / n / a[0]
    return np.array([k[n] * factorial(n) for n in range(1, N + 1)])


def chebyshev_power_coefficients(n):
    """x^n = sum_k coef[k] T_k(x), via numpy's basis conversion."""
    e = np.zeros(n + 1)
    e[n] = 1.0
    return np.polynomial.chebyshev.poly2cheb(e)


def confusion_matrix(p01, p10):
    return kron_all(np.array([[1 - a, b], [a, 1 - b]]) for a, b in zip(p01, p10))


def binomial(n, k):
    return comb(n, k)
