"""Energy and observable estimators built from moment tables."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Mapping
import warnings

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import (CMXSingularityError, ContractError, DegenerateSubspaceError,
                     EstimatorDomainError, ITENormalizationError, PDSDegeneracyError)
from .moments import ConnectedMomentTable, MomentTable, connected_moments, taylor_weights

DROP_TOL = 1e-10
DENOM_TOL = 1e-12
ZERO_VARIANCE = 1e-12
GOLDEN = (sqrt(5) - 1) / 2


@dataclass
class EstimatorResult:
    method: str
    energy: float
    aux: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def row(self) -> dict:
        diag = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.diagnostics.items()))
        params = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return {"method": self.method, "params": params, "estimate": f"{self.energy:.12g}",
                "diagnostics": diag}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + " ".join(_fmt(x) for x in v) + "]"
    return str(v)


# Krylov / Lanczos

@dataclass(frozen=True)
class KrylovMatrices:
    L: np.ndarray
    R: np.ndarray


def krylov_matrices(m: MomentTable, r: int) -> KrylovMatrices:
    """Hankel overlap L_ij = m_{i+j} and Hamiltonian R_ij = m_{i+j+1}, i, j = 0..r."""
    m.require(2 * r + 1)
    i = np.arange(r + 1)
    idx = i[:, None] + i[None, :]
    return KrylovMatrices(m.values[idx], m.values[idx + 1])


def canonical_orthogonalizer(L: np.ndarray, drop_tol: float = DROP_TOL):
    """U = V s^{-1/2} over eigenpairs of L with s_k >= drop_tol * s_max."""
    s, V = np.linalg.eigh(L)
    smax = s.max(initial=0.0)
    keep = s >= drop_tol * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    if not keep.any():
        raise DegenerateSubspaceError("every overlap eigenvalue was dropped")
    return V[:, keep] / np.sqrt(s[keep]), s, keep


def krylov_generalized_eig(m: MomentTable, r: int, drop_tol: float = DROP_TOL) -> EstimatorResult:
    """Solve R v = E L v in the canonically orthogonalized Krylov basis."""
    km = krylov_matrices(m, r)
    U, s, keep = canonical_orthogonalizer(km.L, drop_tol)
    A = U.T @ km.R @ U
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return EstimatorResult(
        "krylov", float(w[0]),
        aux={"spectrum": w},
        diagnostics={"overlap_condition": float(s.max() / s.min()) if s.min() > 0 else float("inf"),
                     "kept": int(keep.sum()), "dropped": int((~keep).sum()),
                     "drop_tol": drop_tol},
        params={"r": r},
    )


def lanczos_coefficients(m: MomentTable, depth: int, tol: float = 1e-10):
    """Lanczos (alpha_1..alpha_k, beta_1..beta_k) from moments.

    The Krylov overlap matrix is Cholesky-factored one pivot at a time,
    L = G G^T. Its pivots give beta_j = G_jj / G_{j-1,j-1} and the diagonal
    of G^{-1} R G^{-T} gives alpha. A vanishing pivot means the Krylov space
    closed; the recursion stops there and the last beta is reported as 0.
    """
    if depth < 1:
        raise ContractError("depth must be >= 1")
    m.require(2 * depth)
    n = depth + 1
    i = np.arange(n)
    L = m.values[i[:, None] + i[None, :]]
    G = np.zeros((n, n))
    size = n
    for j in range(n):
        piv = L[j, j] - G[j, :j] @ G[j, :j]
        if piv <= tol * max(1.0, abs(L[j, j])):
            size = j
            break
        G[j, j] = sqrt(piv)
        for k in range(j + 1, n):
            G[k, j] = (L[k, j] - G[k, :j] @ G[j, :j]) / G[j, j]
    k = min(size, depth)
    Gk = G[:k, :k]
    ik = np.arange(k)
    Rk = m.values[ik[:, None] + ik[None, :] + 1]
    T = scipy.linalg.solve_triangular(Gk, scipy.linalg.solve_triangular(Gk, Rk, lower=True).T,
                                      lower=True)
    alpha = np.diag(T).copy()
    beta = [G[j, j] / G[j - 1, j - 1] for j in range(1, k + 1) if j < size]
    if size <= depth:
        beta.append(0.0)
    return alpha, np.array(beta[:depth])


def tridiagonal(alpha, beta) -> np.ndarray:
    k = len(alpha)
    off = np.asarray(beta[:k - 1], dtype=float)
    return np.diag(alpha) + np.diag(off, 1) + np.diag(off, -1)


def lanczos_energy(m: MomentTable, depth: int) -> EstimatorResult:
    alpha, beta = lanczos_coefficients(m, depth)
    w = np.linalg.eigvalsh(tridiagonal(alpha, beta))
    return EstimatorResult("lanczos", float(w[0]), aux={"alpha": alpha, "beta": beta, "spectrum": w},
                           diagnostics=lanczos_closed_forms(m), params={"depth": depth})


def lanczos_closed_forms(m: MomentTable) -> dict:
    """alpha_1, beta_1, alpha_2 and the squared beta_2 written in raw moments.

    The fourth-order expression
    (m4 - (a1 + a2)^2 b1^2 - (a1^2 + b1^2)^2) / b1^2
    equals beta_2 squared, not beta_2.
    """
    if m.max_order < 2:
        return {}
    m1, m2 = float(m[1]), float(m[2])
    var = m2 - m1 ** 2
    out = {"alpha1": m1, "beta1": sqrt(max(var, 0.0))}
    if var <= ZERO_VARIANCE or m.max_order < 4:
        return out
    m3, m4 = float(m[3]), float(m[4])
    a2 = (m3 - 2 * m2 * m1 + m1 ** 3) / var
    out["alpha2"] = a2
    out["beta2_squared"] = (m4 - (m1 + a2) ** 2 * var - (m1 ** 2 + var) ** 2) / var
    return out


# connected-moment estimators

def _as_connected(c) -> ConnectedMomentTable:
    return connected_moments(c) if isinstance(c, MomentTable) else c


def infimum_estimate(c: ConnectedMomentTable | MomentTable, z_max: float | None = None) -> EstimatorResult:
    """First-order infimum of alpha(z) - 2 beta(z) over z > 0.

    Returns the closed form and, as a diagnostic, a numerical minimization of
    c1 + z c3/c2 - 2 sqrt(z c2 + z^2 (c2 c4 - c3^2) / (2 c2^2)).
    """
    c = _as_connected(c)
    c.require(4)
    c1, c2, c3, c4 = (c[k] for k in range(1, 5))
    if c2 < ZERO_VARIANCE:
        return EstimatorResult("infimum", c1, diagnostics={"eigenstate": True})
    rad = 3 * c3 ** 2 - 2 * c2 * c4
    if rad < 0:
        raise EstimatorDomainError(f"negative radicand 3c3^2 - 2c2c4 = {rad:.3e}")
    den = c3 ** 2 - c2 * c4
    if den == 0:
        raise EstimatorDomainError("c3^2 = c2 c4; first-order infimum undefined")
    closed = c1 - c2 ** 2 / den * (sqrt(rad) - c3)
    z_opt, numeric = _infimum_numeric(c1, c2, c3, c4, z_max)
    return EstimatorResult(
        "infimum", closed,
        aux={"z_opt": z_opt, "numeric": numeric},
        diagnostics={"radicand": rad, "numeric_gap": abs(numeric - closed)},
    )


def _infimum_numeric(c1, c2, c3, c4, z_max=None):
    a = c3 / c2
    e = (c2 * c4 - c3 ** 2) / (2 * c2 ** 2)

    def f(z):
        b2 = c2 * z + e * z * z
        return c1 + a * z - 2 * sqrt(max(b2, 0.0))

    if z_max is None:
        z_max = -c2 / e if e < 0 else 1e3 * (1 + abs(c2 / a) if a else 1e3)
    grid = np.concatenate([np.geomspace(z_max * 1e-9, z_max, 2000), np.linspace(0, z_max, 2001)[1:]])
    grid.sort()
    vals = np.array([f(z) for z in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14 * max(1, hi)})
    best = min((res.fun, res.x), (vals[k], grid[k]))
    return float(best[1]), float(best[0])


def _cmx_matrix(c: ConnectedMomentTable, n: int) -> float:
    A = np.array([[c[i + j + 3] for j in range(n - 1)] for i in range(n - 1)])
    b = np.array([c[i + 2] for i in range(n - 1)])
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e14:
        raise CMXSingularityError(f"CMX({n}) system is singular (condition {cond:.3e})")
    return float(c[1] - b @ np.linalg.solve(A, b))


def _cmx_recursion(c: ConnectedMomentTable, n: int) -> float:
    """Nested-fraction CMX with Hankel-determinant S_{k,i}.

    S_{k,1} = c_k and S_{k,i+1} = (S_{k,i} S_{k+2,i} - S_{k+1,i}^2) / S_{k+2,i-1}
    with S_{k,0} = 1, so that S_{k,i} is the i x i Hankel determinant of
    c_k, c_{k+1}, ... The energy is
    c1 - S21^2/S31 (1 + S22^2 S30/(S21^2 S32) (1 + ... (1 + S2,n-1^2 S3,n-3 / (S2,n-2^2 S3,n-1)))).
    """
    S = {}
    for k in range(2, 2 * n + 1):
        S[k, 0] = 1.0
        if k <= c.max_order:
            S[k, 1] = c[k]
    for i in range(1, n - 1):
        for k in range(2, 2 * n):
            need = ((k, i), (k + 2, i), (k + 1, i), (k + 2, i - 1))
            if all(key in S for key in need):
                d = S[k + 2, i - 1]
                if d == 0:
                    raise CMXSingularityError(f"S[{k + 2},{i - 1}] vanished")
                S[k, i + 1] = (S[k, i] * S[k + 2, i] - S[k + 1, i] ** 2) / d
    inner = 1.0
    for i in range(n - 1, 1, -1):
        den = S[2, i - 1] ** 2 * S[3, i]
        if den == 0:
            raise CMXSingularityError(f"vanishing denominator at level {i}")
        inner = 1 + S[2, i] ** 2 * S[3, i - 2] / den * inner
    if S[3, 1] == 0:
        raise CMXSingularityError("c3 vanished")
    return float(c[1] - S[2, 1] ** 2 / S[3, 1] * inner)


def cmx_energy(c: ConnectedMomentTable | MomentTable, n: int, agree_tol: float = 1e-8) -> EstimatorResult:
    """CMX(n) from connected moments c_1..c_{2n-1}; matrix form, recursion as a check."""
    c = _as_connected(c)
    if n < 1:
        raise ContractError("CMX order must be >= 1")
    c.require(max(2 * n - 1, 1))
    if n == 1 or c[2] < ZERO_VARIANCE:
        return EstimatorResult("cmx", c[1], diagnostics={"eigenstate": n > 1}, params={"order": n})
    mat = _cmx_matrix(c, n)
    rec = _cmx_recursion(c, n)
    gap = abs(mat - rec)
    scale = max(1.0, abs(mat))
    return EstimatorResult("cmx", mat, aux={"recursion": rec},
                           diagnostics={"form_gap": gap, "forms_agree": gap <= agree_tol * scale},
                           params={"order": n})


# PDS

def pds_energy(m: MomentTable, K: int, ridge: float = 1e-12, sing_tol: float = 1e-12,
               fail_tol: float = 1e-15) -> EstimatorResult:
    """PDS(K): roots of a^K + sum_i X_i a^{K-i} with M X = -Y.

    M_ij = m_{2K-i-j} and Y_i = m_{2K-i} for i, j = 1..K. The solve uses a
    column-pivoted QR; a nearly singular M gets a ridge of ``ridge * trace``,
    a numerically singular one (reciprocal condition below ``fail_tol``)
    means the state spans fewer than K eigenvectors.
    """
    if K < 1:
        raise ContractError("K must be >= 1")
    m.require(2 * K - 1)
    i = np.arange(1, K + 1)
    M = m.values[2 * K - i[:, None] - i[None, :]]
    Y = m.values[2 * K - i]
    Q, Rm, piv = scipy.linalg.qr(M, pivoting=True)
    d = np.abs(np.diag(Rm))
    rcond = d.min() / d.max() if d.max() > 0 else 0.0
    diagnostics = {"rcond": float(rcond), "regularized": False}
    if rcond < fail_tol:
        raise PDSDegeneracyError(f"PDS({K}) Hankel system is singular (rcond {rcond:.2e}); lower K")
    if rcond < sing_tol:
        M = M + ridge * np.trace(M) * np.eye(K)
        Q, Rm, piv = scipy.linalg.qr(M, pivoting=True)
        diagnostics["regularized"] = True
    z = scipy.linalg.solve_triangular(Rm, Q.T @ (-Y))
    X = np.empty(K)
    X[piv] = z
    roots = companion_roots(np.concatenate([[1.0], X]))
    scale = sqrt(max(float(m[2]), 0.0)) if m.max_order >= 2 else max(1.0, abs(float(m[1])))
    im_tol = 1e-8 * max(scale, 1e-300)
    real = np.sort(roots[np.abs(roots.imag) <= im_tol].real)
    cplx = roots[np.abs(roots.imag) > im_tol]
    if cplx.size:
        warnings.warn(f"PDS({K}) produced {cplx.size} complex roots; moments may be noisy",
                      RuntimeWarning, stacklevel=2)
        diagnostics["complex_roots"] = int(cplx.size)
    if real.size:
        ground = float(real[0])
    else:
        ground = float(np.sort(cplx.real)[0])
    return EstimatorResult("pds", ground, aux={"roots": real, "complex_roots": cplx, "X": X},
                           diagnostics=diagnostics, params={"K": K})


def companion_roots(coeffs) -> np.ndarray:
    """Roots of the monic polynomial coeffs[0] a^K + ... + coeffs[K]."""
    coeffs = np.asarray(coeffs, dtype=float)
    K = len(coeffs) - 1
    if K == 0:
        return np.array([], dtype=complex)
    C = np.zeros((K, K))
    C[0, :] = -coeffs[1:] / coeffs[0]
    C[np.arange(1, K), np.arange(K - 1)] = 1.0
    return np.linalg.eigvals(C).astype(complex)


# imaginary-time evolution

def _ite_parts(m: MomentTable, tau: float, order: int, scale: float):
    if tau < 0:
        raise ContractError("tau must be non-negative")
    m.require(2 * order + 1)
    w = taylor_weights(tau, order, scale)
    i = np.arange(order + 1)
    idx = i[:, None] + i[None, :]
    return w, float(w @ m.values[idx + 1] @ w), float(w @ m.values[idx] @ w)


def ite_energy(m: MomentTable, tau: float, order: int, scale: float = 0.5,
               denom_tol: float = DENOM_TOL) -> EstimatorResult:
    """Truncated-Taylor ITE energy <p(H) H p(H)> / <p(H)^2>.

    p(H) = sum_{a<=order} (-scale tau H)^a / a!, so ``scale=0.5`` expands the
    propagator exp(-tau H / 2).
    """
    _, num, den = _ite_parts(m, tau, order, scale)
    if not den > denom_tol:
        raise ITENormalizationError(f"ITE norm {den:.3e} at tau={tau}, order {order}")
    return EstimatorResult("ite", num / den, diagnostics={"norm": den},
                           params={"tau": tau, "order": order, "scale": scale})


def ite_ratio(G: np.ndarray, m: MomentTable, tau: float, order: int, scale: float = 0.5,
              denom_tol: float = DENOM_TOL) -> float:
    """<p(H) O p(H)> / <p(H)^2> given G[a, b] = <H^a O H^b>."""
    w, _, den = _ite_parts(m, tau, order, scale)
    if not den > denom_tol:
        raise ITENormalizationError(f"ITE norm {den:.3e} at tau={tau}, order {order}")
    return float(w @ G[:order + 1, :order + 1] @ w) / den


def ite_expectation(H, O, tau: float, order: int, state=None, expectations: Mapping | None = None,
                    scale: float = 0.5, m: MomentTable | None = None) -> float:
    """ITE expectation of O from the state or from measured Pauli expectations."""
    from .moments import generalized_moment_matrix, moments_exact, moments_from_expectations
    G = generalized_moment_matrix(H, O, order, state=state, expectations=expectations)
    if m is None:
        m = (moments_from_expectations(H, 2 * order + 1, expectations) if expectations is not None
             else moments_exact(state, H, 2 * order + 1))
    return ite_ratio(G, m, tau, order, scale)


def healthy_tau_limit(m: MomentTable, order: int, tau_max: float, scale: float = 0.5,
                      denom_tol: float = DENOM_TOL, samples: int = 401) -> float:
    """Largest grid tau in [0, tau_max] before the truncated norm first fails."""
    last = 0.0
    for t in np.linspace(0.0, tau_max, samples):
        _, num, den = _ite_parts(m, float(t), order, scale)
        if not (den > denom_tol and np.isfinite(num)):
            break
        last = float(t)
    return last


def golden_section(f, lo: float, hi: float, tol: float = 1e-4):
    """Minimize a unimodal f on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def optimize_tau(m: MomentTable, order: int, tau_max: float = 10.0, scale: float = 0.5,
                 tol: float = 1e-4) -> tuple[float, float]:
    """Golden-section minimum of the truncated ITE energy over [0, tau*]."""
    if tau_max <= 0:
        raise ContractError("tau_max must be positive")
    hi = healthy_tau_limit(m, order, tau_max, scale)

    def energy(t):
        return ite_energy(m, t, order, scale).energy

    candidates = [(energy(0.0), 0.0)]
    if hi > 0:
        x, fx = golden_section(energy, 0.0, hi, tol)
        candidates += [(fx, x), (energy(hi), hi)]
    e, t = min(candidates)
    return t, e


def exact_ite_energy(eigenvalues: np.ndarray, weights: np.ndarray, tau: float) -> float:
    """E(tau) for the exact propagator exp(-tau H / 2) on a state with spectral weights."""
    w = _boltzmann(eigenvalues, weights, tau)
    return float(w @ eigenvalues)


def exact_ite_variance(eigenvalues: np.ndarray, weights: np.ndarray, tau: float) -> float:
    w = _boltzmann(eigenvalues, weights, tau)
    mean = w @ eigenvalues
    return float(w @ (eigenvalues - mean) ** 2)


def _boltzmann(eigenvalues, weights, tau):
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    weights = np.asarray(weights, dtype=float)
    e0 = eigenvalues[weights > 0].min()
    w = weights * np.exp(-tau * (eigenvalues - e0))
    return w / w.sum()


# real-time evolution in the Krylov basis

@dataclass
class RTETrajectory:
    times: np.ndarray
    coefficients: np.ndarray
    krylov_spectrum: np.ndarray
    frequencies: np.ndarray


def rte_propagate(m: MomentTable, r: int, c0, dt: float, steps: int,
                  drop_tol: float = DROP_TOL) -> RTETrajectory:
    """Integrate L dc/dt = -i R c with classical RK4.

    Works in the orthogonalized coordinates y with c = U y, where the
    equation becomes dy/dt = -i (U^T R U) y.
    """
    km = krylov_matrices(m, r)
    U, s, keep = canonical_orthogonalizer(km.L, drop_tol)
    A = U.T @ km.R @ U
    A = 0.5 * (A + A.T)
    c0 = np.asarray(c0, dtype=complex)
    # left inverse of U on the kept subspace
    y = (U.T @ km.L) @ c0
    gen = -1j * A
    ys = [y]
    for _ in range(steps):
        k1 = gen @ y
        k2 = gen @ (y + 0.5 * dt * k1)
        k3 = gen @ (y + 0.5 * dt * k2)
        k4 = gen @ (y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y)
    Y = np.array(ys)
    C = Y @ U.T
    times = dt * np.arange(steps + 1)
    spectrum = np.linalg.eigvalsh(A)
    autocorr = C @ km.L[0]
    return RTETrajectory(times, C, spectrum, spectral_peaks(autocorr, dt))


def spectral_peaks(signal: np.ndarray, dt: float, pad: int = 16, rel_height: float = 0.05) -> np.ndarray:
    """Angular frequencies E of components exp(-i E t) in a sampled signal.

    A Hann window suppresses leakage; a peak must dominate the width of the
    window's main lobe (4 unpadded bins) and is refined by a parabola through
    the log-magnitudes of its neighbours.
    """
    n = len(signal)
    nfft = pad * n
    F = np.abs(np.fft.fft(signal * np.hanning(n), nfft))
    omega = -2 * np.pi * np.fft.fftfreq(nfft, dt)
    order = np.argsort(omega)
    F, omega = F[order], omega[order]
    thresh = rel_height * F.max()
    half = 2 * pad
    peaks = []
    for k in range(1, nfft - 1):
        if F[k] <= thresh or F[k] < F[max(k - half, 0):k + half + 1].max():
            continue
        a, b, c = np.log(F[k - 1]), np.log(F[k]), np.log(F[k + 1])
        curv = a - 2 * b + c
        shift = 0.5 * (a - c) / curv if curv != 0 else 0.0
        peaks.append(omega[k] + shift * (omega[k + 1] - omega[k]))
    return np.array(peaks)


def krylov_observable(m: MomentTable, G: np.ndarray, r: int, drop_tol: float = DROP_TOL) -> float:
    """<O> in the lowest Krylov Ritz vector, given G[a, b] = <H^a O H^b>."""
    km = krylov_matrices(m, r)
    U, _, _ = canonical_orthogonalizer(km.L, drop_tol)
    A = U.T @ km.R @ U
    _, Y = np.linalg.eigh(0.5 * (A + A.T))
    c = U @ Y[:, 0]
    return float(c @ G[:r + 1, :r + 1] @ c)


# dispatch used by the CLI

METHODS = ("krylov", "lanczos", "infimum", "cmx", "pds", "ite")


def required_order(method: str, order: int | None = None) -> int:
    k = order if order is not None else 1
    return {"krylov": 2 * k + 1, "lanczos": 2 * k, "infimum": 4, "cmx": max(2 * k - 1, 1),
            "pds": 2 * k - 1, "ite": 2 * k + 1}[method]


def estimate(method: str, m: MomentTable, order: int | None = None, tau: float | str | None = None,
             tau_max: float = 10.0, scale: float = 0.5) -> EstimatorResult:
    if method not in METHODS:
        raise ContractError(f"unknown method {method!r}; choose from {METHODS}")
    m.require(required_order(method, order))
    if method == "krylov":
        return krylov_generalized_eig(m, order)
    if method == "lanczos":
        return lanczos_energy(m, order)
    if method == "infimum":
        return infimum_estimate(m)
    if method == "cmx":
        return cmx_energy(m, order)
    if method == "pds":
        return pds_energy(m, order)
    if tau in (None, "auto"):
        t, _ = optimize_tau(m, order, tau_max, scale)
        res = ite_energy(m, t, order, scale)
        res.aux["tau_opt"] = t
        return res
    return ite_energy(m, float(tau), order, scale)
