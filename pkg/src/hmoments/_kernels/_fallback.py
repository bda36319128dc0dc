"""Pure numpy implementations of the inner loops.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same results (bit-for-bit for the integer kernels, to
rounding for the floating point ones).
"""
import numpy as np

# i**k for k = 0..3
_IPOW = np.array([1, 1j, -1, -1j], dtype=np.complex128)


def _popcount(a):
    return np.bitwise_count(a).astype(np.int64)


def pauli_products(ax, az, ac, bx, bz, bc):
    """All pairwise products of two Pauli term lists.

    Strings are (x, z) masks with the convention P = i^|x&z| X^x Z^z, so the
    phase of a product is
    i^(|x1 z1| + |x2 z2| - |x3 z3| + 2 |z1 & x2|).
    Output is row-major over (a, b) pairs.
    """
    ax = np.asarray(ax, dtype=np.uint64)[:, None]
    az = np.asarray(az, dtype=np.uint64)[:, None]
    bx = np.asarray(bx, dtype=np.uint64)[None, :]
    bz = np.asarray(bz, dtype=np.uint64)[None, :]
    x = ax ^ bx
    z = az ^ bz
    k = (_popcount(ax & az) + _popcount(bx & bz) - _popcount(x & z)
         + 2 * _popcount(az & bx)) % 4
    c = np.asarray(ac, dtype=np.complex128)[:, None] * np.asarray(bc, dtype=np.complex128)[None, :]
    c = c * _IPOW[k]
    return x.ravel(), z.ravel(), c.ravel()


def apply_1q(state, gate, bit):
    """Apply a 2x2 gate to the qubit stored at index bit ``bit``."""
    state = np.asarray(state, dtype=np.complex128)
    dim = state.shape[0]
    stride = 1 << bit
    view = state.reshape(dim // (2 * stride), 2, stride)
    out = np.einsum("ij,ajb->aib", np.asarray(gate, dtype=np.complex128), view)
    return out.reshape(dim)


def pauli_expectations(state, xs, zs):
    """<psi|P|psi> for index-space masks (xs[k], zs[k]) including the Y phase."""
    state = np.asarray(state, dtype=np.complex128)
    idx = np.arange(state.shape[0], dtype=np.uint64)
    out = np.empty(len(xs), dtype=np.complex128)
    for k, (x, z) in enumerate(zip(xs, zs)):
        x = np.uint64(x)
        z = np.uint64(z)
        sign = 1 - 2 * (_popcount(idx & z) & 1)
        val = np.vdot(state[(idx ^ x).astype(np.int64)], sign * state)
        out[k] = _IPOW[int(np.bitwise_count(x & z)) % 4] * val
    return out


def readout_flips(outcomes, uniforms, p01, p10, n_qubits):
    """Push sampled basis indices through independent per-qubit flip channels.

    ``uniforms`` has shape (shots, n_qubits); column q drives qubit q, which
    lives at index bit n_qubits - 1 - q.
    """
    out = np.asarray(outcomes, dtype=np.int64).copy()
    uniforms = np.asarray(uniforms, dtype=np.float64)
    for q in range(n_qubits):
        bit = n_qubits - 1 - q
        val = (out >> bit) & 1
        p = np.where(val == 1, p10[q], p01[q])
        flip = uniforms[:, q] < p
        out ^= flip.astype(np.int64) << bit
    return out
