# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef inline int _popcount(uint64_t v) noexcept nogil:
    # SWAR bit count; the gcc builtin becomes a slow libgcc call
    # unless the build targets a CPU with the popcnt instruction
    v = v - ((v >> 1) & 0x5555555555555555ULL)
    v = (v & 0x3333333333333333ULL) + ((v >> 2) & 0x3333333333333333ULL)
    v = (v + (v >> 4)) & 0x0F0F0F0F0F0F0F0FULL
    return <int>((v * 0x0101010101010101ULL) >> 56)


cdef double complex _ipow(int k) noexcept nogil:
    k = k & 3
    if k == 0:
        return 1.0
    elif k == 1:
        return 1.0j
    elif k == 2:
        return -1.0
    return -1.0j


def pauli_products(ax, az, ac, bx, bz, bc):
    cdef const uint64_t[:] axv = np.ascontiguousarray(ax, dtype=np.uint64)
    cdef const uint64_t[:] azv = np.ascontiguousarray(az, dtype=np.uint64)
    cdef const double complex[:] acv = np.ascontiguousarray(ac, dtype=np.complex128)
    cdef const uint64_t[:] bxv = np.ascontiguousarray(bx, dtype=np.uint64)
    cdef const uint64_t[:] bzv = np.ascontiguousarray(bz, dtype=np.uint64)
    cdef const double complex[:] bcv = np.ascontiguousarray(bc, dtype=np.complex128)
    cdef Py_ssize_t na = axv.shape[0], nb = bxv.shape[0], i, j, k
    x_out = np.empty(na * nb, dtype=np.uint64)
    z_out = np.empty(na * nb, dtype=np.uint64)
    c_out = np.empty(na * nb, dtype=np.complex128)
    cdef uint64_t[:] xo = x_out
    cdef uint64_t[:] zo = z_out
    cdef double complex[:] co = c_out
    cdef uint64_t x, z
    cdef int e
    cdef double re, im, t
    with nogil:
        for i in range(na):
            for j in range(nb):
                k = i * nb + j
                x = axv[i] ^ bxv[j]
                z = azv[i] ^ bzv[j]
                e = (_popcount(axv[i] & azv[i])
                     + _popcount(bxv[j] & bzv[j])
                     - _popcount(x & z)
                     + 2 * _popcount(azv[i] & bxv[j]))
                xo[k] = x
                zo[k] = z
                # plain real arithmetic avoids the slow C99 complex multiply;
                # the phase i^e is then an exact swap and sign change
                re = acv[i].real * bcv[j].real - acv[i].imag * bcv[j].imag
                im = acv[i].real * bcv[j].imag + acv[i].imag * bcv[j].real
                e = (e + 4 * 64) & 3
                if e == 1:
                    t = re
                    re = -im
                    im = t
                elif e == 2:
                    re = -re
                    im = -im
                elif e == 3:
                    t = re
                    re = im
                    im = -t
                co[k].real = re
                co[k].imag = im
    return x_out, z_out, c_out


def apply_1q(state, gate, int bit):
    cdef const double complex[:] s = np.ascontiguousarray(state, dtype=np.complex128)
    cdef const double complex[:, :] g = np.ascontiguousarray(gate, dtype=np.complex128)
    cdef Py_ssize_t dim = s.shape[0], i
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << bit
    out = np.empty(dim, dtype=np.complex128)
    cdef double complex[:] o = out
    cdef double complex a0, a1
    with nogil:
        for i in range(dim):
            if i & stride:
                continue
            a0 = s[i]
            a1 = s[i + stride]
            o[i] = g[0, 0] * a0 + g[0, 1] * a1
            o[i + stride] = g[1, 0] * a0 + g[1, 1] * a1
    return out


def pauli_expectations(state, xs, zs):
    cdef const double complex[:] s = np.ascontiguousarray(state, dtype=np.complex128)
    cdef const uint64_t[:] xv = np.ascontiguousarray(xs, dtype=np.uint64)
    cdef const uint64_t[:] zv = np.ascontiguousarray(zs, dtype=np.uint64)
    cdef Py_ssize_t dim = s.shape[0], nk = xv.shape[0], k
    cdef uint64_t b, x, z
    cdef double complex acc, a
    out = np.empty(nk, dtype=np.complex128)
    cdef double complex[:] o = out
    with nogil:
        for k in range(nk):
            x = xv[k]
            z = zv[k]
            acc = 0
            for b in range(<uint64_t>dim):
                a = s[b ^ x].conjugate() * s[b]
                if _popcount(b & z) & 1:
                    acc = acc - a
                else:
                    acc = acc + a
            o[k] = _ipow(_popcount(x & z)) * acc
    return out


def readout_flips(outcomes, uniforms, p01, p10, int n_qubits):
    cdef const int64_t[:] src = np.ascontiguousarray(outcomes, dtype=np.int64)
    cdef const double[:, :] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[:] q01 = np.ascontiguousarray(p01, dtype=np.float64)
    cdef const double[:] q10 = np.ascontiguousarray(p10, dtype=np.float64)
    cdef Py_ssize_t shots = src.shape[0], s, q
    out = np.empty(shots, dtype=np.int64)
    cdef int64_t[:] o = out
    cdef int64_t v, bit
    cdef double p
    with nogil:
        for s in range(shots):
            v = src[s]
            for q in range(n_qubits):
                bit = n_qubits - 1 - q
                p = q10[q] if (v >> bit) & 1 else q01[q]
                if u[s, q] < p:
                    v = v ^ ((<int64_t>1) << bit)
            o[s] = v
    return out
