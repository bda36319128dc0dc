"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs through both backends; the script checks
that the outputs agree before reporting the median time of each. The small
product case is the real workload (a 72-string operator times the 19 terms of
the four-site Hamiltonian); the large one is dominated by allocating the
output arrays, which both backends pay.
"""
import argparse
import timeit

import numpy as np

from hmoments._kernels import _fallback

try:
    from hmoments._kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    masks = lambda n: rng.integers(0, 1 << 10, n, dtype=np.uint64)
    coeffs = lambda n: rng.normal(size=n) + 1j * rng.normal(size=n)
    term_list = lambda n: (masks(n), masks(n), coeffs(n))
    a, b = term_list(300), term_list(300)
    op, ham = term_list(72), term_list(19)
    state = rng.normal(size=1 << 12) + 1j * rng.normal(size=1 << 12)
    state /= np.linalg.norm(state)
    gate = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]], dtype=complex)
    xs = rng.integers(0, 1 << 12, 72, dtype=np.uint64)
    zs = rng.integers(0, 1 << 12, 72, dtype=np.uint64)
    shots = 100_000
    outcomes = rng.integers(0, 16, shots, dtype=np.int64)
    uniforms = rng.random((shots, 4))
    p = np.full(4, 0.02)
    return {
        "pauli_products 72x19": ("pauli_products", (*op, *ham)),
        "pauli_products 300x300": ("pauli_products", (*a, *b)),
        "apply_1q 12 qubits": ("apply_1q", (state, gate, 5)),
        "pauli_expectations 72 strings, 12 qubits": ("pauli_expectations", (state, xs, zs)),
        "readout_flips 1e5 shots": ("readout_flips", (outcomes, uniforms, p, p, 4)),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-13, atol=1e-13)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")
        return
    print(f"{'kernel':44s} {'cython ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, (name, inputs) in cases(np.random.default_rng(0)).items():
        fc, fp = getattr(_ckernels, name), getattr(_fallback, name)
        if not same(fc(*inputs), fp(*inputs)):
            raise SystemExit(f"{name}: backends disagree")
        tc = np.median(timeit.repeat(lambda: fc(*inputs), number=20, repeat=args.repeat)) / 20
        tp = np.median(timeit.repeat(lambda: fp(*inputs), number=20, repeat=args.repeat)) / 20
        print(f"{label:44s} {1e3 * tc:10.3f} {1e3 * tp:10.3f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
