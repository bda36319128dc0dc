"""Hot loops, compiled when the Cython extension is built.

Set ``HMOMENTS_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("HMOMENTS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

pauli_products = _impl.pauli_products
apply_1q = _impl.apply_1q
pauli_expectations = _impl.pauli_expectations
readout_flips = _impl.readout_flips

__all__ = ["BACKEND", "pauli_products", "apply_1q", "pauli_expectations", "readout_flips"]
