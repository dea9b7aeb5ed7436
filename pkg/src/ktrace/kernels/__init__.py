"""CSR matvec kernel selection.

At import time the compiled Cython kernel is preferred; if it is missing
(or KTRACE_NO_EXTENSION=1 is set) the numpy fallback is used. Both kernels
accumulate row sums in the same left-to-right order.
"""

import os

import numpy as np

from . import fallback

if os.environ.get("KTRACE_NO_EXTENSION") == "1":
    _impl = fallback
else:
    try:
        from . import _csr as _impl
    except ImportError:
        _impl = fallback

BACKEND = "numpy" if _impl is fallback else "cython"


def csr_matvec_block(indptr, indices, data, X, out=None):
    """Return A @ X for a CSR matrix given by (indptr, indices, data)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if out is None:
        out = np.empty_like(X)
    return _impl.csr_matvec_block(indptr, indices, data, X, out)
