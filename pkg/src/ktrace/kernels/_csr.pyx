# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR block matvec kernel."""

import numpy as np

cimport cython


@cython.boundscheck(False)
@cython.wraparound(False)
def csr_matvec_block(const long long[::1] indptr,
                     const long long[::1] indices,
                     const double[::1] data,
                     const double[:, ::1] X,
                     double[:, ::1] out):
    """out <- A @ X for CSR (indptr, indices, data); X and out are d x k."""
    cdef Py_ssize_t d = out.shape[0]
    cdef Py_ssize_t k = out.shape[1]
    cdef Py_ssize_t i, j, c, col, start, end
    cdef double v
    with nogil:
        for i in range(d):
            start = indptr[i]
            end = indptr[i + 1]
            for c in range(k):
                out[i, c] = 0.0
            for j in range(start, end):
                v = data[j]
                col = indices[j]
                for c in range(k):
                    out[i, c] += v * X[col, c]
    return np.asarray(out)
