"""Pure-numpy CSR block matvec, used when the compiled kernel is unavailable."""

import numpy as np


def csr_matvec_block(indptr, indices, data, X, out):
    """out <- A @ X for CSR (indptr, indices, data); X and out are d x k.

    Row sums are taken with add.reduceat restricted to nonempty rows, so
    empty rows come out exactly zero (reduceat would otherwise copy the
    element at the segment start).
    """
    out[...] = 0.0
    if data.shape[0] == 0:
        return out
    prod = data[:, None] * X[indices, :]
    nonempty = indptr[1:] > indptr[:-1]
    out[nonempty] = np.add.reduceat(prod, indptr[:-1][nonempty], axis=0)
    return out
