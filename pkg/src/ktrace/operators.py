"""Symmetric operators accessed through counted block matvecs.

Every operator exposes `apply` on d x k blocks and a monotone matvec counter
(one count per column applied). Builders cover the spin-chain Hamiltonian,
diagonal matrices with a prescribed image under a spectral function, and
Matrix Market files.
"""

import copy
import threading

import numpy as np
import scipy.sparse as sp

from .errors import (CapacityError, DimensionMismatchError, ParseError,
                     UnsupportedFunctionError)
from .kernels import csr_matvec_block


class MatrixOracle:
    """Symmetric linear operator of dimension d applied to vector blocks."""

    symmetric = True

    def __init__(self, d):
        self.d = int(d)
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def matvec_count(self):
        return self._count

    def apply(self, X):
        """Return A @ X; a d x k block increments the counter by k."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != self.d:
            raise DimensionMismatchError(
                f"operator expects blocks with {self.d} rows, got shape {X.shape}")
        out = self._apply(X)
        with self._count_lock:
            self._count += X.shape[1]
        return out[:, 0] if single else out

    def fresh(self):
        """A copy sharing the matrix data but with its own zeroed counter."""
        dup = copy.copy(self)
        dup._count = 0
        dup._count_lock = threading.Lock()
        return dup

    def _apply(self, X):
        raise NotImplementedError


class SparseSymmetric(MatrixOracle):
    """Symmetric sparse matrix in CSR storage (int64 indices, float64 data)."""

    def __init__(self, indptr, indices, data, d):
        super().__init__(d)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if self.indptr.shape[0] != d + 1:
            raise DimensionMismatchError("indptr length must be d + 1")

    @classmethod
    def from_scipy(cls, mat):
        mat = mat.tocsr().copy()
        if mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError("matrix must be square")
        mat.sum_duplicates()
        mat.eliminate_zeros()
        mat.sort_indices()
        return cls(mat.indptr, mat.indices, mat.data, mat.shape[0])

    @classmethod
    def from_dense(cls, A):
        A = np.asarray(A, dtype=np.float64)
        return cls.from_scipy(sp.csr_matrix(A))

    @property
    def nnz(self):
        return self.data.shape[0]

    def _apply(self, X):
        out = np.empty((self.d, X.shape[1]))
        return csr_matvec_block(self.indptr, self.indices, self.data,
                                np.ascontiguousarray(X), out)

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr),
                             shape=(self.d, self.d))

    def to_dense(self, limit=8192):
        if self.d > limit:
            raise CapacityError(f"dense conversion refused for d={self.d} > {limit}")
        return self.to_scipy().toarray()


class DiagonalOperator(MatrixOracle):
    """Diagonal operator with known eigenvalues; tr(f(A)) is Sum f(lambda_i)."""

    def __init__(self, eigenvalues):
        lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
        super().__init__(lam.size)
        self.eigenvalues = lam
        self.ground_truth_trace = None  # set by build_synthetic_spectrum

    def _apply(self, X):
        return self.eigenvalues[:, None] * X

    def exact_trace(self, f):
        return float(np.sum(f(self.eigenvalues)))

    def to_dense(self, limit=8192):
        if self.d > limit:
            raise CapacityError(f"dense conversion refused for d={self.d} > {limit}")
        return np.diag(self.eigenvalues)


# Pauli matrices for spin 1/2; sy = i*J with real J, so sy(x)sy = -(J(x)J)
# and the assembled Hamiltonian stays real.
_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _embed(N, site, local):
    """kron(I_{2^site}, local, I_*) acting on an N-spin chain."""
    width = int(round(np.log2(local.shape[0])))
    left = sp.identity(2 ** site, format="csr")
    right = sp.identity(2 ** (N - site - width), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(local)), right, format="csr")


def build_spin_chain(N, h):
    """XY Heisenberg chain: 2 * sum_i (sx_i sx_{i+1} + sy_i sy_{i+1}) + h * sum_i sz_i.

    Returns a real 2^N x 2^N SparseSymmetric; the trace is exactly zero.
    """
    if not 2 <= N <= 24:
        raise CapacityError(f"spin count N={N} outside the supported range 2..24")
    pair = 2.0 * (np.kron(_SX, _SX) - np.kron(_J, _J))
    H = sp.csr_matrix((2 ** N, 2 ** N))
    for i in range(N - 1):
        H = H + _embed(N, i, pair)
    if h != 0.0:
        for i in range(N):
            H = H + h * _embed(N, i, _SZ)
    return SparseSymmetric.from_scipy(H)


def build_synthetic_spectrum(kind, d, kappa, rho=0.95, f=None):
    """Diagonal operator whose eigenvalues hit prescribed f-values exactly.

    The f-values follow either algebraic decay (kind="slow",
    1 + ((i-1)/(d-1))^2 (kappa-1)) or geometric decay (kind="fast",
    1 + ((i-1)/(d-1)) (kappa-1) rho^(d-i)); the eigenvalues are f^{-1} of
    those values, and their exact f-trace is stored on the operator.
    """
    from .matfun import SpectralFunction

    if f is None:
        f = SpectralFunction.inverse()
    if d < 2:
        raise ValueError("d must be at least 2")
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")

    i = np.arange(1, d + 1, dtype=np.float64)
    t = (i - 1.0) / (d - 1.0)
    if kind == "slow":
        fvals = 1.0 + t ** 2 * (kappa - 1.0)
    elif kind == "fast":
        fvals = 1.0 + t * (kappa - 1.0) * rho ** (d - i)
    else:
        raise ValueError(f"unknown spectrum kind {kind!r}")

    lam = _invert_function(f, fvals)
    op = DiagonalOperator(lam)
    op.ground_truth_trace = float(fvals.sum())
    return op


def _invert_function(f, fvals):
    kind = getattr(f, "kind", None)
    if kind == "inverse":
        return 1.0 / fvals
    if kind == "log":
        return np.exp(fvals)
    if kind == "sqrt":
        return fvals ** 2
    if kind == "exp_neg_beta":
        if fvals.min() <= 0:
            raise UnsupportedFunctionError("exp image must be positive")
        return -np.log(fvals) / f.beta
    raise UnsupportedFunctionError(
        f"cannot invert spectral function {kind!r} on the requested range")


def load_matrix_market(path):
    """Parse a real coordinate Matrix Market file into a SparseSymmetric.

    `general` headers are symmetrized as (A + A^T)/2; `symmetric` headers
    mirror the stored triangle. Duplicate entries are summed first. Only
    real coordinate matrices are accepted.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("line 1: empty file")

    header = lines[0].strip().split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise ParseError("line 1: expected '%%MatrixMarket matrix coordinate real "
                         "{general|symmetric}' header")
    _, obj, fmt, field, symmetry = (tok.lower() for tok in header)
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(f"line 1: unsupported header '{obj} {fmt}'")
    if field != "real":
        raise ParseError(f"line 1: field '{field}' rejected; only 'real' is supported")
    if symmetry not in ("general", "symmetric"):
        raise ParseError(f"line 1: symmetry '{symmetry}' rejected; "
                         "use 'general' or 'symmetric'")

    ln = 1
    size = None
    rows, cols, vals = [], [], []
    for raw in lines[1:]:
        ln += 1
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if size is None:
            if len(parts) != 3:
                raise ParseError(f"line {ln}: expected 'nrows ncols nnz'")
            try:
                nr, nc, nnz = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"line {ln}: malformed size line") from None
            if nr != nc:
                raise ParseError(f"line {ln}: matrix must be square, got {nr}x{nc}")
            size = (nr, nc, nnz)
            continue
        if len(parts) != 3:
            raise ParseError(f"line {ln}: expected 'i j value'")
        try:
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            raise ParseError(f"line {ln}: malformed entry") from None
        if not (1 <= i <= size[0] and 1 <= j <= size[1]):
            raise ParseError(f"line {ln}: index ({i}, {j}) out of range")
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)

    if size is None:
        raise ParseError(f"line {ln}: missing size line")
    if len(vals) != size[2]:
        raise ParseError(f"line {ln}: expected {size[2]} entries, found {len(vals)}")

    A = sp.coo_matrix((vals, (rows, cols)), shape=size[:2]).tocsr()
    A.sum_duplicates()
    if symmetry == "general":
        S = (A + A.T) * 0.5
    else:
        off = A - sp.diags(A.diagonal())
        S = A + off.T
    return SparseSymmetric.from_scipy(S)
