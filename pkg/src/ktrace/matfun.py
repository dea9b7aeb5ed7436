"""Spectral functions, Lanczos quadrature forms, and Chebyshev filters.

All matrix functions of the small block tridiagonal matrices go through a
dense symmetric eigendecomposition; the three quadrature approximations are
assembled from the same factorization pieces the recurrence already stores.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as nch

from .errors import DomainError, FilterDegreeError

_POSITIVE_DOMAIN = {"log": True, "inverse": True}


@dataclass(frozen=True)
class SpectralFunction:
    """Scalar function applied to eigenvalues.

    Supported kinds: exp_neg_beta (exp(-beta x)), log, sqrt, inverse,
    poly (power-basis coefficients, low to high, Horner evaluation) and
    cheb_interp (Chebyshev interpolant of another function on an interval).
    """

    kind: str
    beta: float = None
    coeffs: tuple = None
    domain: tuple = None
    shift: float = 0.0

    @classmethod
    def exp_neg_beta(cls, beta, shift=0.0):
        """exp(-beta (x - shift)); a shift at the smallest eigenvalue keeps
        partition-function evaluations inside double range without changing
        relative errors."""
        return cls("exp_neg_beta", beta=float(beta), shift=float(shift))

    @classmethod
    def log(cls):
        return cls("log")

    @classmethod
    def sqrt(cls):
        return cls("sqrt")

    @classmethod
    def inverse(cls):
        return cls("inverse")

    @classmethod
    def polynomial(cls, coeffs):
        return cls("poly", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def chebyshev_interpolant(cls, target, interval, degree):
        filt = chebyshev_filter(target, interval, degree)
        return cls("cheb_interp", coeffs=tuple(filt.coef),
                   domain=tuple(filt.interval))

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "exp_neg_beta":
            return np.exp(-self.beta * (x - self.shift))
        if self.kind == "log":
            if np.any(x <= 0):
                bad = float(x[x <= 0].flat[0])
                raise DomainError(f"log undefined at eigenvalue {bad}")
            return np.log(x)
        if self.kind == "sqrt":
            if np.any(x < 0):
                bad = float(x[x < 0].flat[0])
                raise DomainError(f"sqrt undefined at eigenvalue {bad}")
            return np.sqrt(x)
        if self.kind == "inverse":
            if np.any(x == 0):
                raise DomainError("inverse undefined at eigenvalue 0.0")
            return 1.0 / x
        if self.kind == "poly":
            out = np.zeros_like(x)
            for c in reversed(self.coeffs or (0.0,)):
                out = out * x + c
            return out
        if self.kind == "cheb_interp":
            return nch.Chebyshev(np.asarray(self.coeffs), domain=self.domain)(x)
        raise ValueError(f"unknown spectral function kind {self.kind!r}")

    @property
    def label(self):
        if self.kind == "exp_neg_beta":
            if self.shift:
                return f"exp_neg_beta:{self.beta:g}(shift={self.shift:g})"
            return f"exp_neg_beta:{self.beta:g}"
        if self.kind == "poly":
            return "poly[" + ",".join(f"{c:g}" for c in self.coeffs) + "]"
        return self.kind


def beta_grid_family(betas, shift=0.0):
    """exp(-beta (x - shift)) for every beta, sharing one recurrence."""
    return [SpectralFunction.exp_neg_beta(b, shift=shift) for b in betas]


def as_family(f):
    """Normalize a function-or-sequence argument to (list, was_single)."""
    if isinstance(f, SpectralFunction) or callable(f):
        return [f], True
    return list(f), False


def eval_matrix_function(T, f):
    """f(T) for a small symmetric matrix via eigendecomposition, symmetrized."""
    T = np.asarray(T, dtype=np.float64)
    w, V = np.linalg.eigh(T)
    F = (V * f(w)) @ V.T
    return 0.5 * (F + F.T)


def lanczos_quadratic_form(T, f):
    """Quadrature approximation to Z^T f(A) Z from a depth-q recurrence.

    Evaluates R1^T [f(T)]_{1:b,1:b} R1; exact whenever f is a polynomial of
    degree at most 2q - 1.
    """
    b = T.block_size
    F = eval_matrix_function(T.assemble(), f)
    return T.r1.T @ F[:b, :b] @ T.r1


def lanczos_apply(T, basis, f):
    """Approximation to f(A) Z using the stored basis blocks.

    Evaluates Qbar [f(T_p)]_{:,1:b} R1 at depth p = basis.n_blocks; exact for
    polynomials of degree at most p - 1.
    """
    p = basis.n_blocks
    if T.n_blocks < p:
        raise ValueError("T has fewer blocks than the basis")
    b = T.block_size
    F = eval_matrix_function(T.assemble(p), f)
    return basis.matrix @ (F[:, :b] @ T.r1)


def krylov_aware_quadratic(T, ortho_depth, f):
    """Approximation to Qbar_{q+1}^T f(A) Qbar_{q+1} without new matvecs.

    The leading (q+1)b x (q+1)b principal submatrix of f(T_{q+n}); exact for
    polynomials of degree at most 2n - 1 where n = T.n_blocks - q.
    """
    if T.n_blocks < ortho_depth + 1:
        raise ValueError("T must hold at least ortho_depth + 1 blocks")
    lead = (ortho_depth + 1) * T.block_size
    F = eval_matrix_function(T.assemble(), f)
    return F[:lead, :lead]


@dataclass(frozen=True)
class FilterPolynomial:
    """Chebyshev-series polynomial used to reweight restart blocks."""

    coef: np.ndarray
    interval: tuple
    fit_error: float = 0.0

    @property
    def degree(self):
        return len(self.coef) - 1

    def __call__(self, x):
        return nch.Chebyshev(self.coef, domain=self.interval)(x)


def chebyshev_filter(target, interval, degree):
    """Chebyshev interpolant of `target` on [a, b] at degree p.

    The reported fit_error is the max deviation on a 10p-point grid.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    series = nch.Chebyshev.interpolate(lambda x: np.asarray(target(x), dtype=np.float64),
                                       degree, domain=[a, b])
    xs = np.linspace(a, b, max(2, 10 * degree))
    err = float(np.max(np.abs(series(xs) - target(xs))))
    return FilterPolynomial(np.asarray(series.coef), (a, b), err)


def default_filter(target, T, degree=None, margin=0.01):
    """Filter for the next restart cycle, interpolating `target` on the
    eigenvalue range of the current recurrence (with a small margin, clipped
    to the target's domain)."""
    w = np.linalg.eigvalsh(T.assemble())
    lo, hi = float(w[0]), float(w[-1])
    spread = hi - lo if hi > lo else max(abs(hi), 1.0)
    a = lo - margin * spread
    b = hi + margin * spread
    if isinstance(target, SpectralFunction) and _POSITIVE_DOMAIN.get(target.kind):
        a = max(a, 0.5 * lo) if lo > 0 else a
    if isinstance(target, SpectralFunction) and target.kind == "sqrt":
        a = max(a, 0.0)
    deg = T.n_blocks if degree is None else degree
    return chebyshev_filter(target, (a, b), deg)


def apply_filter(T, basis, filt):
    """Filtered start block for the next restart cycle: Qbar_q [p(T_q)]_{:,1:b} R1.

    Uses only the stored recurrence, so it consumes no oracle matvecs; the
    filter degree may not exceed the recurrence depth.
    """
    depth = T.n_blocks
    if filt.degree > depth:
        raise FilterDegreeError(
            f"filter degree {filt.degree} exceeds recurrence depth {depth}")
    if basis.n_blocks < depth:
        raise ValueError("basis holds fewer blocks than the recurrence depth")
    b = T.block_size
    F = eval_matrix_function(T.assemble(depth), filt)
    return basis.leading(depth) @ (F[:, :b] @ T.r1)
