"""Trace estimators combining Krylov deflation with quadratic sampling.

The core estimator builds one block Krylov factorization, reads the deflated
trace off a principal submatrix of f(T), and applies the plain quadratic
estimator to the deflated remainder with per-sample scalar Lanczos runs.
Adaptive and restarted variants reuse the same remainder machinery.
"""

from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError
from .lanczos import BlockLanczosProcess, block_lanczos, qrcp
from .matfun import (FilterPolynomial, SpectralFunction, apply_filter,
                     as_family, default_filter, lanczos_apply)
from .operators import DiagonalOperator
from .stats import SampleStream, alpha_k, c_eps_delta


@dataclass
class EstimatorConfig:
    """Knobs shared by the estimators.

    block_size/ortho_depth size the deflation space, samples counts the
    quadratic-estimator draws, quad_degree is the Lanczos depth used for
    every implicit product with f(A), restarts the number of filter cycles.
    eps/delta/max_depth apply to adaptive runs only.
    """

    block_size: int = 0
    ortho_depth: int = 0
    samples: int = 0
    quad_degree: int = 1
    restarts: int = 0
    distribution: str = "gaussian"
    seed: int = 0
    eps: float = None
    delta: float = None
    max_depth: int = None
    batch_width: int = 8

    def __post_init__(self):
        if self.block_size < 0 or self.ortho_depth < 0 or self.samples < 0:
            raise ValueError("block_size, ortho_depth, samples must be >= 0")
        if self.quad_degree < 1:
            raise ValueError("quad_degree must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.block_size == 0 and self.ortho_depth > 0:
            raise ValueError("ortho_depth > 0 requires block_size > 0")
        if self.eps is not None and self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.batch_width < 1:
            raise ValueError("batch_width must be >= 1")


@dataclass
class TraceEstimate:
    """Result record; totals are arrays when f was a function family."""

    t_defl: object
    t_rem: object
    total: object
    samples_used: int
    matvecs_used: int
    deflation_rank: int
    algorithm: str
    config: EstimatorConfig = None
    warning: str = None


CostModel = namedtuple("CostModel", ["total", "deflation", "sampling",
                                     "basis_columns"])


def cost_model(config, algorithm="krylov"):
    """Predicted matvec counts and deflation width for a configuration."""
    b, q, m, n, r = (config.block_size, config.ortho_depth, config.samples,
                     config.quad_degree, config.restarts)
    if algorithm == "krylov":
        deflation = b * (q + n)
        columns = (q + 1) * b
    elif algorithm == "restart":
        deflation = b * (q * r + q + n)
        columns = (q + 1) * b
    elif algorithm == "hutchpp":
        deflation = b * (n + n)
        columns = b
    elif algorithm == "girard":
        deflation = 0
        columns = 0
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    sampling = m * n
    return CostModel(deflation + sampling, deflation, sampling, columns)


def _finish(t_defl, t_rem, single, **kw):
    if single:
        t_defl = float(t_defl[0])
        t_rem = float(t_rem[0])
        total = t_defl + t_rem
    else:
        t_defl = np.asarray(t_defl)
        t_rem = np.asarray(t_rem)
        total = t_defl + t_rem
    return TraceEstimate(t_defl=t_defl, t_rem=t_rem, total=total, **kw)


def _live_eig(T):
    """Eigendecomposition of T restricted to its genuine directions.

    Exhausted directions are exact zero rows/columns of T; dropping them
    avoids evaluating f at padded zero eigenvalues while leaving every
    genuine node and weight unchanged (the padding decouples exactly).
    """
    Tm = T.assemble()
    if T.live_mask is None:
        w, V = np.linalg.eigh(Tm)
        return w, V, np.arange(Tm.shape[0])
    idx = np.flatnonzero(T.live_mask[:Tm.shape[0]])
    w, V = np.linalg.eigh(Tm[np.ix_(idx, idx)])
    return w, V, idx


def _window_weights(T, window):
    """Eigen-nodes of T plus the column weights of its leading window."""
    w, V, idx = _live_eig(T)
    rows = idx < window
    colw = np.sum(V[rows, :] ** 2, axis=0)
    return w, V, colw


def _scalar_lanczos_batch(oracle, Y, depth):
    """Tridiagonal coefficients of independent scalar Lanczos runs.

    Columns of Y are normalized internally and iterated without
    reorthogonalization; zero columns yield all-zero coefficients. Only the
    oracle applies are blocked across the batch; all per-column arithmetic
    uses contiguous vectors, so results are bitwise independent of the
    batch width. Returns (alphas, betas, norms).
    """
    d, width = Y.shape
    depth = min(depth, d)  # a single vector's Krylov space exhausts at d
    if width == 0:
        return (np.zeros((depth, 0)), np.zeros((max(depth - 1, 0), 0)),
                np.zeros(0))
    cols = [np.ascontiguousarray(Y[:, c]) for c in range(width)]
    norms = np.array([np.linalg.norm(c) for c in cols])
    V = [c / n if n > 0.0 else np.zeros(d) for c, n in zip(cols, norms)]
    alphas = np.zeros((depth, width))
    betas = np.zeros((max(depth - 1, 0), width))
    Vprev = [np.zeros(d) for _ in range(width)]
    beta_prev = np.zeros(width)
    for j in range(depth):
        W = oracle.apply(np.stack(V, axis=1))
        for c in range(width):
            w = W[:, c].copy()
            a = float(V[c] @ w)
            alphas[j, c] = a
            if j == depth - 1:
                continue
            w -= a * V[c] + beta_prev[c] * Vprev[c]
            bno = float(np.linalg.norm(w))
            betas[j, c] = bno
            Vprev[c] = V[c]
            V[c] = w / bno if bno > 0.0 else np.zeros(d)
            beta_prev[c] = bno
    return alphas, betas, norms


def _tridiag_quadrature(alpha, beta, f_list):
    """First-entry and first-column quadrature weights of f(T) for each f."""
    theta, U = sla.eigh_tridiagonal(alpha, beta)
    w0 = U[0, :]
    first = np.empty(len(f_list))
    colsq = np.empty(len(f_list))
    for i, f in enumerate(f_list):
        ftheta = f(theta)
        first[i] = float(np.sum(w0 ** 2 * ftheta))
        colsq[i] = float(np.sum((w0 * ftheta) ** 2))
    return first, colsq


def _project_out(Qmat, X):
    if Qmat is None or Qmat.shape[1] == 0:
        return X.copy()
    return X - Qmat @ (Qmat.T @ X)


def _project_out_columns(Qmat, X, collapse_tol=1e-10):
    """Column-at-a-time deflation so results match any batch width bitwise.

    Columns whose projection collapses to roundoff (relative to the input
    norm) are zeroed: they carry no genuine residual, and running a scalar
    recurrence on cancellation noise would produce meaningless nodes.
    """
    if Qmat is None or Qmat.shape[1] == 0:
        return X.copy()
    out = np.empty_like(X)
    for c in range(X.shape[1]):
        col = np.ascontiguousarray(X[:, c])
        y = col - Qmat @ (Qmat.T @ col)
        if np.linalg.norm(y) <= collapse_tol * np.linalg.norm(col):
            y = np.zeros_like(y)
        out[:, c] = y
    return out


def _fixed_remainder(oracle, f_list, Qmat, psi_stream, m, depth, batch_width):
    """Mean of ||y_k||^2 [f(T^k)]_{1,1} over m deflated samples."""
    total = np.zeros(len(f_list))
    if m == 0:
        return total
    d = oracle.d
    for start in range(0, m, batch_width):
        count = min(batch_width, m - start)
        Psi = psi_stream.columns(d, start, count)
        Y = _project_out_columns(Qmat, Psi)
        alphas, betas, norms = _scalar_lanczos_batch(oracle, Y, depth)
        for c in range(count):
            if norms[c] == 0.0:
                continue  # fully deflated draw contributes exactly zero
            first, _ = _tridiag_quadrature(alphas[:, c], betas[:, c], f_list)
            total += norms[c] ** 2 * first
    return total / m


def girard_hutchinson(oracle, m, distribution="gaussian", seed=0,
                      batch_width=1024, return_samples=False):
    """Plain quadratic trace estimator on an explicit symmetric operator.

    Averages psi^T (A psi) over m draws; unbiased for tr(A) whenever the
    draw distribution satisfies E[psi psi^T] = I.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    d = oracle.d
    stream = SampleStream(seed, distribution).child("psi")
    start_count = oracle.matvec_count
    vals = np.empty(m)
    for start in range(0, m, batch_width):
        count = min(batch_width, m - start)
        Psi = stream.columns(d, start, count)
        BPsi = oracle.apply(Psi)
        for c in range(count):
            vals[start + c] = float(
                np.ascontiguousarray(Psi[:, c]) @ np.ascontiguousarray(BPsi[:, c]))
    est = float(vals.mean())
    result = TraceEstimate(t_defl=0.0, t_rem=est, total=est, samples_used=m,
                           matvecs_used=oracle.matvec_count - start_count,
                           deflation_rank=0, algorithm="girard")
    return (result, vals) if return_samples else result


def _deflate_and_sample(oracle, omega, f_list, config, stream, extra_matvecs=0):
    """Shared core: one factorization, windowed trace, sampled remainder."""
    b, q, m, n = (config.block_size, config.ortho_depth, config.samples,
                  config.quad_degree)
    start_count = oracle.matvec_count - extra_matvecs
    if b > 0:
        T, basis = block_lanczos(oracle, omega, q, n,
                                 rng=stream.child("repair", "main").generator())
        window = min((q + 1) * b, basis.live_columns)
        w, _, colw = _window_weights(T, window)
        t_defl = np.array([float(colw @ f(w)) for f in f_list])
        Qmat = basis.matrix[:, :window]
    else:
        t_defl = np.zeros(len(f_list))
        Qmat = None
        window = 0
    t_rem = _fixed_remainder(oracle, f_list, Qmat, stream.child("psi"), m, n,
                             config.batch_width)
    return t_defl, t_rem, window, oracle.matvec_count - start_count


def krylov_trace(oracle, f, config):
    """Deflated stochastic trace estimate of tr(f(A)).

    Runs one block Lanczos factorization of depth ortho_depth + quad_degree,
    deflates with the stored (q+1)b basis columns, and averages per-sample
    scalar Lanczos quadratic forms over the projected remainder. A family of
    functions is evaluated from the same factorization at no extra matvecs.
    """
    f_list, single = as_family(f)
    stream = SampleStream(config.seed, config.distribution)
    omega = None
    if config.block_size > 0:
        omega = stream.child("omega").block(0, oracle.d, config.block_size)
    t_defl, t_rem, window, used = _deflate_and_sample(
        oracle, omega, f_list, config, stream)
    return _finish(t_defl, t_rem, single, samples_used=config.samples,
                   matvecs_used=used, deflation_rank=window,
                   algorithm="krylov", config=config)


def hutchpp_trace(oracle, f, config):
    """Deflated estimator treating f(A) as a black box (baseline).

    Sketches f(A) Omega one column at a time with quad_degree-step Lanczos,
    orthonormalizes the sketch, and spends another quad_degree matvecs per
    column on the deflated trace, so deflation costs 2 * quad_degree per
    column instead of one matvec per iteration.
    """
    f_list, single = as_family(f)
    if not single:
        raise ValueError("the black-box baseline must be run per function")
    func = f_list[0]
    b, m, n = config.block_size, config.samples, config.quad_degree
    d = oracle.d
    stream = SampleStream(config.seed, config.distribution)
    start_count = oracle.matvec_count

    Qmat = None
    t_defl = np.zeros(1)
    rank = 0
    if b > 0:
        omega = stream.child("omega").block(0, d, b)
        cols = []
        for j in range(b):
            Tj, Bj = block_lanczos(
                oracle, omega[:, j:j + 1], n - 1, 1,
                rng=stream.child("repair", "sketch", j).generator())
            cols.append(lanczos_apply(Tj, Bj, func)[:, 0])
        Q, _, rank = qrcp(np.column_stack(cols))
        Qmat = Q[:, :rank] if rank > 0 else None
        if rank > 0:
            alphas, betas, norms = _scalar_lanczos_batch(oracle, Qmat, n)
            for c in range(rank):
                first, _ = _tridiag_quadrature(alphas[:, c], betas[:, c], [func])
                t_defl[0] += norms[c] ** 2 * first[0]

    t_rem = _fixed_remainder(oracle, f_list, Qmat, stream.child("psi"), m, n,
                             config.batch_width)
    return _finish(t_defl, t_rem, single, samples_used=m,
                   matvecs_used=oracle.matvec_count - start_count,
                   deflation_rank=rank, algorithm="hutchpp", config=config)


def _resolve_filter(filters, cycle, T, f_list):
    if filters is None:
        return default_filter(f_list[-1], T)
    if isinstance(filters, FilterPolynomial):
        return filters
    if isinstance(filters, SpectralFunction):
        return default_filter(filters, T)
    if callable(filters):
        return filters(cycle, T)
    return filters[cycle]


def restarted_trace(oracle, f, config, filters=None):
    """Low-memory variant: filter-restart the start block before deflating.

    Each of the `restarts` cycles runs a depth-q factorization and replaces
    the start block by Qbar_q [p(T_q)]_{:,1:b} R1 (matvec-free), so the final
    deflation space is the Krylov space of the filtered block. `filters` may
    be a FilterPolynomial, a list of them, a SpectralFunction target to
    interpolate per cycle, or a callable (cycle, T) -> FilterPolynomial.
    """
    if config.restarts < 1:
        raise ValueError("restarted_trace needs restarts >= 1")
    if config.block_size < 1 or config.ortho_depth < 1:
        raise ValueError("restarting needs block_size >= 1 and ortho_depth >= 1")
    f_list, single = as_family(f)
    stream = SampleStream(config.seed, config.distribution)
    d = oracle.d
    start_count = oracle.matvec_count

    omega = stream.child("omega").block(0, d, config.block_size)
    applied = []
    for cycle in range(config.restarts):
        T, basis = block_lanczos(
            oracle, omega, config.ortho_depth, 0,
            rng=stream.child("repair", "cycle", cycle).generator())
        filt = _resolve_filter(filters, cycle, T, f_list)
        applied.append(filt)
        omega = apply_filter(T, basis, filt)

    extra = oracle.matvec_count - start_count
    t_defl, t_rem, window, used = _deflate_and_sample(
        oracle, omega, f_list, config, stream, extra_matvecs=extra)
    est = _finish(t_defl, t_rem, single, samples_used=config.samples,
                  matvecs_used=used, deflation_rank=window,
                  algorithm="restart", config=config)
    est.filters = applied
    return est


def sampling_objective(T, ortho_depth, quad_degree, C, f, live_columns=None):
    """Matvec-cost objective for choosing the deflation depth.

    q*b minus quad_degree * C * (2 ||[f(T)]_{:,1:L}||_F^2 -
    ||[f(T)]_{1:L,1:L}||_F^2) with L = (q+1)b, all read from the depth-(q+n)
    recurrence; lower is cheaper.
    """
    b = T.block_size
    L = (ortho_depth + 1) * b
    if live_columns is not None:
        L = min(L, live_columns)
    w, V, idx = _live_eig(T)
    fw = f(w)
    Vl = V[idx < L, :]
    colw = np.sum(Vl ** 2, axis=0)
    cols_sq = float(np.sum(fw ** 2 * colw))
    G = (Vl * fw) @ Vl.T
    lead_sq = float(np.sum(G * G))
    return ortho_depth * b - quad_degree * C * (2.0 * cols_sq - lead_sq)


def _adaptive_remainder(oracle, func, Qmat, psi_stream, depth, C, delta,
                        hard_cap=1_000_000):
    """Shared sampling loop of the adaptive estimators.

    Draws one sample at a time, accumulating the trace and Frobenius
    estimates, and stops once the required sample count m_k (from the
    chi-squared underestimation factor) falls to at most k.
    """
    d = oracle.d
    t_rem = 0.0
    t_fro = 0.0
    k = 0
    warning = None
    while True:
        k += 1
        psi = psi_stream.columns(d, k - 1, 1)
        y = _project_out_columns(Qmat, psi)
        alphas, betas, norms = _scalar_lanczos_batch(oracle, y, depth)
        if norms[0] > 0.0:
            first, colsq = _tridiag_quadrature(alphas[:, 0], betas[:, 0], [func])
            t_rem += first[0] * norms[0] ** 2
            t_fro += colsq[0] * norms[0] ** 2
        m_k = C * t_fro / (k * alpha_k(k, delta))
        if m_k <= k:
            break
        if k >= hard_cap:
            warning = "sample cap reached before the adaptive stop"
            break
    return t_rem / k, k, warning


def adaptive_trace(oracle, f, config):
    """Adaptive deflated estimator targeting |est - tr(f(A))| <= eps with
    probability 1 - delta.

    Stage 1 extends the factorization until the sampling objective rises
    twice in a row (a local minimum) or the depth cap is hit; stage 2 runs
    the shared adaptive sampling loop on the deflated remainder.
    """
    f_list, single = as_family(f)
    if not single:
        raise ValueError("adaptive runs target a single function")
    func = f_list[0]
    if config.eps is None or config.delta is None:
        raise ValueError("adaptive runs need eps and delta")
    b = config.block_size
    if b < 1:
        raise ValueError("adaptive runs need block_size >= 1")
    n = config.quad_degree
    d = oracle.d
    C = c_eps_delta(config.eps, config.delta)
    q_max = config.max_depth if config.max_depth is not None else max(1, d // (2 * b))
    stream = SampleStream(config.seed, config.distribution)
    start_count = oracle.matvec_count

    omega = stream.child("omega").block(0, d, b)
    proc = BlockLanczosProcess(oracle, omega, ortho_depth=q_max + n + 1,
                               keep_blocks=q_max + 2,
                               rng=stream.child("repair", "main").generator())
    objective = []
    warning = None
    q_star = 0
    while True:
        if not proc.step():
            warning = "dimension bound reached before a local objective minimum"
            q_star = int(np.argmin(objective)) if objective else 0
            break
        depth_now = proc.iterations - n
        if depth_now < 0:
            continue
        T_now = proc.tridiagonal()
        objective.append(sampling_objective(T_now, depth_now, n, C, func,
                                            live_columns=proc.live_columns))
        if len(objective) >= 3 and objective[-1] > objective[-2] > objective[-3]:
            q_star = depth_now - 2
            break
        if depth_now >= q_max:
            warning = "depth cap reached before a local objective minimum"
            q_star = int(np.argmin(objective))
            break

    T = proc.tridiagonal()
    window = min((q_star + 1) * b, proc.live_columns)
    w, _, colw = _window_weights(T, window)
    t_defl = float(colw @ func(w))
    Qmat = np.concatenate(proc.blocks, axis=1)[:, :window]

    t_rem, k, warn2 = _adaptive_remainder(oracle, func, Qmat,
                                          stream.child("psi"), n, C,
                                          config.delta)
    return TraceEstimate(t_defl=t_defl, t_rem=t_rem, total=t_defl + t_rem,
                         samples_used=k,
                         matvecs_used=oracle.matvec_count - start_count,
                         deflation_rank=window, algorithm="adaptive",
                         config=config, warning=warning or warn2)


def adaptive_hutchpp(oracle, f, config, max_rounds=64):
    """A-Hutch++-style baseline sharing the adaptive sampling loop.

    Grows a sketch of f(A) in rounds of block_size columns (each column
    costs quad_degree matvecs), estimating the remaining Frobenius mass with
    the fresh columns before absorbing them, and stops growing at a local
    minimum of the matvec-cost objective. The remainder stage is byte-for-
    byte the same loop as adaptive_trace's.
    """
    f_list, single = as_family(f)
    if not single:
        raise ValueError("adaptive runs target a single function")
    func = f_list[0]
    if config.eps is None or config.delta is None:
        raise ValueError("adaptive runs need eps and delta")
    b = max(config.block_size, 1)
    n = config.quad_degree
    d = oracle.d
    C = c_eps_delta(config.eps, config.delta)
    stream = SampleStream(config.seed, config.distribution)
    start_count = oracle.matvec_count

    sketches = []
    Qmat = None
    objective = []
    rounds = 0
    while rounds < max_rounds:
        omega = stream.child("omega").block(rounds, d, b)
        fresh = []
        for j in range(b):
            Tj, Bj = block_lanczos(
                oracle, omega[:, j:j + 1], n - 1, 1,
                rng=stream.child("repair", rounds, j).generator())
            fresh.append(lanczos_apply(Tj, Bj, func)[:, 0])
        fresh = np.column_stack(fresh)
        resid = float(np.mean(np.sum(_project_out(Qmat, fresh) ** 2, axis=0)))
        objective.append(2 * n * rounds * b + n * C * resid)
        sketches.append(fresh)
        rounds += 1
        Q, _, rank = qrcp(np.concatenate(sketches, axis=1))
        Qmat = Q[:, :rank]
        if len(objective) >= 3 and objective[-1] > objective[-2] > objective[-3]:
            break

    # objective[i] scores the sketch built from the first i rounds
    best = int(np.argmin(objective))
    if best == 0:
        Qmat = None
    else:
        Q, _, rank = qrcp(np.concatenate(sketches[:best], axis=1))
        Qmat = Q[:, :rank]

    t_defl = 0.0
    if Qmat is not None and Qmat.shape[1] > 0:
        alphas, betas, norms = _scalar_lanczos_batch(oracle, Qmat, n)
        for c in range(Qmat.shape[1]):
            first, _ = _tridiag_quadrature(alphas[:, c], betas[:, c], [func])
            t_defl += norms[c] ** 2 * first[0]

    t_rem, k, warning = _adaptive_remainder(oracle, func, Qmat,
                                            stream.child("psi"), n, C,
                                            config.delta)
    rank = 0 if Qmat is None else Qmat.shape[1]
    return TraceEstimate(t_defl=t_defl, t_rem=t_rem, total=t_defl + t_rem,
                         samples_used=k,
                         matvecs_used=oracle.matvec_count - start_count,
                         deflation_rank=rank, algorithm="a-hutchpp",
                         config=config, warning=warning)


def projection_residual(op, f, basis, limit=4096):
    """||(I - QQ^T) f(A) (I - QQ^T)||_F / ||f(A)||_F by dense evaluation.

    Diagnostic only; refuses dimensions past `limit`. `basis` may be a
    KrylovBasis (its live prefix is used) or a plain orthonormal matrix.
    """
    d = op.d
    if d > limit:
        raise CapacityError(f"projection residual needs a dense pass; d={d} "
                            f"exceeds the limit {limit}")
    if hasattr(basis, "blocks"):
        Q = basis.matrix[:, :basis.live_columns]
    else:
        Q = basis
    if isinstance(op, DiagonalOperator):
        fvals = f(op.eigenvalues)
        B = np.diag(fvals)
        norm_f = float(np.linalg.norm(fvals))
    else:
        w, V = np.linalg.eigh(op.to_dense(limit))
        fvals = f(w)
        B = (V * fvals) @ V.T
        norm_f = float(np.linalg.norm(fvals))
    if Q is None or Q.shape[1] == 0:
        return 1.0
    M = B - Q @ (Q.T @ B)
    M = M - (M @ Q) @ Q.T
    return float(np.linalg.norm(M)) / norm_f
