#!/usr/bin/env python3
"""Benchmark the compiled CSR kernel against the numpy fallback.

Times blocked matvecs on spin-chain Hamiltonians and random sparse matrices
for a few block widths, plus one end-to-end estimator run per backend.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from ktrace import EstimatorConfig, SpectralFunction, build_spin_chain, krylov_trace
from ktrace.kernels import BACKEND, fallback

try:
    from ktrace.kernels import _csr
except ImportError:
    _csr = None


def time_kernel(impl, mat, X, repeats):
    indptr = mat.indptr.astype(np.int64)
    indices = mat.indices.astype(np.int64)
    out = np.empty_like(X)
    impl.csr_matvec_block(indptr, indices, mat.data, X, out)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        impl.csr_matvec_block(indptr, indices, mat.data, X, out)
    return (time.perf_counter() - start) / repeats


def cases():
    for N in (10, 12):
        chain = build_spin_chain(N, 0.3)
        yield f"spin N={N} (d={chain.d}, nnz={chain.nnz})", chain.to_scipy()
    rng = np.random.default_rng(0)
    for d, density in ((5000, 2e-3), (20000, 5e-4)):
        mat = sp.random(d, d, density=density, random_state=rng, format="csr")
        mat = ((mat + mat.T) * 0.5).tocsr()
        mat.sort_indices()
        yield f"random d={d} (nnz={mat.nnz})", mat


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    print(f"selected backend at import: {BACKEND}")
    if _csr is None:
        print("compiled kernel unavailable; timing the fallback only")

    header = f"{'case':36s} {'k':>3s} {'numpy (us)':>12s} {'cython (us)':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(1)
    for name, mat in cases():
        for k in (1, 4, 16):
            X = np.ascontiguousarray(rng.standard_normal((mat.shape[0], k)))
            t_np = time_kernel(fallback, mat, X, args.repeats)
            if _csr is not None:
                t_cy = time_kernel(_csr, mat, X, args.repeats)
                print(f"{name:36s} {k:3d} {t_np * 1e6:12.1f} {t_cy * 1e6:12.1f} "
                      f"{t_np / t_cy:8.2f}x")
            else:
                print(f"{name:36s} {k:3d} {t_np * 1e6:12.1f} {'-':>12s} {'-':>8s}")

    # end-to-end: one deflated estimate per backend
    chain = build_spin_chain(10, 0.3)
    cfg = EstimatorConfig(block_size=8, ortho_depth=30, samples=13,
                          quad_degree=50, seed=0)
    f = SpectralFunction.exp_neg_beta(1.0)
    for label, impl in (("numpy", fallback), ("cython", _csr)):
        if impl is None:
            continue
        import ktrace.kernels as kernels
        prev = kernels._impl
        kernels._impl = impl
        try:
            start = time.perf_counter()
            est = krylov_trace(chain.fresh(), f, cfg)
            elapsed = time.perf_counter() - start
        finally:
            kernels._impl = prev
        print(f"end-to-end estimator [{label:6s}]: {elapsed * 1e3:8.1f} ms "
              f"(total={est.total:.6e})")


if __name__ == "__main__":
    main()
