import numpy as np
import pytest
import scipy.linalg as sla

from ktrace import (DegenerateInputError, DiagonalOperator, SparseSymmetric,
                    block_lanczos, qrcp, recurrence_residual)
from ktrace.lanczos import BlockLanczosProcess
from ktrace.stats import SampleStream


def dense_krylov_space(A, start, depth, tol=1e-10):
    """Reference basis of span{Z, AZ, ..., A^{depth-1} Z}, rank truncated."""
    basis = np.linalg.qr(np.atleast_2d(start.T).T)[0]
    last = basis
    for _ in range(depth - 1):
        W = A @ last
        for _ in range(2):
            W = W - basis @ (basis.T @ W)
        u, s, _ = np.linalg.svd(W, full_matrices=False)
        keep = s > tol * max(1.0, s[0] if s.size else 0.0)
        if not np.any(keep):
            break
        last = u[:, keep]
        basis = np.concatenate([basis, last], axis=1)
    return basis


def test_qrcp_identity_prefix():
    Z = np.eye(6)[:, :3]
    Q, R, rank = qrcp(Z)
    assert rank == 3
    assert np.allclose(Q, Z)
    assert np.allclose(R, np.eye(3))


def test_qrcp_duplicate_columns():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(8)
    Q, R, rank = qrcp(np.column_stack([z, z]))
    assert rank == 1
    assert np.allclose(R[1, :], 0.0)
    assert np.allclose(Q @ R, np.column_stack([z, z]), atol=1e-13)


def test_qrcp_reconstruction_random():
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((20, 3))
    Q, R, rank = qrcp(Z)
    assert rank == 3
    assert np.linalg.norm(Q @ R - Z) <= 1e-13 * np.linalg.norm(Z)
    assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-13


def test_qrcp_zero_block():
    Q, R, rank = qrcp(np.zeros((5, 2)))
    assert rank == 0
    assert np.allclose(R, 0.0)


def test_identity_oracle_full_deficiency():
    op = SparseSymmetric.from_dense(np.eye(7))
    rng = np.random.default_rng(2)
    Z = rng.standard_normal((7, 2))
    T, basis = block_lanczos(op, Z, 1, 1)
    assert np.allclose(T.diag[0], np.eye(2), atol=1e-14)
    assert np.allclose(T.sub[0], 0.0)
    assert recurrence_residual(op, T, basis) <= 1e-12


def test_diagonal_eigenvalue_recovery():
    op = DiagonalOperator(np.arange(1.0, 9.0))
    rng = np.random.default_rng(3)
    T, basis = block_lanczos(op, rng.standard_normal(8), 7, 1)
    eigs = np.linalg.eigvalsh(T.assemble())
    assert np.allclose(np.sort(eigs), np.arange(1.0, 9.0), atol=1e-8)


def test_clustered_spectrum_no_early_termination():
    lam = np.concatenate([100 * np.ones(10), 0.1 * np.ones(100),
                          0.001 * np.ones(100)])
    op = DiagonalOperator(lam)
    stream = SampleStream(7)
    omega = stream.child("omega").block(0, 210, 4)
    T, basis = block_lanczos(op, omega, 20, 1,
                             rng=stream.child("repair").generator())
    assert basis.n_blocks == 21
    assert basis.live_columns == 84
    assert basis.ortho_defect <= 1e-10


def test_zero_start_block_rejected():
    op = DiagonalOperator(np.ones(4))
    with pytest.raises(DegenerateInputError):
        block_lanczos(op, np.zeros((4, 2)), 1, 1)


def test_orthonormality_certificate():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((120, 120))
    op = SparseSymmetric.from_dense((A + A.T) / 2)
    T, basis = block_lanczos(op, rng.standard_normal((120, 3)), 12, 5)
    Q = basis.matrix
    assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) <= 1e-10
    assert basis.ortho_defect <= 1e-10


def test_constant_block_shapes_after_repairs():
    lam = np.concatenate([np.ones(3), 2 * np.ones(3), np.linspace(3, 4, 24)])
    op = DiagonalOperator(lam)
    T, basis = block_lanczos(op, np.random.default_rng(0).standard_normal((30, 3)), 6, 2)
    for M in T.diag:
        assert M.shape == (3, 3)
    for R in T.sub:
        assert R.shape == (3, 3)
    for Q in basis.blocks:
        assert Q.shape == (30, 3)


def test_assembled_matrix_symmetric():
    rng = np.random.default_rng(8)
    A = rng.standard_normal((40, 40))
    op = SparseSymmetric.from_dense((A + A.T) / 2)
    T, _ = block_lanczos(op, rng.standard_normal((40, 2)), 5, 3)
    dense = T.assemble()
    assert np.allclose(dense, dense.T)


def test_recurrence_residual_small_exact_case():
    rng = np.random.default_rng(9)
    A = np.diag(np.arange(1.0, 7.0))
    op = SparseSymmetric.from_dense(A)
    T, basis = block_lanczos(op, rng.standard_normal(6), 3, 1)
    assert recurrence_residual(op, T, basis) <= 1e-12 * np.linalg.norm(A)


def test_recurrence_residual_random_sparse():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((200, 200))
    A = (A + A.T) / 2
    op = SparseSymmetric.from_dense(A)
    T, basis = block_lanczos(op, rng.standard_normal((200, 4)), 10, 1)
    norm_est = np.linalg.norm(A, 2)
    assert recurrence_residual(op, T, basis) <= 1e-10 * norm_est * np.sqrt(basis.matrix.shape[1])


def test_shift_invariance_of_basis():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((80, 80))
    A = (A + A.T) / 2
    op1 = SparseSymmetric.from_dense(A)
    op2 = SparseSymmetric.from_dense(A + 2.5 * np.eye(80))
    Z = rng.standard_normal((80, 2))
    _, b1 = block_lanczos(op1, Z, 6, 1)
    _, b2 = block_lanczos(op2, Z, 6, 1)
    angles = sla.subspace_angles(b1.matrix, b2.matrix)
    assert angles.max() <= 1e-8


def test_subspace_identity_desk_scale():
    rng = np.random.default_rng(12)
    d, b, q, n = 96, 2, 4, 5
    A = rng.standard_normal((d, d))
    A = (A + A.T) / 2
    op = SparseSymmetric.from_dense(A)
    Z = rng.standard_normal((d, b))
    _, basis = block_lanczos(op, Z, q, n)
    S1 = dense_krylov_space(A, basis.matrix, n)
    S2 = dense_krylov_space(A, Z, q + n)
    assert S1.shape[1] == S2.shape[1]
    assert sla.subspace_angles(S1, S2).max() <= 1e-8


def test_tail_blocks_not_stored():
    op = DiagonalOperator(np.linspace(1, 2, 64))
    T, basis = block_lanczos(op, np.random.default_rng(1).standard_normal((64, 2)), 3, 10)
    assert basis.n_blocks == 4
    assert T.n_blocks == 13


def test_process_live_columns_cap():
    # exhausting the space leaves later stored blocks dead, live count capped
    op = DiagonalOperator(np.linspace(0.5, 3.0, 12))
    stream = SampleStream(3)
    proc = BlockLanczosProcess(op, stream.child("omega").block(0, 12, 4),
                               ortho_depth=6, keep_blocks=7,
                               rng=stream.child("repair").generator())
    for _ in range(6):
        proc.step()
    assert proc.live_columns == 12
    basis = proc.basis(7)
    live = basis.matrix[:, :basis.live_columns]
    assert np.max(np.abs(live.T @ live - np.eye(12))) <= 1e-10
    dead = basis.matrix[:, basis.live_columns:]
    assert np.all(dead == 0.0)
