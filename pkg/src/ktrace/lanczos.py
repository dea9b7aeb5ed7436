"""Block Lanczos with selective reorthogonalization and rank-deficient repair.

The factorization runs `ortho_depth + extra_depth` iterations but only
reorthogonalizes (and stores basis blocks) through the first `ortho_depth`;
the tail extends the block tridiagonal matrix without keeping its basis
vectors, which is what keeps quadrature depth cheap in vectors stored.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateInputError

_EPS = np.finfo(np.float64).eps


def qrcp(Z, floor=0.0):
    """Pivoted QR with the permutation folded back into R.

    Returns (Q, R, rank) with Q d x b orthonormal, R b x b satisfying
    Q @ R = Z up to roundoff and truncation, and rows rank..b-1 of R zeroed
    when the numerical rank falls short of b. Signs are normalized so the
    pivoted diagonal is nonnegative. `floor` is an absolute scale below
    which diagonal entries never count toward the rank (used by the
    recurrence to recognize blocks that are pure cancellation noise).
    """
    Z = np.asarray(Z, dtype=np.float64)
    d, b = Z.shape
    Q, R, piv = sla.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(max(d, b) * _EPS * (diag[0] if diag.size else 0.0), floor)
    rank = int(np.count_nonzero(diag > tol))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    R = R * signs[:, None]
    if rank < b:
        R[rank:, :] = 0.0
    folded = np.zeros_like(R)
    folded[:, piv] = R
    return Q, folded, rank


@dataclass
class BlockTridiagonal:
    """Block tridiagonal matrix from the Lanczos recurrence.

    `diag` holds the symmetric diagonal blocks, `sub` the subdiagonal
    coupling blocks (one fewer than diag), and `r1` the triangular factor of
    the starting block's QR. `live_mask`, when set, flags the indices whose
    basis direction is genuine; exhausted directions are padded with exact
    zeros and decouple from the rest of the matrix.
    """

    block_size: int
    diag: list = field(default_factory=list)
    sub: list = field(default_factory=list)
    r1: np.ndarray = None
    live_mask: np.ndarray = None

    @property
    def n_blocks(self):
        return len(self.diag)

    def assemble(self, depth=None):
        """Dense symmetric matrix of the leading `depth` blocks."""
        k = self.n_blocks if depth is None else depth
        if not 1 <= k <= self.n_blocks:
            raise ValueError(f"depth {k} outside 1..{self.n_blocks}")
        b = self.block_size
        T = np.zeros((k * b, k * b))
        for i in range(k):
            T[i * b:(i + 1) * b, i * b:(i + 1) * b] = self.diag[i]
        for i in range(k - 1):
            blockR = self.sub[i]
            T[(i + 1) * b:(i + 2) * b, i * b:(i + 1) * b] = blockR
            T[i * b:(i + 1) * b, (i + 1) * b:(i + 2) * b] = blockR.T
        return T


@dataclass
class KrylovBasis:
    """Stored orthonormal prefix of the block Krylov basis."""

    d: int
    block_size: int
    blocks: list
    live_columns: int
    ortho_defect: float = 0.0

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def matrix(self):
        return np.concatenate(self.blocks, axis=1)

    def leading(self, n_blocks):
        """The matrix of the first `n_blocks` stored blocks."""
        return np.concatenate(self.blocks[:n_blocks], axis=1)


def _orthogonalize(w, against, passes=2):
    for _ in range(passes):
        for B in against:
            w = w - B @ (B.T @ w)
    return w


def _fresh_columns(d, count, against, rng):
    """Fresh random directions orthogonal to `against`; unfillable columns stay zero.

    Returns (block, live) where live counts the successfully generated
    columns; they occupy the leading positions of the block.
    """
    out = np.zeros((d, count))
    accepted = []
    live = 0
    for idx in range(count):
        found = False
        for _ in range(5):
            w = rng.standard_normal(d)
            w = _orthogonalize(w[:, None], against)[:, 0]
            for c in accepted:
                w = w - c * (c @ w)
            nrm = np.linalg.norm(w)
            if nrm > 1e-8 * np.sqrt(d):
                w = w / nrm
                # one polishing pass keeps the new column orthonormal at 1e-13
                w = _orthogonalize(w[:, None], against)[:, 0]
                for c in accepted:
                    w = w - c * (c @ w)
                w = w / np.linalg.norm(w)
                out[:, idx] = w
                accepted.append(w)
                live += 1
                found = True
                break
        if not found:
            break  # space exhausted: remaining columns stay zero
    return out, live


class BlockLanczosProcess:
    """Stepwise driver for the block Lanczos recurrence.

    Stores basis blocks only through `keep_blocks`; reorthogonalizes
    iterations 2..ortho_depth against the stored prefix (two-pass classical
    Gram-Schmidt). Rank-deficient new blocks are repaired with fresh random
    directions so the block size stays constant.
    """

    def __init__(self, oracle, start_block, ortho_depth, keep_blocks, rng=None):
        Z = np.asarray(start_block, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z[:, None]
        if not np.any(Z):
            raise DegenerateInputError("start block is identically zero")
        self.oracle = oracle
        self.d = Z.shape[0]
        self.block_size = Z.shape[1]
        self.ortho_depth = ortho_depth
        self.keep_blocks = keep_blocks
        self.rng = rng if rng is not None else np.random.default_rng(0x6B7472)

        Q1, R1, rank = qrcp(Z)
        if rank < self.block_size:
            fresh, live = _fresh_columns(self.d, self.block_size - rank,
                                         [Q1[:, :rank]], self.rng)
            Q1 = np.concatenate([Q1[:, :rank], fresh], axis=1)
            self.live_columns = rank + live
        else:
            self.live_columns = self.block_size
        self._block_live = [self.live_columns]
        self.r1 = R1
        self.blocks = [Q1]
        self.diag = []
        self.sub = []  # R_{k+1} produced at iteration k
        self._prev = None
        self._curr = Q1
        self._coupling = None
        self.iterations = 0
        # the Krylov space cannot exceed d dimensions; running the
        # unorthogonalized tail past that bound only manufactures spurious
        # spectral content (Ritz values escaping the hull), so stop there
        self.max_iterations = -(-self.d // self.block_size) + 1

    def step(self):
        """Run one Lanczos iteration; returns False once the dimension bound
        makes further extension vacuous."""
        if self.iterations >= self.max_iterations:
            return False
        k = self.iterations + 1
        W = self.oracle.apply(self._curr)
        scale = np.linalg.norm(W)
        if k > 1:
            W = W - self._prev @ self._coupling.T
        M = self._curr.T @ W
        M = 0.5 * (M + M.T)
        W = W - self._curr @ M
        if 2 <= k <= self.ortho_depth:
            W = _orthogonalize(W, self.blocks)

        # diagonal entries at the cancellation-noise level of A Q_k mean the
        # direction is spent, not that a genuine new block was found
        Qn, Rn, rank = qrcp(W, floor=max(self.d, self.block_size) * _EPS * scale)
        block_live = self.block_size
        if rank < self.block_size:
            if len(self.blocks) == k:
                # full history stored: replace the deficient columns with
                # fresh directions orthogonal to everything generated so far
                against = list(self.blocks)
                against.append(Qn[:, :rank])
                fresh, live = _fresh_columns(self.d, self.block_size - rank,
                                             against, self.rng)
                Qn = np.concatenate([Qn[:, :rank], fresh], axis=1)
                block_live = rank + live
            else:
                # unstored history: an injected direction could duplicate a
                # forgotten block and poison the recurrence with spurious
                # couplings, so the spent directions go dead instead
                Qn = np.concatenate(
                    [Qn[:, :rank],
                     np.zeros((self.d, self.block_size - rank))], axis=1)
                block_live = rank

        self.diag.append(M)
        self.sub.append(Rn)
        self._block_live.append(block_live)
        if k + 1 <= self.keep_blocks:
            if len(self.blocks) * self.block_size == self.live_columns:
                self.live_columns += block_live
            self.blocks.append(Qn)
        self._prev, self._curr, self._coupling = self._curr, Qn, Rn
        self.iterations = k
        return True

    def tridiagonal(self, depth=None):
        """BlockTridiagonal of the first `depth` completed iterations."""
        k = self.iterations if depth is None else depth
        mask = None
        if any(live < self.block_size for live in self._block_live[:k]):
            mask = np.concatenate([
                np.arange(self.block_size) < live
                for live in self._block_live[:k]])
        return BlockTridiagonal(self.block_size, self.diag[:k],
                                self.sub[:k - 1], self.r1, live_mask=mask)

    def basis(self, n_blocks=None):
        p = len(self.blocks) if n_blocks is None else min(n_blocks, len(self.blocks))
        blocks = self.blocks[:p]
        live = min(self.live_columns, p * self.block_size)
        mat = np.concatenate(blocks, axis=1)[:, :live]
        defect = float(np.max(np.abs(mat.T @ mat - np.eye(live)))) if live else 0.0
        return KrylovBasis(self.d, self.block_size, blocks, live, defect)


def block_lanczos(oracle, start_block, ortho_depth, extra_depth, rng=None):
    """Run ortho_depth + extra_depth block Lanczos iterations.

    Returns (T, basis): T spans every iteration; basis keeps only the first
    ortho_depth + 1 block columns, which are reorthogonalized and certified
    orthonormal. extra_depth = 0 is allowed (basis-building only).
    """
    if ortho_depth < 0 or extra_depth < 0 or ortho_depth + extra_depth < 1:
        raise ValueError("need ortho_depth >= 0, extra_depth >= 0, and at "
                         "least one iteration")
    proc = BlockLanczosProcess(oracle, start_block, ortho_depth,
                               ortho_depth + 1, rng=rng)
    for _ in range(ortho_depth + extra_depth):
        if not proc.step():
            break
    return proc.tridiagonal(), proc.basis(ortho_depth + 1)


def recurrence_residual(oracle, T, basis):
    """Frobenius norm of A Qbar_p - Qbar_p T_p - Q_{p+1} R_{p+1} E_p^T.

    p is basis.n_blocks - 1; T must extend at least one block past p so the
    trailing coupling factor is available (extra_depth >= 1 runs).
    """
    p = basis.n_blocks - 1
    if p < 1:
        raise ValueError("basis must hold at least two blocks")
    if T.n_blocks < p + 1:
        raise ValueError("T must extend at least one block past the basis")
    b = T.block_size
    Qp = basis.leading(p)
    AQ = oracle.apply(Qp)
    Tp = T.assemble(p)
    resid = AQ - Qp @ Tp
    resid[:, -b:] -= basis.blocks[p] @ T.sub[p - 1]
    return float(np.linalg.norm(resid))
