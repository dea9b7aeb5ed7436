import numpy as np
import pytest
import scipy.sparse as sp

from ktrace.kernels import BACKEND, csr_matvec_block, fallback


def _random_csr(d, density, rng):
    mat = sp.random(d, d, density=density, random_state=rng, format="csr")
    mat = (mat + mat.T) * 0.5
    mat.sort_indices()
    return mat


@pytest.mark.parametrize("d,density,k", [(1, 1.0, 1), (17, 0.3, 3),
                                         (120, 0.05, 8), (64, 0.0, 2)])
def test_kernel_matches_dense(d, density, k):
    rng = np.random.default_rng(d)
    mat = _random_csr(d, density, rng)
    X = rng.standard_normal((d, k))
    got = csr_matvec_block(mat.indptr.astype(np.int64),
                           mat.indices.astype(np.int64), mat.data, X)
    want = mat.toarray() @ X
    assert np.allclose(got, want, atol=1e-13)


def test_empty_rows_are_exactly_zero():
    # row 1 empty; reduceat would otherwise copy a neighboring segment
    mat = sp.csr_matrix(np.array([[2.0, 0.0, 0.0],
                                  [0.0, 0.0, 0.0],
                                  [0.0, 0.0, 3.0]]))
    X = np.ones((3, 2))
    out = np.empty((3, 2))
    fallback.csr_matvec_block(mat.indptr.astype(np.int64),
                              mat.indices.astype(np.int64), mat.data, X, out)
    assert np.array_equal(out[1], [0.0, 0.0])
    assert np.array_equal(out[0], [2.0, 2.0])


def test_fallback_agrees_with_selected_backend():
    rng = np.random.default_rng(3)
    mat = _random_csr(200, 0.02, rng)
    X = rng.standard_normal((200, 5))
    indptr = mat.indptr.astype(np.int64)
    indices = mat.indices.astype(np.int64)
    out_fb = np.empty_like(X)
    fallback.csr_matvec_block(indptr, indices, mat.data,
                              np.ascontiguousarray(X), out_fb)
    out_sel = csr_matvec_block(indptr, indices, mat.data, X)
    assert np.allclose(out_fb, out_sel, rtol=1e-14, atol=1e-15)


def test_backend_reported():
    assert BACKEND in ("cython", "numpy")
