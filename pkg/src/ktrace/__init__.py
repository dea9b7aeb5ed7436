"""Krylov-aware stochastic trace estimation for symmetric matrix functions.

Estimate tr(f(A)) for a symmetric operator A accessed only through
matrix-vector products, by deflating a block Krylov space (read off a
principal submatrix of f of the block tridiagonal matrix) and applying the
quadratic trace estimator to the remainder.
"""

from .errors import (CapacityError, DegenerateInputError, DimensionMismatchError,
                     DomainError, FilterDegreeError, KtraceError, ParseError,
                     UnsupportedFunctionError)
from .estimators import (EstimatorConfig, TraceEstimate, adaptive_hutchpp,
                         adaptive_trace, cost_model, girard_hutchinson,
                         hutchpp_trace, krylov_trace, projection_residual,
                         restarted_trace, sampling_objective)
from .kernels import BACKEND
from .lanczos import (BlockLanczosProcess, BlockTridiagonal, KrylovBasis,
                      block_lanczos, qrcp, recurrence_residual)
from .matfun import (FilterPolynomial, SpectralFunction, apply_filter,
                     beta_grid_family, chebyshev_filter, default_filter,
                     eval_matrix_function, krylov_aware_quadratic,
                     lanczos_apply, lanczos_quadratic_form)
from .operators import (DiagonalOperator, MatrixOracle, SparseSymmetric,
                        build_spin_chain, build_synthetic_spectrum,
                        load_matrix_market)
from .stats import (SampleStream, alpha_k, c_eps_delta, chi2_cdf, chi2_inv_cdf,
                    percentile)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BlockLanczosProcess", "BlockTridiagonal", "CapacityError",
    "DegenerateInputError", "DiagonalOperator", "DimensionMismatchError",
    "DomainError", "EstimatorConfig", "FilterDegreeError", "FilterPolynomial",
    "KrylovBasis", "KtraceError", "MatrixOracle", "ParseError", "SampleStream",
    "SparseSymmetric", "SpectralFunction", "TraceEstimate",
    "UnsupportedFunctionError", "adaptive_hutchpp", "adaptive_trace",
    "alpha_k", "apply_filter", "beta_grid_family", "block_lanczos",
    "build_spin_chain", "build_synthetic_spectrum", "c_eps_delta",
    "chebyshev_filter", "chi2_cdf", "chi2_inv_cdf", "cost_model",
    "default_filter", "eval_matrix_function", "girard_hutchinson",
    "hutchpp_trace", "krylov_aware_quadratic", "krylov_trace",
    "lanczos_apply", "lanczos_quadratic_form", "load_matrix_market",
    "percentile", "projection_residual", "qrcp", "recurrence_residual",
    "restarted_trace", "sampling_objective",
]
