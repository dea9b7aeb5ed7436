import numpy as np
import pytest

from ktrace import (DiagonalOperator, EstimatorConfig, SparseSymmetric,
                    SpectralFunction, adaptive_trace, block_lanczos,
                    build_spin_chain, build_synthetic_spectrum,
                    chebyshev_filter, cost_model, girard_hutchinson,
                    hutchpp_trace, krylov_trace, projection_residual,
                    restarted_trace, sampling_objective)
from ktrace.estimators import _fixed_remainder
from ktrace.stats import SampleStream


def dense_matfun(A, f):
    w, V = np.linalg.eigh(A)
    return (V * f(w)) @ V.T


def test_girard_zero_matrix():
    op = SparseSymmetric.from_dense(np.zeros((12, 12)))
    est = girard_hutchinson(op, 25, seed=0)
    assert est.total == 0.0


def test_girard_identity_mean_within_band():
    d, m = 10, 10_000
    op = SparseSymmetric.from_dense(np.eye(d))
    est = girard_hutchinson(op, m, seed=1)
    band = 4 * np.sqrt(2.0 * d / m)
    assert abs(est.total - d) <= band
    assert est.matvecs_used == m


def test_girard_rademacher_diagonal_zero_variance():
    op = DiagonalOperator([2.0, -1.0, 5.0, 0.5])
    est, samples = girard_hutchinson(op, 50, distribution="rademacher",
                                     seed=3, return_samples=True)
    assert np.all(samples == 6.5)
    assert est.total == 6.5


def test_girard_batch_width_invariance():
    op = SparseSymmetric.from_dense(np.diag(np.arange(1.0, 9.0)))
    a = girard_hutchinson(op, 700, seed=9, batch_width=700)
    b = girard_hutchinson(op, 700, seed=9, batch_width=13)
    assert a.total == b.total


def test_hutchpp_exact_on_low_rank_matrix():
    rng = np.random.default_rng(4)
    U = np.linalg.qr(rng.standard_normal((40, 5)))[0]
    A = U @ np.diag([5.0, 4.0, 3.0, 2.0, 1.0]) @ U.T
    op = SparseSymmetric.from_dense(A)
    f = SpectralFunction.polynomial([0.0, 1.0])
    cfg = EstimatorConfig(block_size=5, samples=0, quad_degree=8, seed=5)
    est = hutchpp_trace(op, f, cfg)
    assert abs(est.total - 15.0) <= 1e-8 * 15.0


def test_hutchpp_matvec_accounting():
    op = build_spin_chain(8, 0.3)
    cfg = EstimatorConfig(block_size=8, samples=13, quad_degree=50, seed=6)
    est = hutchpp_trace(op, SpectralFunction.exp_neg_beta(1.0), cfg)
    assert est.matvecs_used == 8 * 100 + 650 == 1450
    assert cost_model(cfg, "hutchpp").total == 1450


def test_hutchpp_zero_function():
    op = DiagonalOperator(np.linspace(1, 2, 16))
    cfg = EstimatorConfig(block_size=2, samples=4, quad_degree=4, seed=7)
    est = hutchpp_trace(op, SpectralFunction.polynomial([0.0]), cfg)
    assert est.total == 0.0


@pytest.mark.parametrize("fname,f", [
    ("exp(-x)", SpectralFunction.exp_neg_beta(1.0)),
    ("x^3", SpectralFunction.polynomial([0.0, 0.0, 0.0, 1.0])),
])
def test_krylov_trace_full_deflation_exact(fname, f):
    lam = np.linspace(0.5, 3.0, 24)
    op = DiagonalOperator(lam)
    cfg = EstimatorConfig(block_size=4, ortho_depth=5, samples=0,
                          quad_degree=6, seed=8)
    est = krylov_trace(op, f, cfg)
    exact = op.exact_trace(f)
    assert abs(est.total - exact) <= 1e-8 * abs(exact)
    # the run exceeds the dimension bound, so it stops early by design
    assert est.matvecs_used <= cost_model(cfg).total
    assert est.deflation_rank == 24


def test_krylov_trace_overdeflation_is_safe():
    # (q+1)b far beyond d: dead columns must not pollute the window trace
    lam = np.linspace(0.5, 3.0, 20)
    op = DiagonalOperator(lam)
    f = SpectralFunction.exp_neg_beta(1.0)
    cfg = EstimatorConfig(block_size=4, ortho_depth=8, samples=0,
                          quad_degree=5, seed=9)
    est = krylov_trace(op, f, cfg)
    exact = op.exact_trace(f)
    assert abs(est.total - exact) <= 1e-8 * abs(exact)
    assert est.deflation_rank == 20


def test_krylov_trace_matvec_accounting_table_rows():
    op = build_spin_chain(10, 0.3)
    f = SpectralFunction.exp_neg_beta(1.0)
    rows = [
        (EstimatorConfig(block_size=8, ortho_depth=30, samples=0, quad_degree=50),
         640, 248),
        (EstimatorConfig(block_size=0, ortho_depth=0, samples=13, quad_degree=50),
         650, 0),
        (EstimatorConfig(block_size=8, ortho_depth=30, samples=13, quad_degree=50),
         1290, 248),
        (EstimatorConfig(block_size=4, ortho_depth=10, samples=6, quad_degree=50),
         540, 44),
    ]
    for cfg, want_total, want_cols in rows:
        model = cost_model(cfg)
        assert model.total == want_total
        assert model.basis_columns == want_cols
        est = krylov_trace(op.fresh(), f, cfg)
        assert est.matvecs_used == want_total
        assert est.deflation_rank == want_cols


def test_krylov_trace_beta_family_single_run_cost():
    op = build_spin_chain(8, 0.3)
    cfg = EstimatorConfig(block_size=4, ortho_depth=8, samples=4,
                          quad_degree=20, seed=10)
    shift = float(np.linalg.eigvalsh(op.to_dense()).min())
    single = krylov_trace(op.fresh(),
                          SpectralFunction.exp_neg_beta(1.0, shift=shift), cfg)
    betas = np.logspace(-2, 2, 13)  # includes beta = 1 exactly
    family = [SpectralFunction.exp_neg_beta(b, shift=shift) for b in betas]
    multi = krylov_trace(op.fresh(), family, cfg)
    assert multi.matvecs_used == single.matvecs_used
    assert multi.total.shape == (13,)
    # the beta=1 entry of the family run equals the single run bitwise
    idx = int(np.argmin(np.abs(betas - 1.0)))
    assert betas[idx] == pytest.approx(1.0)
    assert multi.total[idx] == pytest.approx(single.total, rel=1e-12)


def test_krylov_trace_batch_width_invariance():
    op = build_spin_chain(6, 0.2)
    f = SpectralFunction.exp_neg_beta(0.5)
    base = dict(block_size=2, ortho_depth=4, samples=9, quad_degree=10, seed=11)
    a = krylov_trace(op.fresh(), f, EstimatorConfig(**base, batch_width=1))
    b = krylov_trace(op.fresh(), f, EstimatorConfig(**base, batch_width=4))
    assert a.total == b.total


def test_krylov_trace_intermediate_beta_median_beats_pure_quadratic():
    # combined deflation+sampling beats the same-cost pure quadratic run at
    # beta = 1 (dense eigendecomposition oracle, 100 paired runs)
    op = build_spin_chain(10, 0.3)
    f = SpectralFunction.exp_neg_beta(1.0)
    exact = float(np.sum(np.exp(-np.linalg.eigvalsh(op.to_dense()))))
    combined_cfg = dict(block_size=4, ortho_depth=30, samples=6, quad_degree=50)
    quad_cfg = dict(block_size=0, ortho_depth=0, samples=13, quad_degree=50)
    errs_combined, errs_quad = [], []
    for trial in range(100):
        est = krylov_trace(op.fresh(), f,
                           EstimatorConfig(**combined_cfg, seed=trial))
        errs_combined.append(abs(est.total - exact) / exact)
        est = krylov_trace(op.fresh(), f,
                           EstimatorConfig(**quad_cfg, seed=trial))
        errs_quad.append(abs(est.total - exact) / exact)
    assert np.median(errs_combined) < np.median(errs_quad)


def test_remainder_stage_unbiased_at_fixed_basis():
    # independent oracle: exact quadrature for cubic f makes the remainder an
    # unbiased estimator of tr(f(A)) - tr(window); check over 2000 seeds
    rng = np.random.default_rng(12)
    A = rng.standard_normal((40, 40))
    A = (A + A.T) / 2
    A /= np.linalg.norm(A, 2)
    op = SparseSymmetric.from_dense(A)
    f = SpectralFunction.polynomial([0.0, 0.0, 0.0, 1.0])
    exact = float(np.trace(dense_matfun(A, f)))
    T, basis = block_lanczos(op, rng.standard_normal((40, 2)), 3, 2)
    Qmat = basis.matrix[:, :basis.live_columns]
    t_defl = float(np.trace(Qmat.T @ dense_matfun(A, f) @ Qmat))
    vals = []
    for seed in range(2000):
        stream = SampleStream(seed).child("psi")
        rem = _fixed_remainder(op, [f], Qmat, stream, 1, 2, 1)
        vals.append(t_defl + rem[0])
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - exact) <= 4 * se


def test_deflation_reduces_residual_mass_on_average():
    lam = 1.0 / np.arange(1, 61) ** 2
    op = DiagonalOperator(lam)
    f = SpectralFunction.polynomial([0.0, 1.0])
    fA = np.diag(f(lam))
    means = []
    for q in (1, 3, 5, 8):
        vals = []
        for seed in range(50):
            stream = SampleStream(seed)
            om = stream.child("omega").block(0, 60, 2)
            _, basis = block_lanczos(op, om, q, 1)
            Q = basis.matrix[:, :basis.live_columns]
            M = fA - Q @ (Q.T @ fA)
            M = M - (M @ Q) @ Q.T
            vals.append(np.linalg.norm(M) ** 2)
        means.append(np.mean(vals))
    for lo, hi in zip(means[1:], means[:-1]):
        assert lo <= hi * 1.05


def test_adaptive_exact_rank_stops_immediately():
    rng = np.random.default_rng(13)
    U = np.linalg.qr(rng.standard_normal((40, 6)))[0]
    A = U @ np.diag([6.0, 5.0, 4.0, 3.0, 2.0, 1.0]) @ U.T
    op = SparseSymmetric.from_dense(A)
    f = SpectralFunction.polynomial([0.0, 1.0])
    cfg = EstimatorConfig(block_size=2, quad_degree=8, eps=0.05, delta=0.05,
                          seed=14)
    est = adaptive_trace(op, f, cfg)
    assert est.samples_used <= 2
    assert abs(est.total - 21.0) <= 0.05


def test_adaptive_loose_tolerance_stops_fast():
    op = DiagonalOperator(np.linspace(0.5, 2.0, 50))
    f = SpectralFunction.polynomial([0.0, 1.0])
    tr = op.exact_trace(f)
    cfg = EstimatorConfig(block_size=2, quad_degree=6, eps=10 * abs(tr),
                          delta=0.05, seed=15)
    est = adaptive_trace(op, f, cfg)
    assert est.samples_used <= 3


def test_adaptive_guarantee_monte_carlo_small():
    d = 400
    op = DiagonalOperator(np.arange(1, d + 1, dtype=float) ** -1.5)
    f = SpectralFunction.sqrt()
    exact = op.exact_trace(f)
    eps = 2.0 ** -3 * exact
    failures = 0
    for seed in range(40):
        cfg = EstimatorConfig(block_size=2, quad_degree=50, eps=eps,
                              delta=0.05, seed=seed)
        est = adaptive_trace(op.fresh(), f, cfg)
        failures += abs(est.total - exact) > eps
    assert failures <= 5


def test_adaptive_depth_cap_warns():
    op = DiagonalOperator(np.linspace(0.1, 1.0, 64))
    f = SpectralFunction.inverse()
    cfg = EstimatorConfig(block_size=2, quad_degree=5, eps=20.0, delta=0.05,
                          seed=16, max_depth=2)
    est = adaptive_trace(op, f, cfg)
    assert est.warning is not None


def test_restart_identity_filter_matches_plain_run():
    op = build_spin_chain(8, 0.3)
    f = SpectralFunction.exp_neg_beta(1.0)
    cfg = EstimatorConfig(block_size=4, ortho_depth=6, samples=5,
                          quad_degree=12, restarts=1, seed=17)
    const = chebyshev_filter(lambda x: np.ones_like(x), (-8.0, 8.0), 1)
    rest = restarted_trace(op.fresh(), f, cfg, filters=[const])
    plain = krylov_trace(op.fresh(), f, EstimatorConfig(
        block_size=4, ortho_depth=6, samples=5, quad_degree=12, seed=17))
    assert abs(rest.total - plain.total) <= 1e-10 * max(abs(plain.total), 1.0)


def test_restart_matvec_accounting():
    op = build_spin_chain(8, 0.3)
    f = SpectralFunction.exp_neg_beta(1.0)
    cfg = EstimatorConfig(block_size=4, ortho_depth=10, samples=6,
                          quad_degree=50, restarts=2, seed=18)
    est = restarted_trace(op, f, cfg)
    assert est.matvecs_used == 4 * (10 * 2 + 10 + 50) + 300 == 620
    assert cost_model(cfg, "restart").total == 620


def test_restart_improves_fast_decay_projection():
    d = 400
    f = SpectralFunction.inverse()
    op = build_synthetic_spectrum("fast", d, 1000.0, rho=0.95, f=f)
    from ktrace.experiments import _basis_after_restarts
    _, basis0 = _basis_after_restarts(op.fresh(), f, 2, 10, 0, seed=19)
    _, basis4 = _basis_after_restarts(op.fresh(), f, 2, 10, 4, seed=19)
    r0 = projection_residual(op, f, basis0)
    r4 = projection_residual(op, f, basis4)
    assert r4 <= r0


def test_cost_model_examples():
    assert cost_model(EstimatorConfig(block_size=0, samples=13,
                                      quad_degree=50), "girard").total == 650
    assert cost_model(EstimatorConfig(block_size=8, ortho_depth=30, samples=13,
                                      quad_degree=50)).total == 1290
    assert cost_model(EstimatorConfig(block_size=4, ortho_depth=10, samples=6,
                                      quad_degree=50)).total == 540
    model = cost_model(EstimatorConfig(block_size=4, ortho_depth=10, samples=6,
                                       quad_degree=50, restarts=2), "restart")
    assert (model.deflation, model.sampling) == (320, 300)


def test_sampling_objective_zero_function_is_pure_cost():
    op = DiagonalOperator(np.linspace(1, 2, 30))
    T, _ = block_lanczos(op, np.random.default_rng(20).standard_normal((30, 2)),
                         4, 3)
    f = SpectralFunction.polynomial([0.0])
    assert sampling_objective(T, 4, 3, 2.5, f) == pytest.approx(8.0)


def test_sampling_objective_zero_constant_increases():
    op = DiagonalOperator(np.linspace(1, 2, 30))
    rng = np.random.default_rng(21)
    T, _ = block_lanczos(op, rng.standard_normal((30, 2)), 5, 3)
    f = SpectralFunction.exp_neg_beta(1.0)
    vals = [sampling_objective(T, q, 3, 0.0, f) for q in range(4)]
    assert vals == sorted(vals)
    assert vals[0] == 0.0


def test_sampling_objective_matches_dense_expression_full_space():
    rng = np.random.default_rng(22)
    d, b, q, n = 24, 2, 8, 4  # (q+n)b = d: the recurrence captures A exactly
    A = rng.standard_normal((d, d))
    A = (A + A.T) / 2
    op = SparseSymmetric.from_dense(A)
    Z = rng.standard_normal((d, b))
    T, basis = block_lanczos(op, Z, q, n)
    f = SpectralFunction.exp_neg_beta(1.0)
    C = 3.7
    got = sampling_objective(T, q, n, C, f, live_columns=basis.live_columns)
    fA = dense_matfun(A, f)
    Q = basis.matrix[:, :basis.live_columns]
    want = q * b - n * C * (2 * np.linalg.norm(fA @ Q) ** 2
                            - np.linalg.norm(Q.T @ fA @ Q) ** 2)
    assert got == pytest.approx(want, rel=1e-6)


def test_projection_residual_limits():
    op = DiagonalOperator(np.linspace(1, 3, 12))
    f = SpectralFunction.inverse()
    full = np.eye(12)
    assert projection_residual(op, f, full) <= 1e-10
    empty = np.zeros((12, 0))
    assert projection_residual(op, f, empty) == 1.0


def test_projection_residual_krylov_below_naive():
    from ktrace import lanczos_apply, qrcp
    f = SpectralFunction.inverse()
    op = build_synthetic_spectrum("slow", 200, 1000.0, f=f)
    stream = SampleStream(23)
    omega = stream.child("omega").block(0, 200, 4)
    T, basis = block_lanczos(op.fresh(), omega, 8, 1)
    krylov = projection_residual(op, f, basis)
    Y = lanczos_apply(T, basis, f)
    Qn, _, rank = qrcp(Y)
    naive = projection_residual(op, f, Qn[:, :rank])
    assert krylov <= naive


def test_estimate_totals_are_consistent():
    op = build_spin_chain(6, 0.1)
    f = SpectralFunction.exp_neg_beta(0.3)
    cfg = EstimatorConfig(block_size=2, ortho_depth=4, samples=3,
                          quad_degree=8, seed=24)
    est = krylov_trace(op, f, cfg)
    assert est.total == est.t_defl + est.t_rem
    assert est.samples_used == 3
