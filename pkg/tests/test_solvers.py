import numpy as np
import pytest

from cohaudit import (
    DimensionError,
    DomainError,
    EnsembleSpec,
    MeasurementMatrix,
    SparseSignal,
    bpdn,
    cosamp,
    generate,
    hard_threshold,
    iht,
    lasso,
    omp,
    phase_curve,
    recovery_trial,
    soft_threshold,
    wilson_interval,
)


def test_sparse_signal_roundtrip():
    s = SparseSignal(dim=6, support=[1, 4], values=[2.0, -3.0])
    x = s.to_dense()
    assert np.array_equal(x, [0.0, 2.0, 0.0, 0.0, -3.0, 0.0])
    back = SparseSignal.from_dense(x)
    assert np.array_equal(back.support, s.support)
    assert np.array_equal(back.values, s.values)


def test_sparse_signal_validation():
    with pytest.raises(ValueError):
        SparseSignal(dim=4, support=[2, 2], values=[1.0, 1.0])
    with pytest.raises(ValueError):
        SparseSignal(dim=4, support=[3, 1], values=[1.0, 1.0])
    with pytest.raises(ValueError):
        SparseSignal(dim=4, support=[1], values=[0.0])
    with pytest.raises(ValueError):
        SparseSignal(dim=4, support=[4], values=[1.0])
    with pytest.raises(DimensionError):
        SparseSignal(dim=4, support=[1], values=[1.0, 2.0])


def test_hard_threshold_ties_pick_lower_index():
    out = hard_threshold(np.array([1.0, -1.0, 1.0, 0.5]), 2)
    assert np.array_equal(out, [1.0, -1.0, 0.0, 0.0])
    assert np.array_equal(hard_threshold(np.array([1.0, 2.0]), 0), [0.0, 0.0])


def test_soft_threshold_values():
    v = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert np.array_equal(soft_threshold(v, 1.0), [-1.0, 0.0, 0.0, 0.0, 1.0])


def test_omp_single_atom(gauss_100x500):
    y = 0.8 * gauss_100x500.data[:, 7]
    res = omp(gauss_100x500, y, k=1)
    assert np.flatnonzero(res.estimate).tolist() == [7]
    assert abs(res.estimate[7] - 0.8) <= 1e-10
    assert res.residual_norm <= 1e-10
    assert res.converged


def test_omp_orthonormal_exact(ortho_30):
    rng = np.random.default_rng(4)
    x = np.zeros(30)
    x[[2, 9, 17, 21, 28]] = rng.standard_normal(5)
    y = ortho_30 @ x
    res = omp(ortho_30, y, k=5)
    assert np.max(np.abs(res.estimate - x)) <= 1e-10


def test_omp_zero_rhs(gauss_100x500):
    res = omp(gauss_100x500, np.zeros(100), k=3)
    assert np.array_equal(res.estimate, np.zeros(500))
    assert res.converged


def test_omp_residual_tol_stop(gauss_100x500):
    rng = np.random.default_rng(5)
    x = np.zeros(500)
    x[[3, 77, 200]] = rng.standard_normal(3)
    y = gauss_100x500.data @ x
    res = omp(gauss_100x500, y, residual_tol=1e-8)
    assert res.residual_norm <= 1e-8
    assert res.converged
    assert np.sum(res.estimate != 0.0) <= 4


def test_omp_residual_nonincreasing(gauss_100x500):
    rng = np.random.default_rng(6)
    y = rng.standard_normal(100)
    norms = [omp(gauss_100x500, y, k=k).residual_norm for k in range(1, 12)]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_omp_recovery_rate(gauss_100x500):
    wins = sum(recovery_trial(gauss_100x500, 5, "omp", 0.0, 100 + t).success
               for t in range(100))
    assert wins >= 95


def test_omp_validates_k(gauss_100x500):
    with pytest.raises(DomainError):
        omp(gauss_100x500, np.zeros(100), k=101)
    with pytest.raises(ValueError):
        omp(gauss_100x500, np.zeros(100))


def test_iht_identity_one_step():
    m = MeasurementMatrix(np.eye(4))
    y = np.array([0.0, 3.0, 0.0, -1.0])
    res = iht(m, y, 2)
    assert np.array_equal(res.estimate, y)
    assert res.converged
    assert res.iterations <= 2
    assert np.array_equal(res.estimate, hard_threshold(m.data.T @ y, 2))


def test_iht_bad_step(gauss_200x400):
    res = iht(gauss_200x400, np.ones(200), 5, step=0.0)
    assert np.array_equal(res.estimate, np.zeros(400))
    assert not res.converged
    assert "bad-step" in res.flags


def test_iht_recovery_rate(gauss_200x400):
    hits = 0
    for t in range(50):
        tr = recovery_trial(gauss_200x400, 8, "iht", 0.0, 7000 + t,
                            solver_options={"max_iter": 500, "tol": 1e-12})
        hits += tr.rel_error <= 1e-6
    assert hits >= 45


def test_iht_sparsity_capped(gauss_200x400):
    rng = np.random.default_rng(8)
    y = rng.standard_normal(200)
    res = iht(gauss_200x400, y, 6, max_iter=50)
    assert np.sum(res.estimate != 0.0) <= 6


def test_cosamp_orthonormal_one_iteration(ortho_30):
    rng = np.random.default_rng(9)
    x = np.zeros(30)
    x[[1, 5, 22]] = rng.standard_normal(3)
    y = ortho_30 @ x
    res = cosamp(ortho_30, y, 3)
    assert np.max(np.abs(res.estimate - x)) <= 1e-10
    assert res.iterations == 1
    assert res.converged


def test_cosamp_zero_rhs(gauss_100x500):
    res = cosamp(gauss_100x500, np.zeros(100), 4)
    assert np.array_equal(res.estimate, np.zeros(500))
    assert res.converged


def test_cosamp_recovery_rate(gauss_100x500):
    wins = sum(recovery_trial(gauss_100x500, 10, "cosamp", 0.0, 300 + t).success
               for t in range(50))
    assert wins >= 40


def test_cosamp_sparsity_capped(gauss_100x500):
    rng = np.random.default_rng(10)
    y = rng.standard_normal(100)
    res = cosamp(gauss_100x500, y, 7, max_iter=20)
    assert np.sum(res.estimate != 0.0) <= 7


@pytest.mark.parametrize("solver_fn,kwargs", [
    (omp, {"k": 4}),
    (iht, {"k": 4, "max_iter": 200}),
    (cosamp, {"k": 4, "max_iter": 20}),
])
def test_solver_scaling_by_two_is_exact(gauss_100x500, solver_fn, kwargs):
    # scaling y by a power of two scales every floating-point intermediate
    # exactly, so the outputs must match bit for bit
    rng = np.random.default_rng(11)
    x = np.zeros(500)
    x[[10, 50, 90, 130]] = rng.standard_normal(4)
    y = gauss_100x500.data @ x
    a = solver_fn(gauss_100x500, y, **kwargs)
    b = solver_fn(gauss_100x500, 2.0 * y, **kwargs)
    assert np.array_equal(2.0 * a.estimate, b.estimate)


def test_lasso_orthonormal_closed_form(ortho_30):
    rng = np.random.default_rng(12)
    y = rng.standard_normal(30)
    res = lasso(ortho_30, y, 0.3, max_iter=5000, tol=1e-12)
    oracle = soft_threshold(ortho_30.T @ y, 0.3)
    assert np.max(np.abs(res.estimate - oracle)) <= 1e-8
    assert res.converged


def test_lasso_objective_never_increases(gauss_200x400):
    rng = np.random.default_rng(13)
    y = rng.standard_normal(200)
    res = lasso(gauss_200x400, y, 0.05, max_iter=300)
    trace = res.info["objective_trace"]
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_lasso_zero_lam_is_least_squares_fit(ortho_30):
    rng = np.random.default_rng(14)
    y = rng.standard_normal(30)
    res = lasso(ortho_30, y, 0.0, max_iter=2000, tol=1e-14)
    assert res.residual_norm <= 1e-8


def test_bpdn_large_epsilon_returns_zero(gauss_100x500):
    rng = np.random.default_rng(15)
    y = rng.standard_normal(100)
    res = bpdn(gauss_100x500, y, float(np.linalg.norm(y)) + 1.0)
    assert np.array_equal(res.estimate, np.zeros(500))
    assert res.converged
    assert "zero-solution" in res.flags


def test_bpdn_zero_rhs(gauss_100x500):
    res = bpdn(gauss_100x500, np.zeros(100), 0.5)
    assert np.array_equal(res.estimate, np.zeros(500))
    assert res.converged


def test_bpdn_residual_matches_epsilon(gauss_200x400):
    rng = np.random.default_rng(16)
    x = np.zeros(400)
    x[[5, 100, 300]] = rng.standard_normal(3)
    y = gauss_200x400.data @ x + 0.01 * rng.standard_normal(200)
    eps = 0.1
    res = bpdn(gauss_200x400, y, eps)
    assert abs(res.residual_norm - eps) <= 0.021 * eps
    assert res.converged


def test_bpdn_noiseless_recovery_small():
    m = generate(EnsembleSpec("gaussian", 40, 80, 21))
    hits = 0
    for t in range(20):
        tr = recovery_trial(m, 3, "bpdn", 0.0, 400 + t)
        hits += tr.rel_error <= 1e-5
    assert hits >= 18


def test_bpdn_infeasible_epsilon_flagged():
    # inconsistent overdetermined system: no x gets the residual near zero
    data = np.vstack([np.eye(2), np.ones((1, 2)) * 0.5])
    m = MeasurementMatrix(data / np.linalg.norm(data, axis=0))
    y = np.array([1.0, -1.0, 5.0])
    res = bpdn(m, y, 1e-6)
    assert "infeasible-epsilon" in res.flags
    assert not res.converged


def test_bpdn_deterministic(gauss_200x400):
    rng = np.random.default_rng(17)
    y = rng.standard_normal(200)
    a = bpdn(gauss_200x400, y, 0.1)
    b = bpdn(gauss_200x400, y, 0.1)
    assert np.array_equal(a.estimate, b.estimate)
    assert a.residual_norm == b.residual_norm


def test_bpdn_noisy_support_recovery(gauss_200x400):
    # exact support match is capped well below 1: whenever a true entry
    # falls under the 10 sigma detection threshold no solver can find it
    hits = sum(recovery_trial(gauss_200x400, 5, "bpdn", 0.01, 5000 + t).success
               for t in range(60))
    assert hits >= 27


def test_recovery_trial_deterministic(gauss_100x500):
    a = recovery_trial(gauss_100x500, 6, "omp", 0.0, 99)
    b = recovery_trial(gauss_100x500, 6, "omp", 0.0, 99)
    assert a.rel_error == b.rel_error
    assert a.success == b.success


def test_recovery_trial_zero_sparsity(gauss_100x500):
    tr = recovery_trial(gauss_100x500, 0, "omp", 0.0, 1)
    assert tr.success
    assert tr.rel_error == 0.0
    assert tr.support_precision == 1.0 and tr.support_recall == 1.0


def test_recovery_trial_support_metrics(gauss_100x500):
    tr = recovery_trial(gauss_100x500, 8, "omp", 0.0, 55)
    if tr.success:
        assert tr.support_precision == 1.0 and tr.support_recall == 1.0


def test_recovery_trial_unknown_solver(gauss_100x500):
    with pytest.raises(ValueError):
        recovery_trial(gauss_100x500, 3, "magic", 0.0, 0)


def test_wilson_interval_oracle():
    lo, hi = wilson_interval(50, 100)
    assert abs(lo - 0.4038) <= 1e-3
    assert abs(hi - 0.5962) <= 1e-3
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and hi > 0.0
    lo, hi = wilson_interval(10, 10)
    assert hi == 1.0 and lo < 1.0


def test_phase_curve_orthonormal_all_succeed(ortho_30):
    m = MeasurementMatrix(ortho_30)
    points = phase_curve(m, [1, 3], "omp", 30, 0.0, 5)
    assert all(p.rate == 1.0 for p in points)
    assert all(p.ci_low <= p.rate <= p.ci_high for p in points)


def test_phase_curve_validates_k_list(gauss_100x500):
    with pytest.raises(ValueError):
        phase_curve(gauss_100x500, [], "omp", 10, 0.0, 0)
    with pytest.raises(ValueError):
        phase_curve(gauss_100x500, [5, 3], "omp", 10, 0.0, 0)


def test_phase_curve_deterministic_across_threads(gauss_100x500):
    a = phase_curve(gauss_100x500, [2, 8], "omp", 40, 0.0, 7, threads=1)
    b = phase_curve(gauss_100x500, [2, 8], "omp", 40, 0.0, 7, threads=4)
    assert [p.as_dict() for p in a] == [p.as_dict() for p in b]


def test_phase_curve_fresh_matrix_mode():
    spec = EnsembleSpec("gaussian", 40, 80, 31)
    points = phase_curve(spec, [2], "omp", 20, 0.0, 13, fresh_matrix=True)
    assert points[0].trials == 20
    assert points[0].rate >= 0.9
