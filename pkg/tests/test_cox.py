import numpy as np
import pytest

import missurv as mv
from missurv import errors
from missurv.data import Dataset, FailureStatus as F, SurvivalRecord as R

from _gen import type1


def two_point_dataset():
    return mv.validate([R(1.0, F.FAILURE, (1.0,)), R(2.0, F.CENSORED, (0.0,))])


def test_score_hand_value():
    ds = two_point_dataset()
    s = mv.score(ds, np.zeros(1), "full")
    assert abs(s[0] - 0.5) < 1e-12


def test_jacobian_hand_value():
    ds = two_point_dataset()
    j = mv.score_jacobian(ds, np.zeros(1), "full")
    assert abs(j[0, 0] + 0.25) < 1e-12


def test_rho_hat_examples():
    ds = mv.validate([R(1, F.FAILURE), R(2, F.CENSORED), R(3, F.UNKNOWN), R(4, F.UNKNOWN)])
    assert mv.rho_hat(ds) == 0.5
    assert mv.rho_hat(mv.validate([R(1, F.FAILURE), R(2, F.CENSORED)])) == 1.0
    assert mv.rho_hat(mv.validate([R(1, F.UNKNOWN)])) == 0.0


def test_s1_equals_full_score_when_all_known():
    rng = np.random.default_rng(4)
    ds = type1(rng, n=40, p=2, rho=1.0)
    for _ in range(5):
        beta = rng.normal(scale=0.7, size=2)
        assert np.array_equal(mv.score(ds, beta, "s1"), mv.score(ds, beta, "full"))


def test_s2_identically_zero_when_all_known():
    rng = np.random.default_rng(5)
    ds = type1(rng, n=40, p=2, rho=1.0)
    d = mv.Combined(np.eye(2))
    for _ in range(5):
        beta = rng.normal(scale=0.7, size=2)
        assert np.array_equal(mv.score(ds, beta, d), mv.score(ds, beta, "s1"))


def _fd_jacobian(ds, beta, kind, h=1e-5):
    p = beta.size
    jac = np.zeros((p, p))
    for k in range(p):
        step = h * max(1.0, abs(beta[k]))
        up, down = beta.copy(), beta.copy()
        up[k] += step
        down[k] -= step
        jac[:, k] = (mv.score(ds, up, kind) - mv.score(ds, down, kind)) / (2 * step)
    return jac


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(25):
        p = int(rng.integers(1, 4))
        ds = type1(rng, n=int(rng.integers(10, 31)), p=p,
                   rho=rng.uniform(0.3, 1.0), ties=bool(rng.integers(0, 2)))
        beta = rng.normal(scale=0.5, size=p)
        kinds = ["s1", "complete-case", mv.Combined(rng.normal(size=(p, p)))]
        if not np.any(ds.xi == 0):
            kinds.append("full")
        for kind in kinds:
            analytic = mv.score_jacobian(ds, beta, kind)
            fd = _fd_jacobian(ds, beta, kind)
            scale = max(1.0, np.max(np.abs(fd)))
            assert np.max(np.abs(analytic - fd)) / scale < 1e-5


def test_negative_s1_jacobian_is_psd():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = int(rng.integers(1, 4))
        ds = type1(rng, n=25, p=p, rho=rng.uniform(0.2, 1.0))
        beta = rng.normal(scale=0.8, size=p)
        neg_jac = -mv.score_jacobian(ds, beta, "s1")
        eigs = np.linalg.eigvalsh((neg_jac + neg_jac.T) / 2)
        assert eigs.min() >= -1e-10


def test_full_data_collapse_of_all_solvers():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p = int(rng.integers(1, 3))
        ds = type1(rng, n=50, p=p, rho=1.0)
        reference = mv.solve(ds, "full")
        for kind in ["s1", "complete-case", mv.Combined(rng.normal(size=(p, p)))]:
            fit = mv.solve(ds, kind)
            assert np.allclose(fit.beta, reference.beta, atol=1e-8)
        adaptive = mv.adaptive_fit(ds)
        assert np.allclose(adaptive.beta, reference.beta, atol=1e-10)
        assert np.allclose(adaptive.covariance, reference.covariance, atol=1e-12)


def test_final_score_norm_below_tolerance():
    rng = np.random.default_rng(9)
    for _ in range(10):
        ds = type1(rng, n=40, p=2, rho=0.6)
        fit = mv.solve(ds, "s1")
        assert fit.final_score_norm < 1e-8 * ds.n
        assert fit.iterations <= 50


def test_constant_covariate_raises_singular_jacobian():
    ds = mv.validate([R(1, F.FAILURE, (0.0,)), R(2, F.FAILURE, (0.0,)), R(3, F.CENSORED, (0.0,))])
    with pytest.raises(errors.SingularJacobian):
        mv.solve(ds, "full")


def test_no_events_raises():
    ds = mv.validate([R(1, F.CENSORED, (1.0,)), R(2, F.CENSORED, (0.5,))])
    with pytest.raises(errors.NoEvents):
        mv.solve(ds, "full")


def test_unknown_status_rejected_for_full_data():
    ds = mv.validate([R(1, F.FAILURE, (1.0,)), R(2, F.UNKNOWN, (0.0,))])
    with pytest.raises(errors.UnknownStatusInFullData):
        mv.score(ds, np.zeros(1), "full")


def test_rho_zero_rejected_for_combined():
    ds = mv.validate([R(1, F.UNKNOWN, (1.0,)), R(2, F.UNKNOWN, (0.0,))])
    with pytest.raises(errors.RhoZero):
        mv.score(ds, np.zeros(1), mv.Combined(np.eye(1)))


def test_max_iterations_raised():
    rng = np.random.default_rng(10)
    ds = type1(rng, n=40, p=1, rho=1.0)
    with pytest.raises(errors.MaxIterations):
        mv.solve(ds, "full", init=np.array([5.0]), max_iter=1)


def test_covariance_components_identities():
    rng = np.random.default_rng(11)
    ds = type1(rng, n=40, p=2, rho=1.0)
    beta = rng.normal(size=2)
    v, v_cz, v2 = mv.estimate_covariance_components(ds, beta)
    assert np.array_equal(v2, np.zeros((2, 2)))

    # no censored complete cases: V_CZ is an empty sum
    t = rng.exponential(size=20)
    ds2 = Dataset.from_type1_arrays(t, np.ones(20), np.ones(20), rng.normal(size=(20, 2)))
    _, v_cz2, _ = mv.estimate_covariance_components(ds2, beta)
    assert np.array_equal(v_cz2, np.zeros((2, 2)))


def test_v1_equals_rho_times_v():
    from missurv import _kernels
    rng = np.random.default_rng(12)
    for _ in range(10):
        p = int(rng.integers(1, 4))
        ds = type1(rng, n=35, p=p, rho=rng.uniform(0.3, 1.0))
        beta = rng.normal(scale=0.5, size=p)
        v, _, _ = mv.estimate_covariance_components(ds, beta)
        a_u = (ds.xi * ds.delta).astype(np.float64)
        _, _, curv, _ = _kernels.score_moments(ds.group_start, ds.z_sorted, beta, None, a_u[None, :])
        v1_inf = curv[0] / ds.n
        assert np.allclose(v1_inf, mv.rho_hat(ds) * v, rtol=0, atol=1e-14)


def test_sigma_of_d_special_cases():
    rng = np.random.default_rng(13)
    # rho = 1: Sigma(D) = V^{-1} for any D
    a = rng.normal(size=(2, 2))
    v = a @ a.T + 0.2 * np.eye(2)
    d = rng.normal(size=(2, 2))
    got = mv.sigma_of_D(v, np.zeros((2, 2)), 1.0, d)
    assert np.allclose(got, np.linalg.inv(v), atol=1e-12)
    # scalar arithmetic example
    assert abs(mv.sigma_of_D([[2.0]], [[1.0]], 0.5, [[0.0]])[0, 0] - 1.0) < 1e-14


def test_sigma_of_d_optimality_and_closed_form():
    rng = np.random.default_rng(14)
    for _ in range(100):
        p = int(rng.integers(1, 4))
        a = rng.normal(size=(p, p))
        v = a @ a.T + 0.1 * np.eye(p)
        b = rng.normal(size=(p, p))
        v2 = b @ b.T + 0.1 * np.eye(p)
        rho = rng.uniform(0.05, 0.95)
        d = rng.normal(size=(p, p))
        d_star = (1 - rho) * v @ np.linalg.inv(v2)
        sig_d = mv.sigma_of_D(v, v2, rho, d)
        sig_star = mv.sigma_of_D(v, v2, rho, d_star)
        closed = np.linalg.inv(rho * v + (1 - rho) ** 2 * v @ np.linalg.inv(v2) @ v)
        assert np.allclose(sig_star, closed, rtol=1e-9, atol=1e-11)
        gap = (sig_d - sig_star + sig_d.T - sig_star.T) / 2
        assert np.linalg.eigvalsh(gap).min() >= -1e-8


def test_singular_bread_raises():
    with pytest.raises(errors.SingularBread):
        mv.sigma_of_D([[1.0]], [[1.0]], 0.0, [[0.0]])


def test_adaptive_scalar_weight_identity():
    # p = 1: D* = V / (V + V_CZ / rho)
    rng = np.random.default_rng(15)
    for _ in range(10):
        ds = type1(rng, n=60, p=1, rho=0.6)
        fit = mv.adaptive_fit(ds)
        stage1 = mv.solve(ds, "s1")
        v, v_cz, _ = mv.estimate_covariance_components(ds, stage1.beta)
        rho = fit.rho_hat
        expected = v[0, 0] / (v[0, 0] + v_cz[0, 0] / rho)
        assert abs(fit.d_matrix[0, 0] - expected) < 1e-10


def test_adaptive_fit_reports_d_and_method():
    rng = np.random.default_rng(16)
    ds = type1(rng, n=50, p=1, rho=0.5)
    fit = mv.adaptive_fit(ds)
    assert fit.method.startswith("adaptive")
    assert fit.d_matrix is not None
    assert fit.covariance[0, 0] > 0


def test_wald_examples():
    fit = mv.FitResult(beta=np.array([0.5]), covariance=np.array([[0.04]]),
                       rho_hat=1.0, method="full", iterations=3, final_score_norm=0.0)
    z, reject = mv.wald_test(fit, null_beta=[0.0], level=0.05)
    assert abs(z[0] - 2.5) < 1e-12
    assert bool(reject[0])
    z, reject = mv.wald_test(fit, null_beta=[0.5])
    assert z[0] == 0.0 and not bool(reject[0])
    bad = mv.FitResult(beta=np.array([0.5]), covariance=np.array([[0.0]]),
                       rho_hat=1.0, method="full", iterations=3, final_score_norm=0.0)
    with pytest.raises(errors.ZeroVariance):
        mv.wald_test(bad)


def test_covariance_is_symmetric_psd_diagonal():
    rng = np.random.default_rng(17)
    for _ in range(5):
        ds = type1(rng, n=60, p=2, rho=0.7)
        for fit in (mv.solve(ds, "s1"), mv.adaptive_fit(ds)):
            assert np.allclose(fit.covariance, fit.covariance.T, atol=1e-12)
            assert np.all(np.diag(fit.covariance) >= 0)
