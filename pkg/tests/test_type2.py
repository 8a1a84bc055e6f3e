import numpy as np
import pytest

import missurv as mv
import missurv.type2 as t2
from missurv import errors
from missurv.data import Dataset, SurvivalRecord as R, Type2Status as T2

from _gen import type2


def test_tau_hat_examples():
    ds = mv.validate([R(1, T2.CAUSE_OF_INTEREST), R(2, T2.OTHER_CAUSE),
                      R(3, T2.UNKNOWN_CAUSE), R(4, T2.CENSORED)])
    assert abs(mv.tau_hat(ds) - 2 / 3) < 1e-15
    known = mv.validate([R(1, T2.CAUSE_OF_INTEREST), R(2, T2.OTHER_CAUSE)])
    assert mv.tau_hat(known) == 1.0
    with pytest.raises(errors.NoDeaths):
        mv.tau_hat(mv.validate([R(1, T2.CENSORED), R(2, T2.CENSORED)]))


def test_score_phi_hand_value():
    ds = mv.validate([R(1, T2.CAUSE_OF_INTEREST, (1.0,)), R(2, T2.CENSORED, (0.0,))])
    s = mv.score_phi(ds, np.zeros(1), 1)
    assert abs(s[0] - 0.5) < 1e-12


def test_score_phi_collapses_when_all_causes_known():
    rng = np.random.default_rng(50)
    ds = type2(rng, n=50, tau=1.0)
    for _ in range(5):
        beta = rng.normal(scale=0.5, size=1)
        assert np.array_equal(mv.score_phi(ds, beta, 1), mv.score_phi(ds, beta, "full"))
        assert np.array_equal(mv.score_phi(ds, beta, 2), np.zeros(1))


def test_fit_phi_collapse_at_tau_one():
    rng = np.random.default_rng(51)
    ds = type2(rng, n=60, tau=1.0)
    full = t2.solve_phi(ds, "full")
    adaptive = t2.fit_phi(ds, "adaptive")
    assert np.allclose(adaptive.beta, full.beta, atol=1e-10)
    assert np.allclose(adaptive.covariance, full.covariance, atol=1e-12)
    s1 = t2.solve_phi(ds, "s1")
    assert np.allclose(s1.beta, full.beta, atol=1e-10)


def test_sigma_phi_optimal_closed_form():
    rng = np.random.default_rng(52)
    for _ in range(100):
        p = int(rng.integers(1, 4))
        a = rng.normal(size=(p, p))
        v = a @ a.T + 0.1 * np.eye(p)
        b = rng.normal(size=(p, p))
        v2 = b @ b.T + 0.1 * np.eye(p)
        tau = rng.uniform(0.05, 0.95)
        d = rng.normal(size=(p, p))
        d_star = (1 - tau) * v @ np.linalg.inv(v2)
        sig = mv.sigma_of_D(v, v2, tau, d)
        sig_star = mv.sigma_of_D(v, v2, tau, d_star)
        closed = np.linalg.inv(tau * v + (1 - tau) ** 2 * v @ np.linalg.inv(v2) @ v)
        assert np.allclose(sig_star, closed, rtol=1e-9, atol=1e-11)
        gap = (sig - sig_star + sig.T - sig_star.T) / 2
        assert np.linalg.eigvalsh(gap).min() >= -1e-8


def test_score_phi_tau_degenerate():
    ds = mv.validate([R(1, T2.UNKNOWN_CAUSE, (1.0,)), R(2, T2.CENSORED, (0.0,))])
    with pytest.raises(errors.TauDegenerate):
        mv.score_phi(ds, np.zeros(1), 1)
    with pytest.raises(errors.TauDegenerate):
        mv.score_phi(ds, np.zeros(1), 2)


def test_full_kind_rejects_unknown_causes():
    rng = np.random.default_rng(53)
    ds = type2(rng, n=40, tau=0.5)
    with pytest.raises(errors.UnknownStatusInFullData):
        t2.solve_phi(ds, "full")


def test_baseline_phi_collapse_to_breslow_on_cause():
    rng = np.random.default_rng(54)
    ds = type2(rng, n=50, tau=1.0)
    fit = t2.solve_phi(ds, "full")
    curve = t2.baseline_phi(ds, fit, 1)
    # all causes known: same as Breslow on the cause-of-interest counting process
    as_type1 = Dataset.from_type1_arrays(
        ds.times,
        np.ones(ds.n, np.uint8),
        _input_order(ds, (ds.phi * ds.delta).astype(np.uint8)),
        ds.z,
    )
    br = mv.breslow(as_type1, fit.beta)
    assert np.array_equal(curve.jump_times, br.jump_times)
    assert np.allclose(curve.values, br.values, atol=1e-12)


def _input_order(ds, sorted_arr):
    out = np.empty(ds.n, dtype=sorted_arr.dtype)
    out[ds.event_order] = sorted_arr
    return out


def test_baseline_phi_zero_covariates_matches_one_sample():
    rng = np.random.default_rng(55)
    base = type2(rng, n=40, tau=0.6, p=1)
    ds = Dataset.from_type2_arrays(base.times, _input_order(base, base.delta),
                                   _input_order(base, base.xi),
                                   _input_order(base, base.phi),
                                   np.zeros((base.n, 1)))
    fit = t2.Type2Fit(beta=np.zeros(1), covariance=np.eye(1), tau_hat=mv.tau_hat(ds),
                      method="s1", iterations=0, final_score_norm=0.0)
    curve = t2.baseline_phi(ds, fit, 1)
    for t in ds.times_sorted:
        est, _, _ = t2.one_sample_phi(ds, 1.0, float(t))
        assert abs(curve.value_at(t) - est) < 1e-12


def test_baseline_phi_variance_reduction_d_zero_tau_one():
    rng = np.random.default_rng(56)
    ds = type2(rng, n=50, tau=1.0)
    fit = t2.fit_phi(ds, np.zeros((1, 1)))
    curve = t2.baseline_phi(ds, fit, 1)
    from missurv._kernels import risk_paths
    s0, zbar, _ = risk_paths(ds.group_start, ds.z_sorted, fit.beta)
    a_int = (ds.xi * ds.phi * ds.delta).astype(float)
    for j, t in enumerate(curve.jump_times):
        upto = ds.times_sorted <= t
        term1 = np.sum((a_int * ds.n / s0 ** 2)[upto])
        a_t = (zbar * (a_int / s0)[:, None])[upto].sum(axis=0)
        quad = a_t @ (fit.covariance * ds.n) @ a_t
        assert abs(curve.variances[j] - (term1 + quad)) < 1e-10


def test_one_sample_phi_alpha_star_equals_tau_without_other_causes():
    # only cause-of-interest deaths and censorings before t
    ds = mv.validate([R(1, T2.CAUSE_OF_INTEREST), R(2, T2.UNKNOWN_CAUSE),
                      R(3, T2.CENSORED), R(4, T2.CAUSE_OF_INTEREST)])
    tau = mv.tau_hat(ds)
    _, _, alpha = t2.one_sample_phi(ds, "adaptive", 4.0)
    assert abs(alpha - tau) < 1e-12


def test_one_sample_phi_collapse_at_tau_one():
    rng = np.random.default_rng(57)
    ds = type2(rng, n=50, tau=1.0, p=0)
    t = float(np.median(ds.times_sorted))
    est, var, alpha = t2.one_sample_phi(ds, "adaptive", t)
    assert alpha == 1.0
    as_type1 = Dataset.from_type1_arrays(
        ds.times, np.ones(ds.n, np.uint8),
        _input_order(ds, (ds.phi * ds.delta).astype(np.uint8)))
    assert abs(est - mv.nelson_aalen(as_type1).value_at(t)) < 1e-12
    assert var > 0


def test_one_sample_phi_sigma_tau_formula():
    rng = np.random.default_rng(58)
    ds = type2(rng, n=60, tau=0.6, p=0)
    tau = mv.tau_hat(ds)
    t = float(np.median(ds.times_sorted))
    _, var_tau, _ = t2.one_sample_phi(ds, tau, t)
    r = (ds.n - ds.group_start).astype(float)
    a_int = (ds.xi * ds.phi * ds.delta).astype(float)
    a_other = (ds.xi * (1 - ds.phi) * ds.delta).astype(float)
    upto = ds.times_sorted <= t
    lam = np.sum((a_int / (tau * r))[upto])
    a_fn = np.sum((a_int * ds.n / (tau * r ** 2))[upto])
    lam_q = np.sum((a_other / (tau * r))[upto])
    a_q = np.sum((a_other * ds.n / (tau * r ** 2))[upto])
    expected = a_fn + (1 - tau) / tau * (a_q - lam_q ** 2)
    assert abs(var_tau - expected) < 1e-12


def test_one_sample_phi_vertex_identity():
    rng = np.random.default_rng(59)
    for _ in range(20):
        ds = type2(rng, n=60, tau=rng.uniform(0.3, 0.9), p=0)
        t = float(np.median(ds.times_sorted))
        g = [t2.one_sample_phi(ds, a, t)[1] for a in (0.0, 0.5, 1.0)]
        quad_coef = 2 * g[0] + 2 * g[2] - 4 * g[1]
        lin_coef = g[2] - g[0] - quad_coef
        assert quad_coef > 0
        vertex = -lin_coef / (2 * quad_coef)
        tau = mv.tau_hat(ds)
        r = (ds.n - ds.group_start).astype(float)
        a_int = (ds.xi * ds.phi * ds.delta).astype(float)
        a_other = (ds.xi * (1 - ds.phi) * ds.delta).astype(float)
        upto = ds.times_sorted <= t
        lam = np.sum((a_int / (tau * r))[upto])
        a_fn = np.sum((a_int * ds.n / (tau * r ** 2))[upto])
        lam_q = np.sum((a_other / (tau * r))[upto])
        a_q = np.sum((a_other * ds.n / (tau * r ** 2))[upto])
        alpha_star = ((tau * (a_fn - lam ** 2) + a_q - lam_q ** 2
                       - (1 + tau) * lam * lam_q)
                      / (a_fn - lam ** 2 + a_q - lam_q ** 2 - 2 * lam * lam_q))
        assert abs(vertex - alpha_star) < 1e-10


def test_one_sample_phi_rejects_partial_weight_at_tau_one():
    rng = np.random.default_rng(60)
    ds = type2(rng, n=30, tau=1.0, p=0)
    with pytest.raises(errors.TauDegenerate):
        t2.one_sample_phi(ds, 0.5, float(np.median(ds.times_sorted)))


def test_complete_case_bias_smoke():
    # small-scale version of the inconsistency demonstration
    from missurv.simulation import SimDesign, run
    design = SimDesign(model="type2", beta0=0.5, n=500, rho_or_tau=0.5,
                       target_censoring=0.2, reps=120, master_seed=9,
                       estimators=("adaptive", "complete-case"))
    rep = run(design)
    ad = rep.stat("adaptive")
    cc = rep.stat("complete-case")
    assert abs(ad.mean - 0.5) < 0.02
    assert abs(cc.mean - 0.5) > 2 * abs(ad.mean - 0.5)
