"""Competing-risks estimation when some causes of death are unknown.

Deaths always carry a known death indicator; the cause (of interest vs
other) may be missing at random among the deaths.  The complete-case
analysis drops unknown-cause deaths from the risk sets, which is
inconsistent here; it is implemented only as a comparator.  The
consistent estimating functions keep the full risk set:

* ``s1``: jumps at known cause-of-interest deaths.
* ``s2``: jumps at unknown-cause deaths with a correction at known
  other-cause deaths, mean-zero at the truth.
* combined: ``s1 + D @ s2`` with an adaptively estimated optimal D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .baseline import _curve as _baseline_curve
from .baseline import _omega, _weighted_paths
from .cox import Combined, _newton, _right_divide, _sym, sigma_of_D
from .curves import BaselineCurve, group_last_positions
from .data import Dataset
from .errors import (
    DimensionMismatch,
    EmptyRiskSetAtEvent,
    MixedStatusKinds,
    NoCompleteEvents,
    NoDeaths,
    NoEvents,
    SingularJacobian,
    TauDegenerate,
    UnknownStatusInFullData,
)
from .hazard import _DEGENERATE_DENOM, _gamma_formula

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class Type2Fit:
    """Root of a competing-risks estimating function."""

    beta: np.ndarray
    covariance: np.ndarray
    tau_hat: float
    method: str
    iterations: int
    final_score_norm: float
    d_matrix: np.ndarray | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def _require_type2(ds: Dataset):
    if ds.kind != "type2":
        raise MixedStatusKinds("this operation requires a type2 dataset")


def tau_hat(ds: Dataset) -> float:
    """Fraction of deaths whose cause is observed."""
    _require_type2(ds)
    deaths = float(ds.delta.sum())
    if deaths == 0:
        raise NoDeaths("no deaths in the dataset")
    return float((ds.delta * ds.xi).sum() / deaths)


def _s2_weights(ds: Dataset, tau: float) -> np.ndarray:
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    return ((1.0 - xi) - (1.0 - tau) / tau * xi * (1.0 - phi)) * delta


def _kind_spec(ds: Dataset, kind):
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    a1 = xi * phi * delta
    if isinstance(kind, Combined):
        if kind.d.shape[0] != ds.p:
            raise DimensionMismatch(
                f"D is {kind.d.shape[0]}x{kind.d.shape[1]} but p={ds.p}"
            )
        tau = tau_hat(ds)
        if tau == 0.0:
            raise TauDegenerate("no observed causes among the deaths")
        if a1.sum() == 0:
            raise NoEvents("no observed cause-of-interest deaths")
        return np.stack([a1, _s2_weights(ds, tau)]), None, kind.d, "combined"
    if kind == "full":
        if np.any((ds.delta == 1) & (ds.xi == 0)):
            raise UnknownStatusInFullData("full-data score needs every cause")
        if (phi * delta).sum() == 0:
            raise NoEvents("no cause-of-interest deaths")
        return (phi * delta)[None, :], None, None, "full"
    if kind == "s1":
        if tau_hat(ds) == 0.0:
            raise TauDegenerate("no observed causes among the deaths")
        if a1.sum() == 0:
            raise NoEvents("no observed cause-of-interest deaths")
        return a1[None, :], None, None, "s1"
    if kind == "complete-case":
        if a1.sum() == 0:
            raise NoEvents("no observed cause-of-interest deaths")
        mask = delta * xi + (1.0 - delta)
        return a1[None, :], mask, None, "complete-case"
    raise ValueError(f"unknown score kind {kind!r}")


def _eval_score(ds, beta, weights, mask, d):
    vec, _, curv, status = _kernels.score_moments(
        ds.group_start, ds.z_sorted, beta, mask, weights
    )
    if status != _kernels.STATUS_OK:
        raise EmptyRiskSetAtEvent("event with an empty risk set; data corrupted")
    if d is None:
        return vec[0], -curv[0]
    return vec[0] + d @ vec[1], -(curv[0] + d @ curv[1])


def score_phi(ds: Dataset, beta, which) -> np.ndarray:
    """Value of the selected competing-risks estimating function.

    ``which`` is 1, 2, one of the kind strings, or a :class:`Combined`.
    """
    _require_type2(ds)
    beta = np.asarray(beta, dtype=np.float64)
    if which in (2, "s2"):
        tau = tau_hat(ds)
        if tau == 0.0:
            raise TauDegenerate("no observed causes among the deaths")
        weights, mask, d = _s2_weights(ds, tau)[None, :], None, None
    else:
        kind = "s1" if which == 1 else which
        weights, mask, d, _ = _kind_spec(ds, kind)
    return _eval_score(ds, beta, weights, mask, d)[0]


def estimate_covariance_components_phi(ds: Dataset, beta):
    """Plug-in components (V, V_N, V2) of the type2 estimating functions.

    V_N is the empirical covariance of the centered-covariate jumps at
    observed other-cause deaths (the analogue of the censoring component
    in the type1 problem).
    """
    _require_type2(ds)
    beta = np.asarray(beta, dtype=np.float64)
    tau = tau_hat(ds)
    if tau == 0.0:
        raise TauDegenerate("no observed causes among the deaths")
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    a_int = xi * phi * delta
    a_other = xi * (1.0 - phi) * delta
    if a_int.sum() == 0:
        raise NoCompleteEvents("no observed cause-of-interest deaths")
    vec, outer, curv, status = _kernels.score_moments(
        ds.group_start, ds.z_sorted, beta, None, np.stack([a_int, a_other])
    )
    if status != _kernels.STATUS_OK:
        raise EmptyRiskSetAtEvent("event with an empty risk set; data corrupted")
    scale = ds.n * tau
    v = _sym(curv[0] / scale)
    mean_other = vec[1] / scale
    v_n = _sym(outer[1] / scale - np.outer(mean_other, mean_other))
    v2 = _sym((1.0 - tau) * v + (1.0 - tau) / tau * v_n)
    return v, v_n, v2


def solve_phi(ds: Dataset, kind="s1", init=None, tol=None, step_tol=1e-12,
              max_iter=50, max_halvings=30, _covariance=True) -> Type2Fit:
    """Solve one competing-risks estimating equation by damped Newton."""
    _require_type2(ds)
    if ds.p == 0:
        raise DimensionMismatch("regression requires at least one covariate")
    weights, mask, d, tag = _kind_spec(ds, kind)
    if init is None:
        init = np.zeros(ds.p)
    if tol is None:
        tol = 1e-8 * ds.n
    beta, iterations, snorm, jac = _newton(
        lambda b: _eval_score(ds, b, weights, mask, d),
        init, tol, step_tol, max_iter, max_halvings,
    )
    tau = tau_hat(ds)
    if _covariance:
        if tag == "complete-case":
            # nominal only: the complete-case root is inconsistent here
            cov = np.linalg.inv(-jac)
        else:
            v, _, v2 = estimate_covariance_components_phi(ds, beta)
            if tag == "full":
                cov = np.linalg.inv(v) / ds.n
            elif tag == "s1":
                cov = np.linalg.inv(tau * v) / ds.n
            else:
                cov = sigma_of_D(v, v2, tau, d) / ds.n
    else:
        cov = np.full((ds.p, ds.p), np.nan)
    return Type2Fit(
        beta=beta, covariance=cov, tau_hat=tau, method=tag,
        iterations=iterations, final_score_norm=snorm,
        d_matrix=None if d is None else d,
    )


def fit_phi(ds: Dataset, d="adaptive", init=None, tol=None, step_tol=1e-12,
            max_iter=50, max_halvings=30) -> Type2Fit:
    """Combined competing-risks fit with a given or adaptive weight D."""
    _require_type2(ds)
    if isinstance(d, (np.ndarray, list, tuple)):
        return solve_phi(ds, Combined(np.asarray(d, dtype=np.float64)), init=init,
                         tol=tol, step_tol=step_tol, max_iter=max_iter,
                         max_halvings=max_halvings)
    if d != "adaptive":
        raise ValueError("d must be a matrix or 'adaptive'")

    opts = dict(tol=tol, step_tol=step_tol, max_iter=max_iter,
                max_halvings=max_halvings)
    stage1 = solve_phi(ds, "s1", init=init, _covariance=False, **opts)
    tau = stage1.tau_hat
    v, _, v2 = estimate_covariance_components_phi(ds, stage1.beta)
    d_star, pinv_used = _right_divide((1.0 - tau) * v, v2)

    stage2 = solve_phi(ds, Combined(d_star), init=stage1.beta,
                       _covariance=False, **opts)
    v_f, _, v2_f = estimate_covariance_components_phi(ds, stage2.beta)
    if np.linalg.cond(v2_f) < _COND_LIMIT:
        middle = v_f @ np.linalg.solve(v2_f, v_f)
    else:
        middle = v_f @ np.linalg.pinv(v2_f, hermitian=True) @ v_f
        pinv_used = True
    core = tau * v_f + (1.0 - tau) ** 2 * middle
    try:
        cov = np.linalg.inv(core) / ds.n
    except np.linalg.LinAlgError:
        raise SingularJacobian("adaptive covariance core is singular") from None
    return Type2Fit(
        beta=stage2.beta, covariance=cov, tau_hat=tau,
        method="adaptive+pinv" if pinv_used else "adaptive",
        iterations=stage1.iterations + stage2.iterations,
        final_score_norm=stage2.final_score_norm, d_matrix=d_star,
    )


def baseline_phi(ds: Dataset, fit: Type2Fit, which: int) -> BaselineCurve:
    """Cause-of-interest baseline hazard with per-jump variances.

    ``which=1`` uses the observed cause-of-interest deaths weighted by
    1/tau; ``which=2`` also uses unknown-cause deaths with the
    other-cause correction.  Variances follow the plug-in recipe of the
    type1 baseline with cause-specific substitutions; fits without a D
    matrix are treated as D = 0.
    """
    _require_type2(ds)
    tau = tau_hat(ds)
    if tau == 0.0:
        raise TauDegenerate("no observed causes among the deaths")
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    if which == 1:
        num = xi * phi * delta / tau
        support = num > 0
    else:
        num = (xi * phi + (1.0 - xi) - (1.0 - tau) / tau * xi * (1.0 - phi)) * delta
        support = num != 0.0
    curve = _baseline_curve(ds, fit.beta, num, support,
                            {"estimator": f"baseline{which}-phi", "tau_hat": tau})
    variances = _baseline_phi_variances(ds, fit, which, tau, support)
    return BaselineCurve(
        jump_times=curve.jump_times, values=curve.values,
        beta_used=curve.beta_used, a_path=curve.a_path, hz_path=curve.hz_path,
        variances=variances, meta=curve.meta,
    )


def _baseline_phi_variances(ds, fit, which, tau, support):
    """sigma^2 at each jump time, vectorized over the jump grid."""
    s0, zbar = _weighted_paths(ds, fit.beta)
    n = ds.n
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    d = fit.d_matrix if fit.d_matrix is not None else np.zeros((ds.p, ds.p))
    sigma = fit.covariance * n

    a_int = xi * phi * delta
    scale = n * tau
    lam_inc = a_int / (tau * s0)
    int_inc = a_int * n / (tau * s0 ** 2)
    lam_cum = np.cumsum(lam_inc)
    int_cum = np.cumsum(int_inc)
    a_cum = np.cumsum(zbar * lam_inc[:, None], axis=0)

    if ds.p:
        v, _, _ = estimate_covariance_components_phi(ds, fit.beta)
        omega = _omega(tau, v, d)
    else:
        omega = np.zeros((0, 0))

    dev = ds.z_sorted - zbar
    other = xi * (1.0 - phi) * delta
    e_nphi = (dev * other[:, None]).sum(axis=0) / scale

    last = group_last_positions(ds.times_sorted, support)
    lam_t = lam_cum[last]
    a_t = a_cum[last]
    quad = np.einsum("ja,ab,jb->j", a_t, sigma, a_t)

    if which == 1:
        cross = a_t @ (omega @ e_nphi) if ds.p else np.zeros(last.size)
        return (int_cum[last] / tau
                - (1.0 - tau) / tau * lam_t ** 2
                + quad
                - 2.0 * (1.0 - tau) / tau * cross * lam_t)

    # which == 2: complete-case moments of the other-cause jump process
    m1 = np.cumsum(other * (n / s0))[last] / scale
    m2 = np.cumsum(other * (n / s0) ** 2)[last] / scale
    var_nphi = m2 - m1 ** 2
    cross_cum = np.cumsum(dev * (other * (n / s0))[:, None], axis=0) / scale
    cross_vec = cross_cum[last] - e_nphi[None, :] * m1[:, None]
    cross = (np.einsum("ja,ab,jb->j", a_t, omega, cross_vec)
             if ds.p else np.zeros(last.size))
    return (int_cum[last]
            + (1.0 - tau) / tau * var_nphi
            + quad
            - 2.0 * (1.0 - tau) / tau * cross)


def one_sample_phi(ds: Dataset, alpha, t: float):
    """Cumulative hazard of the cause of interest at t (no covariates).

    ``alpha`` is a weight in [0, 1] or "adaptive".  Returns
    ``(estimate, variance, alpha_used)`` with the plug-in variance of
    sqrt(n) * (estimate - truth).
    """
    _require_type2(ds)
    tau = tau_hat(ds)
    if tau == 0.0:
        raise TauDegenerate("no observed causes among the deaths")
    n = ds.n
    r = (n - ds.group_start).astype(np.float64)
    xi = ds.xi.astype(np.float64)
    phi = ds.phi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    upto = ds.times_sorted <= t

    a_int = xi * phi * delta
    a_other = xi * (1.0 - phi) * delta
    lam = float(np.sum((a_int / (tau * r))[upto]))
    a_fn = float(np.sum((a_int * n / (tau * r ** 2))[upto]))
    lam_q = float(np.sum((a_other / (tau * r))[upto]))
    a_q = float(np.sum((a_other * n / (tau * r ** 2))[upto]))

    if alpha == "adaptive":
        num = tau * (a_fn - lam * lam) + a_q - lam_q * lam_q - (1.0 + tau) * lam * lam_q
        den = a_fn - lam * lam + a_q - lam_q * lam_q - 2.0 * lam * lam_q
        alpha = 1.0 if abs(den) < _DEGENERATE_DENOM else min(max(num / den, 0.0), 1.0)
    else:
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    estimate = alpha * lam
    if alpha != 1.0:
        if tau == 1.0:
            raise TauDegenerate("alpha < 1 needs tau_hat < 1")
        w2 = ((1.0 - xi) - (1.0 - tau) / tau * xi * (1.0 - phi)) * delta
        lam2 = float(np.sum((w2 / ((1.0 - tau) * r))[upto]))
        estimate += (1.0 - alpha) * lam2

    variance = float(_gamma_formula(tau, alpha, lam, a_fn, lam_q, a_q))
    return estimate, variance, float(alpha)
