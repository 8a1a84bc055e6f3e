"""Cumulative baseline hazard estimation under the Cox model.

Implements the classical Breslow estimator plus two variants that
tolerate missing failure indicators: one driven by the observed failures
alone (``baseline_lambda1``) and one that also uses the unknown-status
jumps with an observed-censoring correction (``baseline_lambda2``).
Plug-in variance estimates for both are provided by
:func:`baseline_variance`; they require a fit that carries the combining
matrix D (a combined or adaptive fit).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .cox import FitResult, estimate_covariance_components
from .curves import BaselineCurve, group_by_time, group_last_positions
from .data import Dataset
from .errors import (
    DimensionMismatch,
    MissingD,
    MixedStatusKinds,
    RhoZero,
    UnknownStatusPresent,
)


def _weighted_paths(ds: Dataset, beta):
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (ds.p,):
        raise DimensionMismatch(f"beta has shape {beta.shape}, expected ({ds.p},)")
    if ds.p == 0:
        r = (ds.n - ds.group_start).astype(np.float64)
        return r, np.zeros((ds.n, 0))
    s0, zbar, _ = _kernels.risk_paths(ds.group_start, ds.z_sorted, beta)
    return s0, zbar


def _curve(ds, beta, numerator, support, meta):
    s0, zbar = _weighted_paths(ds, beta)
    inc = numerator / s0
    jt, vals = group_by_time(ds.times_sorted, inc, support)
    last = group_last_positions(ds.times_sorted, support)
    a_path = np.cumsum(zbar * inc[:, None], axis=0)[last]
    return BaselineCurve(
        jump_times=jt, values=vals, beta_used=np.asarray(beta, dtype=np.float64),
        a_path=a_path, hz_path=s0[last] / ds.n, meta=meta,
    )


def breslow(ds: Dataset, beta) -> BaselineCurve:
    """Classical Breslow estimator at the supplied coefficients."""
    if ds.kind != "type1":
        raise MixedStatusKinds("breslow requires a type1 dataset")
    if np.any(ds.xi == 0):
        raise UnknownStatusPresent("dataset contains unknown failure indicators")
    delta = ds.delta.astype(np.float64)
    return _curve(ds, beta, delta, ds.delta > 0, {"estimator": "breslow"})


def baseline_lambda1(ds: Dataset, fit: FitResult) -> BaselineCurve:
    """Baseline hazard from the observed failures, weighted by 1/rho."""
    rho = _rho(ds)
    num = ds.xi * ds.delta / rho
    return _curve(ds, fit.beta, num.astype(np.float64), (ds.xi * ds.delta) > 0,
                  {"estimator": "baseline1", "rho_hat": rho})


def baseline_lambda2(ds: Dataset, fit: FitResult) -> BaselineCurve:
    """Baseline hazard that also uses the unknown-status jumps."""
    rho = _rho(ds)
    xi = ds.xi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    num = xi * delta + (1.0 - xi) - (1.0 - rho) / rho * xi * (1.0 - delta)
    return _curve(ds, fit.beta, num, num != 0.0,
                  {"estimator": "baseline2", "rho_hat": rho})


def _omega(weight: float, v: np.ndarray, d: np.ndarray) -> np.ndarray:
    """{w V + (1-w) D V}^{-1} D, via pseudo-inverse for degenerate designs."""
    bread = weight * v + (1.0 - weight) * d @ v
    if np.linalg.cond(bread) < 1e12:
        return np.linalg.solve(bread, d)
    return np.linalg.pinv(bread) @ d


def _rho(ds: Dataset) -> float:
    if ds.kind != "type1":
        raise MixedStatusKinds("requires a type1 dataset")
    rho = float(ds.xi.mean())
    if rho == 0.0:
        raise RhoZero("no observed indicators")
    return rho


def baseline_variance(ds: Dataset, fit: FitResult, which: int, t: float) -> float:
    """Plug-in variance of sqrt(n)*(baseline estimate at t - truth).

    ``which`` selects the observed-failure estimator (1) or the
    unknown-status variant (2).  The fit must carry the combining matrix
    D used for the coefficient estimate; population moments are replaced
    by complete-case empirical moments throughout.
    """
    rho = _rho(ds)
    if fit.d_matrix is None:
        raise MissingD("variance needs a combined or adaptive fit (D matrix)")
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")

    d = fit.d_matrix
    s0, zbar = _weighted_paths(ds, fit.beta)
    n = ds.n
    xi = ds.xi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    upto = ds.times_sorted <= t
    n_obs = xi.sum()

    fail_inc = xi * delta / (rho * s0)
    lam1_t = float(np.sum(fail_inc[upto]))
    a_t = (zbar * fail_inc[:, None])[upto].sum(axis=0)

    # integral of the baseline increments against 1/(risk-weighted mean)
    int_dlam_over_h = float(np.sum((xi * delta * n / (rho * s0 ** 2))[upto]))

    sigma = fit.covariance * n
    v, _, _ = estimate_covariance_components(ds, fit.beta)
    omega = _omega(rho, v, d)

    dev = ds.z_sorted - zbar
    cens = xi * (1.0 - delta)
    e_ncz = (dev * cens[:, None]).sum(axis=0) / n_obs

    quad = float(a_t @ sigma @ a_t)
    if which == 1:
        return (int_dlam_over_h / rho
                - (1.0 - rho) / rho * lam1_t ** 2
                + quad
                - 2.0 * (1.0 - rho) / rho * float(a_t @ omega @ e_ncz) * lam1_t)

    # which == 2: complete-case moments of the censoring jump process
    nch = cens * upto * n / s0
    m1 = float(np.sum(nch) / n_obs)
    m2 = float(np.sum(nch ** 2) / n_obs)
    var_nch = m2 - m1 ** 2
    cross = (dev * nch[:, None]).sum(axis=0) / n_obs - e_ncz * m1
    return (int_dlam_over_h
            + (1.0 - rho) / rho * var_nch
            + quad
            - 2.0 * (1.0 - rho) / rho * float(a_t @ omega @ cross))
