"""One-sample cumulative hazard and survival estimation.

Besides the classical Nelson-Aalen and Kaplan-Meier estimators, this
module implements estimators that tolerate missing failure indicators:

* ``lambda1``: inverse-probability-weighted Nelson-Aalen built from the
  observed failures only (always nondecreasing).
* ``lambda2``: the complementary estimator built from the unknown-status
  jumps with the observed-censoring jumps subtracted; its increments can
  be negative at observed censoring times.
* ``lambda_alpha``: the convex combination alpha*lambda1 +
  (1-alpha)*lambda2, with a plug-in variance-minimizing alpha
  (:func:`alpha_star_hat`) and variance function
  (:func:`gamma_alpha_hat`).
* ``lo_estimator`` and ``ipw_product_limit``: product-limit survival
  forms of the weighted estimators, kept for benchmarking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import HazardCurve, SurvivalCurve, group_by_time, group_last_positions
from .data import Dataset
from .errors import (
    MixedStatusKinds,
    NoCompleteEvents,
    NoEventsBeforeT,
    RhoDegenerate,
    RhoZero,
    UnknownStatusPresent,
)

_DEGENERATE_DENOM = 1e-10


@dataclass(frozen=True)
class AuxiliaryFunctionals:
    """The four running functionals the adaptive weight is built from."""

    lambda1: float
    lambda_g: float
    a1: float
    a_g: float


class _Paths:
    """Cumulative per-record paths shared by the one-sample estimators."""

    def __init__(self, ds: Dataset):
        if ds.kind != "type1":
            raise MixedStatusKinds("one-sample estimators require a type1 dataset")
        self.ds = ds
        self.n = ds.n
        self.rho = float(ds.xi.mean())
        self.r = (ds.n - ds.group_start).astype(np.float64)
        xi = ds.xi.astype(np.float64)
        delta = ds.delta.astype(np.float64)
        self.w_fail = xi * delta
        self.w_cens = xi * (1.0 - delta)
        self.w_unknown = 1.0 - xi
        if self.rho > 0.0:
            self.inc1 = self.w_fail / (self.rho * self.r)
            self.lam1 = np.cumsum(self.inc1)
            self.a1 = np.cumsum(self.n * self.w_fail / (self.rho * self.r ** 2))
            self.lam_g = np.cumsum(self.w_cens / (self.rho * self.r))
            self.a_g = np.cumsum(self.n * self.w_cens / (self.rho * self.r ** 2))
        if 0.0 < self.rho < 1.0:
            num2 = self.w_unknown - (1.0 - self.rho) / self.rho * self.w_cens
            self.inc2 = num2 / ((1.0 - self.rho) * self.r)
            self.lam2 = np.cumsum(self.inc2)

    def idx(self, t):
        """Index of the last sorted record with time <= t (-1 if none)."""
        return np.searchsorted(self.ds.times_sorted, t, side="right") - 1

    def at(self, cum, t):
        i = self.idx(t)
        if np.ndim(i) == 0:
            return float(cum[i]) if i >= 0 else 0.0
        out = np.where(i >= 0, cum[np.maximum(i, 0)], 0.0)
        return out


def _require_all_known(ds: Dataset):
    if ds.kind != "type1":
        raise MixedStatusKinds("requires a type1 dataset")
    if np.any(ds.xi == 0):
        raise UnknownStatusPresent("dataset contains unknown failure indicators")


def _last_complete_event_time(ds: Dataset):
    idx = np.flatnonzero((ds.xi == 1) & (ds.delta == 1))
    return float(ds.times_sorted[idx[-1]]) if idx.size else None


def nelson_aalen(ds: Dataset) -> HazardCurve:
    """Classical Nelson-Aalen estimator (all indicators observed)."""
    _require_all_known(ds)
    r = (ds.n - ds.group_start).astype(np.float64)
    inc = ds.delta / r
    jt, vals = group_by_time(ds.times_sorted, inc, ds.delta > 0)
    return HazardCurve(jt, vals, meta={"estimator": "nelson-aalen"})


def kaplan_meier(ds: Dataset) -> SurvivalCurve:
    """Product-limit survival estimator (all indicators observed)."""
    _require_all_known(ds)
    r = (ds.n - ds.group_start).astype(np.float64)
    surv = np.cumprod(1.0 - ds.delta / r)
    last = group_last_positions(ds.times_sorted, ds.delta > 0)
    return SurvivalCurve(ds.times_sorted[last], surv[last],
                         meta={"estimator": "kaplan-meier", "form": "product-limit"})


def _gamma_formula(rho, alpha, l1, a1, lg, ag, l1b=None, lgb=None,
                   a1min=None, agmin=None):
    """Plug-in covariance of the convex-combination estimator.

    With only (l1, a1, lg, ag) supplied this is the variance at one time;
    the second set of arguments evaluates the covariance at (t, t').
    """
    if l1b is None:
        l1b, lgb, a1min, agmin = l1, lg, a1, ag
    g = alpha ** 2 / rho * (a1min - (1.0 - rho) * l1 * l1b)
    if alpha != 1.0:
        g = g + alpha * (1.0 - alpha) * (
            2.0 * l1 * l1b + (l1 * lgb + l1b * lg) / rho
        )
        g = g + (1.0 - alpha) ** 2 / (1.0 - rho) * (
            a1min + agmin / rho - rho * (l1 + lg / rho) * (l1b + lgb / rho)
        )
    return g


def lambda1(ds: Dataset) -> HazardCurve:
    """Weighted Nelson-Aalen from the observed failures."""
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    support = paths.w_fail > 0
    jt, vals = group_by_time(ds.times_sorted, paths.inc1, support)
    last = group_last_positions(ds.times_sorted, support)
    variances = _gamma_formula(paths.rho, 1.0, paths.lam1[last], paths.a1[last],
                              paths.lam_g[last], paths.a_g[last])
    return HazardCurve(jt, vals, variances=variances,
                       meta={"estimator": "lambda1", "alpha": 1.0,
                             "reliable_until": _last_complete_event_time(ds)})


def lambda2(ds: Dataset) -> HazardCurve:
    """Complementary estimator from unknown-status and censoring jumps."""
    paths = _Paths(ds)
    if paths.rho in (0.0, 1.0):
        raise RhoDegenerate("lambda2 needs 0 < rho_hat < 1")
    support = (paths.w_unknown + paths.w_cens) > 0
    jt, vals = group_by_time(ds.times_sorted, paths.inc2, support)
    last = group_last_positions(ds.times_sorted, support)
    variances = _gamma_formula(paths.rho, 0.0, paths.lam1[last], paths.a1[last],
                              paths.lam_g[last], paths.a_g[last])
    return HazardCurve(jt, vals, variances=variances,
                       meta={"estimator": "lambda2", "alpha": 0.0,
                             "reliable_until": _last_complete_event_time(ds)})


def lambda_alpha(ds: Dataset, alpha: float) -> HazardCurve:
    """Convex combination alpha*lambda1 + (1-alpha)*lambda2."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 1.0:
        return lambda1(ds)
    if alpha == 0.0:
        return lambda2(ds)
    c1 = lambda1(ds)
    c2 = lambda2(ds)
    jt = np.union1d(c1.jump_times, c2.jump_times)
    vals = alpha * c1.value_at(jt) + (1.0 - alpha) * c2.value_at(jt)
    paths = _Paths(ds)
    last = paths.idx(jt)
    variances = _gamma_formula(paths.rho, alpha, paths.lam1[last], paths.a1[last],
                              paths.lam_g[last], paths.a_g[last])
    return HazardCurve(jt, vals, variances=variances,
                       meta={"estimator": "lambda-alpha", "alpha": float(alpha),
                             "reliable_until": _last_complete_event_time(ds)})


def auxiliary_functionals(ds: Dataset, t: float) -> AuxiliaryFunctionals:
    """The running functionals at time t that drive the adaptive weight."""
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    return AuxiliaryFunctionals(
        lambda1=paths.at(paths.lam1, t),
        lambda_g=paths.at(paths.lam_g, t),
        a1=paths.at(paths.a1, t),
        a_g=paths.at(paths.a_g, t),
    )


def _alpha_star(paths: _Paths, t, clamp):
    rho = paths.rho
    l1 = paths.at(paths.lam1, t)
    a1 = paths.at(paths.a1, t)
    lg = paths.at(paths.lam_g, t)
    ag = paths.at(paths.a_g, t)
    num = rho * (a1 - l1 * l1) + ag - lg * lg - (1.0 + rho) * l1 * lg
    den = a1 - l1 * l1 + ag - lg * lg - 2.0 * l1 * lg
    if abs(den) < _DEGENERATE_DENOM:
        return 1.0
    alpha = num / den
    if clamp:
        alpha = min(max(alpha, 0.0), 1.0)
    return float(alpha)


def alpha_star_hat(ds: Dataset, t: float, clamp: bool = True) -> float:
    """Plug-in estimate of the variance-minimizing combination weight.

    Returns 1.0 (the pure observed-failure estimator) when the
    denominator degenerates, e.g. for t before the first event.
    """
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    if t <= 0.0 or not np.any((paths.w_fail > 0) & (ds.times_sorted <= t)):
        raise NoEventsBeforeT(f"no observed failure at or before t={t}")
    return _alpha_star(paths, t, clamp)


def gamma_alpha_hat(ds: Dataset, alpha: float, t: float, t2: float | None = None) -> float:
    """Plug-in (co)variance of sqrt(n)*(combined estimator - truth)."""
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    if alpha != 1.0 and paths.rho == 1.0:
        raise RhoDegenerate("alpha < 1 needs rho_hat < 1")
    if t2 is None:
        t2 = t
    tmin = min(t, t2)
    return float(_gamma_formula(
        paths.rho, alpha,
        paths.at(paths.lam1, t), None,
        paths.at(paths.lam_g, t), None,
        l1b=paths.at(paths.lam1, t2), lgb=paths.at(paths.lam_g, t2),
        a1min=paths.at(paths.a1, tmin), agmin=paths.at(paths.a_g, tmin),
    ))


def lo_estimator(ds: Dataset) -> SurvivalCurve:
    """Weighted product-limit survival estimator (benchmark comparator).

    Each observed failure contributes the factor (1 - 1/riskset)
    raised to 1/rho_hat; a zero base with positive exponent is taken as
    0 so the curve hits zero when the last subject at risk fails.
    """
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    base = 1.0 - 1.0 / paths.r
    factors = np.ones(ds.n)
    fail = paths.w_fail > 0
    with np.errstate(divide="ignore"):
        factors[fail] = np.where(base[fail] > 0.0,
                                 base[fail] ** (1.0 / paths.rho), 0.0)
    surv = np.cumprod(factors)
    last = group_last_positions(ds.times_sorted, fail)
    return SurvivalCurve(ds.times_sorted[last], surv[last],
                         meta={"estimator": "lo", "form": "product-limit"})


def ipw_product_limit(ds: Dataset) -> SurvivalCurve:
    """Product-limit transform of the lambda1 increments.

    Factors below zero (possible when a weighted increment exceeds 1)
    are floored at 0 and flagged in the curve metadata.
    """
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    factors = 1.0 - paths.w_fail / (paths.rho * paths.r)
    floored = bool(np.any(factors < 0.0))
    surv = np.cumprod(np.maximum(factors, 0.0))
    last = group_last_positions(ds.times_sorted, paths.w_fail > 0)
    return SurvivalCurve(ds.times_sorted[last], surv[last],
                         meta={"estimator": "ipw-product-limit",
                               "form": "product-limit", "floored": floored})


def adaptive_survival(ds: Dataset, t: float):
    """Adaptively weighted survival-probability estimate at time t.

    Returns ``(estimate, variance, alpha_used)`` where the estimate is
    1 - exp(-combined hazard) clamped to [0, 1] and the variance is the
    delta-method estimate of Var of sqrt(n) * estimate.
    """
    paths = _Paths(ds)
    if paths.rho == 0.0:
        raise RhoZero("no observed indicators")
    if t <= 0.0 or not np.any((paths.w_fail > 0) & (ds.times_sorted <= t)):
        raise NoEventsBeforeT(f"no observed failure at or before t={t}")
    alpha = _alpha_star(paths, t, clamp=True)
    lam = paths.at(paths.lam1, t)
    if alpha != 1.0:
        lam = alpha * lam + (1.0 - alpha) * paths.at(paths.lam2, t)
    gamma = gamma_alpha_hat(ds, alpha, t)
    estimate = min(max(1.0 - np.exp(-lam), 0.0), 1.0)
    variance = float(np.exp(-2.0 * lam) * gamma)
    return estimate, variance, alpha


def complete_case_survival(ds: Dataset, t: float) -> float:
    """Failure probability at t from the observed-indicator subsample."""
    if ds.kind != "type1":
        raise MixedStatusKinds("requires a type1 dataset")
    if not np.any(ds.xi == 1):
        raise NoCompleteEvents("no subjects with observed indicators")
    mask = np.zeros(ds.n, dtype=bool)
    mask[ds.event_order] = ds.xi == 1
    sub = ds.subset(mask)
    return float(1.0 - np.exp(-nelson_aalen(sub).value_at(t)))
