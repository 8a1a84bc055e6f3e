"""Cox regression with possibly missing failure indicators.

Four estimating functions share one risk-set scan:

* ``"full"``: the classical partial-likelihood score, requiring every
  failure indicator to be observed.
* ``"complete-case"``: the score computed after discarding subjects with
  unknown indicators (risk sets shrink accordingly).
* ``"s1"``: the observed-failure score that keeps everyone in the risk
  sets but only lets known failures contribute jumps.
* :class:`Combined`: ``s1`` plus ``D`` times a second, mean-zero
  estimating function built from the unknown-status and known-censoring
  jumps; a data-driven optimal ``D`` gives the adaptive estimator.

All estimators are roots found by damped Newton iteration with analytic
Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import _kernels
from .data import Dataset
from .errors import (
    DimensionMismatch,
    EmptyRiskSetAtEvent,
    MaxIterations,
    MixedStatusKinds,
    NoCompleteEvents,
    NoEvents,
    RhoZero,
    SingularBread,
    SingularJacobian,
    UnknownStatusInFullData,
    ZeroVariance,
)

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class Combined:
    """Estimating-function weight: solve s1(beta) + d @ s2(beta) = 0."""

    d: np.ndarray

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.d, dtype=np.float64))
        if d.shape[0] != d.shape[1] or not np.all(np.isfinite(d)):
            raise DimensionMismatch("D must be a finite square matrix")
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class FitResult:
    """Root of an estimating function plus its estimated covariance.

    ``covariance`` stores the estimated Var of beta_hat itself (the
    asymptotic matrix already divided by n), directly usable for Wald
    tests.  ``d_matrix`` is set for combined/adaptive fits.
    """

    beta: np.ndarray
    covariance: np.ndarray
    rho_hat: float
    method: str
    iterations: int
    final_score_norm: float
    d_matrix: np.ndarray | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def _require_type1(ds: Dataset):
    if ds.kind != "type1":
        raise MixedStatusKinds("this operation requires a type1 dataset")
    if ds.p == 0:
        raise DimensionMismatch("regression requires at least one covariate")


def rho_hat(ds: Dataset) -> float:
    """Fraction of subjects whose failure indicator is observed."""
    if ds.kind != "type1":
        raise MixedStatusKinds("rho_hat requires a type1 dataset")
    return float(ds.xi.mean())


def _s2_weights(ds: Dataset, rho: float) -> np.ndarray:
    xi = ds.xi.astype(np.float64)
    cens = xi * (1.0 - ds.delta)
    return (1.0 - xi) - (1.0 - rho) / rho * cens


def _kind_spec(ds: Dataset, kind):
    """Resolve a score kind into (jump weights, risk mask, D, tag)."""
    xi = ds.xi.astype(np.float64)
    delta = ds.delta.astype(np.float64)
    if isinstance(kind, Combined):
        if kind.d.shape[0] != ds.p:
            raise DimensionMismatch(
                f"D is {kind.d.shape[0]}x{kind.d.shape[1]} but p={ds.p}"
            )
        rho = rho_hat(ds)
        if rho == 0.0:
            raise RhoZero("combined score undefined with no observed indicators")
        a1 = xi * delta
        if a1.sum() == 0:
            raise NoEvents("no observed failures")
        return np.stack([a1, _s2_weights(ds, rho)]), None, kind.d, "combined"
    if kind == "full":
        if np.any(ds.xi == 0):
            raise UnknownStatusInFullData("full-data score needs every indicator")
        if delta.sum() == 0:
            raise NoEvents("no failures")
        return delta[None, :], None, None, "full"
    if kind == "s1":
        a1 = xi * delta
        if a1.sum() == 0:
            raise NoEvents("no observed failures")
        return a1[None, :], None, None, "s1"
    if kind == "complete-case":
        a1 = xi * delta
        if a1.sum() == 0:
            raise NoEvents("no observed failures")
        return a1[None, :], xi, None, "complete-case"
    raise ValueError(f"unknown score kind {kind!r}")


def _eval_score(ds: Dataset, beta, weights, mask, d):
    vec, _, curv, status = _kernels.score_moments(
        ds.group_start, ds.z_sorted, beta, mask, weights
    )
    if status != _kernels.STATUS_OK:
        raise EmptyRiskSetAtEvent("event with an empty risk set; data corrupted")
    if d is None:
        return vec[0], -curv[0]
    return vec[0] + d @ vec[1], -(curv[0] + d @ curv[1])


def score(ds: Dataset, beta, kind="full") -> np.ndarray:
    """Value of the selected estimating function at ``beta``."""
    _require_type1(ds)
    beta = np.asarray(beta, dtype=np.float64)
    weights, mask, d, _ = _kind_spec(ds, kind)
    return _eval_score(ds, beta, weights, mask, d)[0]


def score_jacobian(ds: Dataset, beta, kind="full") -> np.ndarray:
    """Analytic derivative of :func:`score` with respect to ``beta``."""
    _require_type1(ds)
    beta = np.asarray(beta, dtype=np.float64)
    weights, mask, d, _ = _kind_spec(ds, kind)
    return _eval_score(ds, beta, weights, mask, d)[1]


def _norm(v) -> float:
    if not np.all(np.isfinite(v)):
        return np.inf
    return float(np.max(np.abs(v))) if v.size else 0.0


def _newton(evaluate, init, tol, step_tol, max_iter, max_halvings):
    """Damped Newton root finder; evaluate(beta) -> (score, jacobian)."""
    beta = np.array(init, dtype=np.float64)
    s, jac = evaluate(beta)
    snorm = _norm(s)
    if not np.isfinite(snorm) or not np.all(np.isfinite(jac)):
        raise SingularJacobian("score or Jacobian not finite at starting value")
    iterations = 0
    while True:
        try:
            step = np.linalg.solve(jac, -s)
        except np.linalg.LinAlgError:
            raise SingularJacobian("singular Jacobian; degenerate design") from None
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("singular Jacobian; degenerate design")
        if snorm < tol:
            return beta, iterations, snorm, jac
        if iterations >= max_iter:
            raise MaxIterations(f"no convergence in {max_iter} iterations")
        iterations += 1
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            cand = beta + lam * step
            s_new, jac_new = evaluate(cand)
            cand_norm = _norm(s_new)
            if cand_norm < snorm:
                accepted = True
                break
            lam *= 0.5
        if not accepted and not np.isfinite(cand_norm):
            raise SingularJacobian("score diverged during step halving")
        beta, s, jac, snorm = cand, s_new, jac_new, cand_norm
        if _norm(lam * step) < step_tol:
            return beta, iterations, snorm, jac


def solve(ds: Dataset, kind="full", init=None, tol=None, step_tol=1e-12,
          max_iter=50, max_halvings=30, _covariance=True) -> FitResult:
    """Solve the selected estimating equation by damped Newton iteration.

    Converges when the max-norm of the score drops below ``tol``
    (default 1e-8 * n) or the step norm below ``step_tol``.
    """
    _require_type1(ds)
    weights, mask, d, tag = _kind_spec(ds, kind)
    if init is None:
        init = np.zeros(ds.p)
    if tol is None:
        tol = 1e-8 * ds.n

    beta, iterations, snorm, jac = _newton(
        lambda b: _eval_score(ds, b, weights, mask, d),
        init, tol, step_tol, max_iter, max_halvings,
    )

    rho = rho_hat(ds)
    if _covariance:
        cov = _covariance_for(ds, tag, beta, rho, d, jac)
    else:
        cov = np.full((ds.p, ds.p), np.nan)
    return FitResult(
        beta=beta, covariance=cov, rho_hat=rho, method=tag,
        iterations=iterations, final_score_norm=snorm,
        d_matrix=None if d is None else d,
    )


def estimate_covariance_components(ds: Dataset, beta):
    """Plug-in covariance components (V, V_CZ, V2) at ``beta``.

    V is the risk-set curvature averaged over observed failures; V_CZ is
    the empirical covariance of the centered-covariate jumps at observed
    censorings; V2 combines them into the covariance of the second
    estimating function.
    """
    _require_type1(ds)
    beta = np.asarray(beta, dtype=np.float64)
    rho = rho_hat(ds)
    if rho == 0.0:
        raise RhoZero("no observed indicators")
    xi = ds.xi.astype(np.float64)
    a_u = xi * ds.delta
    a_c = xi * (1.0 - ds.delta)
    if a_u.sum() == 0:
        raise NoCompleteEvents("no observed failures")
    vec, outer, curv, status = _kernels.score_moments(
        ds.group_start, ds.z_sorted, beta, None, np.stack([a_u, a_c])
    )
    if status != _kernels.STATUS_OK:
        raise EmptyRiskSetAtEvent("event with an empty risk set; data corrupted")
    n_obs = xi.sum()
    v = _sym(curv[0] / n_obs)
    mean_c = vec[1] / n_obs
    v_cz = _sym(outer[1] / n_obs - np.outer(mean_c, mean_c))
    v2 = _sym((1.0 - rho) * v + (1.0 - rho) / rho * v_cz)
    return v, v_cz, v2


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _right_divide(a: np.ndarray, b: np.ndarray):
    """a @ inv(b), falling back to the pseudo-inverse when b is singular."""
    if np.linalg.cond(b) < _COND_LIMIT:
        return np.linalg.solve(b.T, a.T).T, False
    return a @ np.linalg.pinv(b, hermitian=True), True


def sigma_of_D(v, v2, rho, d) -> np.ndarray:
    """Sandwich covariance of the combined estimator for a given D."""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    v2 = np.atleast_2d(np.asarray(v2, dtype=np.float64))
    d = np.atleast_2d(np.asarray(d, dtype=np.float64))
    bread = rho * v + (1.0 - rho) * d @ v
    if np.linalg.cond(bread) >= _COND_LIMIT:
        raise SingularBread("rho*V + (1-rho)*D*V is singular")
    bi = np.linalg.inv(bread)
    return bi @ (rho * v + d @ v2 @ d.T) @ bi.T


def _covariance_for(ds, tag, beta, rho, d, jac):
    if tag == "complete-case":
        # the estimator's own observed information; the shared-limit form
        # (rho V)^{-1} tracks the other root and understates beta_d's
        # finite-sample dispersion
        try:
            return np.linalg.inv(-jac)
        except np.linalg.LinAlgError:
            raise SingularJacobian("singular complete-case information") from None
    v, _, v2 = estimate_covariance_components(ds, beta)
    if tag == "full":
        return np.linalg.inv(v) / ds.n
    if tag == "s1":
        return np.linalg.inv(rho * v) / ds.n
    return sigma_of_D(v, v2, rho, d) / ds.n


def adaptive_fit(ds: Dataset, init=None, tol=None, step_tol=1e-12,
                 max_iter=50, max_halvings=30) -> FitResult:
    """Two-stage adaptive estimator.

    Solves the observed-failure equation first, plugs its root into the
    covariance components to estimate the optimal weight matrix
    D = (1-rho) V V2^{-1}, then re-solves the combined equation from the
    first-stage root.  When V2 is singular the pseudo-inverse is used and
    the method tag gains a ``+pinv`` suffix.
    """
    stage1 = solve(ds, "s1", init=init, tol=tol, step_tol=step_tol,
                   max_iter=max_iter, max_halvings=max_halvings,
                   _covariance=False)
    rho = stage1.rho_hat
    v, _, v2 = estimate_covariance_components(ds, stage1.beta)
    d, pinv_used = _right_divide((1.0 - rho) * v, v2)

    stage2 = solve(ds, Combined(d), init=stage1.beta, tol=tol,
                   step_tol=step_tol, max_iter=max_iter,
                   max_halvings=max_halvings, _covariance=False)

    v_f, _, v2_f = estimate_covariance_components(ds, stage2.beta)
    if np.linalg.cond(v2_f) < _COND_LIMIT:
        middle = v_f @ np.linalg.solve(v2_f, v_f)
    else:
        middle = v_f @ np.linalg.pinv(v2_f, hermitian=True) @ v_f
        pinv_used = True
    core = rho * v_f + (1.0 - rho) ** 2 * middle
    try:
        cov = np.linalg.inv(core) / ds.n
    except np.linalg.LinAlgError:
        raise SingularJacobian("adaptive covariance core is singular") from None

    method = "adaptive+pinv" if pinv_used else "adaptive"
    return FitResult(
        beta=stage2.beta, covariance=cov, rho_hat=rho, method=method,
        iterations=stage1.iterations + stage2.iterations,
        final_score_norm=stage2.final_score_norm, d_matrix=d,
    )


def wald_test(fit: FitResult, null_beta=None, level=0.05):
    """Componentwise Wald z statistics and rejection flags."""
    p = fit.beta.shape[0]
    null = np.zeros(p) if null_beta is None else np.asarray(null_beta, dtype=np.float64)
    var = np.diag(fit.covariance)
    if np.any(var <= 0.0):
        raise ZeroVariance("nonpositive variance on a tested component")
    z = (fit.beta - null) / np.sqrt(var)
    crit = ndtri(1.0 - level / 2.0)
    return z, np.abs(z) > crit
