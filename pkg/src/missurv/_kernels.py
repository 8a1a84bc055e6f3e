"""Risk-set scan kernels shared by every estimator.

Both hot operations scan the time-sorted records once, accumulating
exp(beta'Z)-weighted sums over the shrinking risk set:

* :func:`risk_paths` returns the per-record risk-set aggregates
  (weighted size s0, weighted covariate mean zbar, and the curvature
  matrix s2/s0 - zbar zbar') evaluated with the tie-group convention.
* :func:`score_moments` contracts those aggregates against one or more
  per-record jump-weight vectors, producing the building blocks of every
  estimating function, Jacobian, and covariance component.

Two interchangeable backends exist: numba-jitted loops (default) and a
vectorized pure-numpy fallback.  Selection happens at import time from
the ``MISSURV_BACKEND`` environment variable ("numba" or "numpy"); when
unset, numba is used if importable.  ``benchmarks/compare_backends.py``
times one against the other.
"""

from __future__ import annotations

import os

import numpy as np

STATUS_OK = 0
STATUS_EMPTY_RISK_SET = 1


# -- pure-numpy backend -----------------------------------------------------

def _reverse_cumsums(z, beta, mask):
    w = np.exp(z @ beta)
    if mask is not None:
        w = w * mask
    r0 = np.cumsum(w[::-1])[::-1]
    r1 = np.cumsum((w[:, None] * z)[::-1], axis=0)[::-1]
    zz = z[:, :, None] * z[:, None, :]
    r2 = np.cumsum((w[:, None, None] * zz)[::-1], axis=0)[::-1]
    return r0, r1, r2


def _risk_paths_numpy(group_start, z, beta, mask):
    r0, r1, r2 = _reverse_cumsums(z, beta, mask)
    s0 = r0[group_start]
    safe = np.where(s0 > 0.0, s0, 1.0)
    zbar = r1[group_start] / safe[:, None]
    curv = r2[group_start] / safe[:, None, None] - zbar[:, :, None] * zbar[:, None, :]
    return s0, zbar, curv


def _score_moments_numpy(group_start, z, beta, mask, weights):
    s0, zbar, curv_at = _risk_paths_numpy(group_start, z, beta, mask)
    used = (weights != 0.0).any(axis=0)
    status = STATUS_OK
    if np.any(used & ~(s0 > 0.0)):
        status = STATUS_EMPTY_RISK_SET
        weights = np.where((s0 > 0.0)[None, :], weights, 0.0)
    dev = z - zbar
    vec = weights @ dev
    outer = np.einsum("mk,ka,kb->mab", weights, dev, dev)
    curv = np.einsum("mk,kab->mab", weights, curv_at)
    return vec, outer, curv, status


# -- numba backend (same contracts, explicit loops) ---------------------------

def _risk_paths_loops(group_start, z, beta, mask):
    n, p = z.shape
    s0_at = np.empty(n)
    zbar_at = np.empty((n, p))
    curv_at = np.empty((n, p, p))
    r0 = np.empty(n)
    r1 = np.empty((n, p))
    r2 = np.empty((n, p, p))
    acc0 = 0.0
    acc1 = np.zeros(p)
    acc2 = np.zeros((p, p))
    for k in range(n - 1, -1, -1):
        eta = 0.0
        for a in range(p):
            eta += z[k, a] * beta[a]
        w = np.exp(eta) * mask[k]
        acc0 += w
        r0[k] = acc0
        for a in range(p):
            acc1[a] += w * z[k, a]
            r1[k, a] = acc1[a]
            for b in range(p):
                acc2[a, b] += w * z[k, a] * z[k, b]
                r2[k, a, b] = acc2[a, b]
    for k in range(n):
        g = group_start[k]
        s0 = r0[g]
        s0_at[k] = s0
        safe = s0 if s0 > 0.0 else 1.0
        for a in range(p):
            zbar_at[k, a] = r1[g, a] / safe
        for a in range(p):
            for b in range(p):
                curv_at[k, a, b] = r2[g, a, b] / safe - zbar_at[k, a] * zbar_at[k, b]
    return s0_at, zbar_at, curv_at


def _score_moments_loops(group_start, z, beta, mask, weights):
    n, p = z.shape
    m = weights.shape[0]
    r0 = np.empty(n)
    r1 = np.empty((n, p))
    r2 = np.empty((n, p, p))
    acc0 = 0.0
    acc1 = np.zeros(p)
    acc2 = np.zeros((p, p))
    for k in range(n - 1, -1, -1):
        eta = 0.0
        for a in range(p):
            eta += z[k, a] * beta[a]
        w = np.exp(eta) * mask[k]
        acc0 += w
        r0[k] = acc0
        for a in range(p):
            acc1[a] += w * z[k, a]
            r1[k, a] = acc1[a]
            for b in range(p):
                acc2[a, b] += w * z[k, a] * z[k, b]
                r2[k, a, b] = acc2[a, b]

    vec = np.zeros((m, p))
    outer = np.zeros((m, p, p))
    curv = np.zeros((m, p, p))
    zb = np.empty(p)
    dev = np.empty(p)
    status = STATUS_OK
    for k in range(n):
        any_w = False
        for j in range(m):
            if weights[j, k] != 0.0:
                any_w = True
                break
        if not any_w:
            continue
        g = group_start[k]
        s0 = r0[g]
        if not s0 > 0.0:
            status = STATUS_EMPTY_RISK_SET
            continue
        for a in range(p):
            zb[a] = r1[g, a] / s0
            dev[a] = z[k, a] - zb[a]
        for j in range(m):
            wjk = weights[j, k]
            if wjk == 0.0:
                continue
            for a in range(p):
                vec[j, a] += wjk * dev[a]
                for b in range(p):
                    outer[j, a, b] += wjk * dev[a] * (z[k, b] - zb[b])
                    curv[j, a, b] += wjk * (r2[g, a, b] / s0 - zb[a] * zb[b])
    return vec, outer, curv, status


def _select_backend() -> str:
    env = os.environ.get("MISSURV_BACKEND", "").strip().lower()
    if env not in ("", "numba", "numpy"):
        raise ValueError(f"MISSURV_BACKEND must be 'numba' or 'numpy', got {env!r}")
    if env == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if env == "numba":
            raise
        return "numpy"
    return "numba"


_numba_cache: dict | None = None


def numba_implementations():
    """Jit-compile (once) and return the numba kernels, or None."""
    global _numba_cache
    if _numba_cache is None:
        try:
            from numba import njit
        except ImportError:
            return None
        jit = njit(cache=True, nogil=True)
        _numba_cache = {
            "risk_paths": jit(_risk_paths_loops),
            "score_moments": jit(_score_moments_loops),
        }
    return _numba_cache


BACKEND = _select_backend()

if BACKEND == "numba":
    _impls = numba_implementations()
    _risk_paths = _impls["risk_paths"]
    _score_moments = _impls["score_moments"]
else:
    _risk_paths = None
    _score_moments = None

_ONES: dict[int, np.ndarray] = {}


def _ones(n: int) -> np.ndarray:
    a = _ONES.get(n)
    if a is None:
        a = np.ones(n)
        a.flags.writeable = False
        _ONES[n] = a
    return a


def risk_paths(group_start, z, beta, mask=None):
    """Per-record (s0, zbar, curvature) over the risk set at each time.

    ``mask`` restricts the risk set (entries 0/1); jump records outside
    the mask still receive the masked aggregates.
    """
    n = z.shape[0]
    if mask is None:
        mask = _ones(n)
    if BACKEND == "numba":
        return _risk_paths(group_start, z, beta, mask)
    return _risk_paths_numpy(group_start, z, beta, mask)


def score_moments(group_start, z, beta, mask, weights):
    """Contract risk-set aggregates against per-record jump weights.

    For each weight row ``a`` returns, summed over records k with
    ``a[k] != 0``:

    * ``vec``:   sum a[k] (Z_k - zbar_k)
    * ``outer``: sum a[k] (Z_k - zbar_k)(Z_k - zbar_k)'
    * ``curv``:  sum a[k] (s2/s0 - zbar zbar')(t_k)

    plus a status flag (nonzero when a weighted record sits on an empty
    risk set, which only corrupted inputs can produce).
    """
    n = z.shape[0]
    if mask is None:
        mask = _ones(n)
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if BACKEND == "numba":
        return _score_moments(group_start, z, beta, mask, weights)
    return _score_moments_numpy(group_start, z, beta, mask, weights)
