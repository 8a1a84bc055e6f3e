"""Seeded Monte Carlo harness.

Designs draw exponential failure/censoring times with standard-normal
covariates; the censoring hazard is calibrated to hit a target censoring
fraction.  Every replication stream is a pure function of
``(master_seed, rep_index)`` via a counter-based generator, so runs are
bit-identical across executions and across worker counts, and all
estimators within a replication see the same dataset.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtri

from . import cox, hazard, type2
from .data import Dataset
from .errors import MissurvError, TooManyFailures

_GH_X, _GH_W = hermgauss(64)
_MODELS = ("null", "coxexp", "onesample", "type2")
_DEFAULT_ESTIMATORS = {
    "null": ("full", "complete-case", "s1", "adaptive"),
    "coxexp": ("full", "complete-case", "s1", "adaptive"),
    "onesample": ("adaptive", "complete-case", "lo"),
    "type2": ("adaptive", "complete-case"),
}


@dataclass(frozen=True)
class SimDesign:
    """One simulation block."""

    model: str
    n: int = 100
    rho_or_tau: float = 1.0
    target_censoring: float = 0.0
    reps: int = 1
    master_seed: int = 0
    estimators: tuple[str, ...] = ()
    beta0: float = 0.0
    eval_time: float | None = None
    lambda_c: float | None = None    # explicit censoring hazard; None = calibrate

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ValueError(f"model must be one of {_MODELS}")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0.0 < self.rho_or_tau <= 1.0:
            raise ValueError("rho_or_tau must lie in (0, 1]")
        if not 0.0 <= self.target_censoring < 1.0:
            raise ValueError("target_censoring must lie in [0, 1)")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        ests = tuple(self.estimators) or _DEFAULT_ESTIMATORS[self.model]
        object.__setattr__(self, "estimators", ests)

    def to_dict(self) -> dict:
        return {
            "model": self.model, "n": self.n, "rho_or_tau": self.rho_or_tau,
            "target_censoring": self.target_censoring, "reps": self.reps,
            "master_seed": self.master_seed, "estimators": list(self.estimators),
            "beta0": self.beta0, "eval_time": self.eval_time,
            "lambda_c": self.lambda_c,
        }

    @staticmethod
    def from_dict(d: dict) -> "SimDesign":
        known = {k: d[k] for k in (
            "model", "n", "rho_or_tau", "target_censoring", "reps",
            "master_seed", "estimators", "beta0", "eval_time", "lambda_c")
            if k in d}
        if "estimators" in known:
            known["estimators"] = tuple(known["estimators"])
        return SimDesign(**known)


@dataclass(frozen=True)
class EstimatorStats:
    """Monte Carlo summary for one estimator in one block."""

    estimator: str
    mean: float
    variance: float
    mean_variance_estimate: float | None
    rejection_rate: float | None
    rejection_rate_mc_se: float | None
    mean_alpha: float | None
    n_failed: int
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator, "mean": self.mean,
            "variance": self.variance,
            "mean_variance_estimate": self.mean_variance_estimate,
            "rejection_rate": self.rejection_rate,
            "rejection_rate_mc_se": self.rejection_rate_mc_se,
            "mean_alpha": self.mean_alpha, "n_failed": self.n_failed,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class SimReport:
    """Aggregated results of one simulation block."""

    design: SimDesign
    lambda_c: float
    eval_time: float | None
    stats: tuple[EstimatorStats, ...]
    efficiency_ratios: dict = field(default_factory=dict)

    def stat(self, estimator: str) -> EstimatorStats:
        for s in self.stats:
            if s.estimator == estimator:
                return s
        raise KeyError(estimator)

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "lambda_c": self.lambda_c,
            "eval_time": self.eval_time,
            "estimators": [s.to_dict() for s in self.stats],
            "efficiency_ratios": dict(self.efficiency_ratios),
        }


# -- censoring calibration ----------------------------------------------------

def _censoring_fraction(lam_c: float, model: str, beta0: float) -> float:
    """P(C < T) for exponential censoring with hazard lam_c."""
    if model in ("null", "onesample"):
        return lam_c / (lam_c + 1.0)
    z = math.sqrt(2.0) * _GH_X
    total = np.exp(beta0 * z) + (1.0 if model == "type2" else 0.0)
    return float(_GH_W @ (lam_c / (lam_c + total)) / math.sqrt(math.pi))


def calibrate_censoring(design: SimDesign) -> float:
    """Censoring hazard that hits the design's target censoring fraction.

    A design with an explicit ``lambda_c`` keeps it."""
    if design.lambda_c is not None:
        return design.lambda_c
    return _calibrate(design.model, design.beta0, design.target_censoring)


def _calibrate(model: str, beta0: float, q: float) -> float:
    if q == 0.0:
        return 0.0
    if model in ("null", "onesample"):
        return q / (1.0 - q)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if _censoring_fraction(hi, model, beta0) >= q:
            break
        hi *= 2.0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        if _censoring_fraction(mid, model, beta0) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    return (lo + hi) / 2.0


# -- data generation ----------------------------------------------------------

def _stream(master_seed: int, rep_index: int, rows: int, n: int) -> np.ndarray:
    key = np.array([master_seed, rep_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.random((rows, n))


def _draw(design: SimDesign, rep_index: int, lam_c: float):
    """Raw replication arrays; observed and full-data views share them."""
    model = design.model
    n = design.n
    if model == "onesample":
        u = _stream(design.master_seed, rep_index, 3, n)
        z = None
        t = -np.log1p(-u[0])
        uc, uxi = u[1], u[2]
    elif model in ("null", "coxexp"):
        u = _stream(design.master_seed, rep_index, 4, n)
        z = ndtri(u[0])
        rate = np.exp(design.beta0 * z) if model == "coxexp" else 1.0
        t = -np.log1p(-u[1]) / rate
        uc, uxi = u[2], u[3]
    else:  # type2
        u = _stream(design.master_seed, rep_index, 5, n)
        z = ndtri(u[0])
        t1 = -np.log1p(-u[1]) / np.exp(design.beta0 * z)
        t2 = -np.log1p(-u[2])
        uc, uxi = u[3], u[4]
        t = np.minimum(t1, t2)
        phi = (t1 <= t2).astype(np.uint8)
    c = (-np.log1p(-uc) / lam_c) if lam_c > 0 else np.full(n, np.inf)
    x = np.minimum(t, c)
    delta = (t <= c).astype(np.uint8)
    xi = (uxi < design.rho_or_tau).astype(np.uint8)
    if model == "type2":
        return x, z, delta, xi, phi
    return x, z, delta, xi, None


def generate(design: SimDesign, rep_index: int) -> Dataset:
    """Observed dataset of one replication (deterministic in the seed)."""
    lam_c = _calibrate(design.model, design.beta0, design.target_censoring)
    x, z, delta, xi, phi = _draw(design, rep_index, lam_c)
    if design.model == "type2":
        return Dataset.from_type2_arrays(x, delta, xi, phi, z)
    return Dataset.from_type1_arrays(x, xi, delta, z)


# -- replication driver -------------------------------------------------------

_NAN = float("nan")


def _eval_regression(tag, ds_obs, ds_full):
    if tag == "full":
        fit = cox.solve(ds_full, "full")
    elif tag == "complete-case":
        fit = cox.solve(ds_obs, "complete-case")
    elif tag == "s1":
        fit = cox.solve(ds_obs, "s1")
    elif tag == "adaptive":
        fit = cox.adaptive_fit(ds_obs)
    else:
        raise ValueError(f"unknown estimator {tag!r}")
    _, reject = cox.wald_test(fit, level=0.05)
    return fit.beta[0], fit.covariance[0, 0], float(reject[0]), _NAN


def _eval_onesample(tag, ds, t):
    if tag == "adaptive":
        est, var, alpha = hazard.adaptive_survival(ds, t)
        return est, var, _NAN, alpha
    if tag == "complete-case":
        return hazard.complete_case_survival(ds, t), _NAN, _NAN, _NAN
    if tag == "lo":
        return 1.0 - hazard.lo_estimator(ds).value_at(t), _NAN, _NAN, _NAN
    raise ValueError(f"unknown estimator {tag!r}")


def _eval_type2(tag, ds_obs, ds_full):
    if tag == "adaptive":
        fit = type2.fit_phi(ds_obs, "adaptive")
    elif tag == "complete-case":
        fit = type2.solve_phi(ds_obs, "complete-case")
    elif tag == "s1":
        fit = type2.solve_phi(ds_obs, "s1")
    elif tag == "full":
        fit = type2.solve_phi(ds_full, "full")
    else:
        raise ValueError(f"unknown estimator {tag!r}")
    var = fit.covariance[0, 0]
    reject = float(abs(fit.beta[0]) / math.sqrt(var) > 1.959963984540054)
    return fit.beta[0], var, reject, _NAN


def run(design: SimDesign, threads: int | None = None, strict: bool = False) -> SimReport:
    """Execute the design, fitting every estimator on shared datasets.

    Replication failures are excluded per estimator and counted;
    estimators failing on more than 1% of the replications are flagged
    (and raise :class:`TooManyFailures` when ``strict``).
    """
    if threads is None:
        threads = int(os.environ.get("MISSURV_THREADS", "1"))
    threads = max(1, threads)
    lam_c = _calibrate(design.model, design.beta0, design.target_censoring)
    tags = list(design.estimators)
    reps = design.reps
    eval_time = design.eval_time
    if design.model == "onesample" and eval_time is None:
        eval_time = math.log(2.0)

    k = len(tags)
    est = np.full((k, reps), np.nan)
    varest = np.full((k, reps), np.nan)
    rej = np.full((k, reps), np.nan)
    alph = np.full((k, reps), np.nan)

    need_full = "full" in tags

    def work(lo: int, hi: int):
        for r in range(lo, hi):
            x, z, delta, xi, phi = _draw(design, r, lam_c)
            if design.model == "type2":
                ds_obs = Dataset.from_type2_arrays(x, delta, xi, phi, z)
                ds_full = (Dataset.from_type2_arrays(x, delta, np.ones_like(xi), phi, z)
                           if need_full else None)
                evaluate = lambda tag: _eval_type2(tag, ds_obs, ds_full)
            elif design.model == "onesample":
                ds_obs = Dataset.from_type1_arrays(x, xi, delta)
                evaluate = lambda tag: _eval_onesample(tag, ds_obs, eval_time)
            else:
                ds_obs = Dataset.from_type1_arrays(x, xi, delta, z)
                ds_full = (Dataset.from_type1_arrays(x, np.ones_like(xi), delta, z)
                           if need_full else None)
                evaluate = lambda tag: _eval_regression(tag, ds_obs, ds_full)
            for j, tag in enumerate(tags):
                try:
                    est[j, r], varest[j, r], rej[j, r], alph[j, r] = evaluate(tag)
                except MissurvError:
                    pass

    if threads == 1:
        work(0, reps)
    else:
        bounds = np.linspace(0, reps, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            for f in futures:
                f.result()

    stats = []
    for j, tag in enumerate(tags):
        ok = np.isfinite(est[j])
        n_ok = int(ok.sum())
        n_failed = reps - n_ok
        vals = est[j, ok]
        mean = float(vals.mean()) if n_ok else _NAN
        variance = float(vals.var(ddof=1)) if n_ok > 1 else _NAN
        ve = varest[j, ok]
        ve = ve[np.isfinite(ve)]
        mve = float(ve.mean()) if ve.size else None
        rj = rej[j, ok]
        rj = rj[np.isfinite(rj)]
        rate = float(rj.mean()) if rj.size else None
        mc_se = (float(math.sqrt(rate * (1.0 - rate) / rj.size))
                 if rate is not None and rj.size else None)
        al = alph[j, ok]
        al = al[np.isfinite(al)]
        mean_alpha = float(al.mean()) if al.size else None
        flagged = n_failed > 0.01 * reps
        stats.append(EstimatorStats(
            estimator=tag, mean=mean, variance=variance,
            mean_variance_estimate=mve, rejection_rate=rate,
            rejection_rate_mc_se=mc_se, mean_alpha=mean_alpha,
            n_failed=n_failed, flagged=flagged,
        ))

    if strict and any(s.flagged for s in stats):
        bad = ", ".join(s.estimator for s in stats if s.flagged)
        raise TooManyFailures(f"more than 1% of replications failed for: {bad}")

    ratios = {}
    by_tag = {s.estimator: s for s in stats}
    if design.model == "onesample" and "adaptive" in by_tag:
        ref = by_tag["adaptive"].variance
        for s in stats:
            if s.estimator != "adaptive" and np.isfinite(s.variance) and ref > 0:
                ratios[f"{s.estimator}/adaptive"] = float(s.variance / ref)

    return SimReport(design=design, lambda_c=lam_c, eval_time=eval_time,
                     stats=tuple(stats), efficiency_ratios=ratios)


# -- canned table designs -----------------------------------------------------

_RHO_CENS_BLOCKS = [(0.8, 0.2), (0.8, 0.5), (0.8, 0.7),
                    (0.5, 0.2), (0.5, 0.5), (0.5, 0.7)]
# column order of the one-sample summary: censoring varies slowest
_ONESAMPLE_BLOCKS = [(0.2, 0.8), (0.2, 0.5), (0.5, 0.8),
                     (0.5, 0.5), (0.7, 0.8), (0.7, 0.5)]


def table1_designs(reps=10000, master_seed=0, n=100):
    """Six regression blocks under the null hazard model (beta0 = 0)."""
    return [SimDesign(model="null", n=n, rho_or_tau=rho, target_censoring=q,
                      reps=reps, master_seed=master_seed + i)
            for i, (rho, q) in enumerate(_RHO_CENS_BLOCKS)]


def table2_designs(reps=10000, master_seed=0, n=100):
    """Six regression blocks with hazard exp(0.5 Z)."""
    return [SimDesign(model="coxexp", beta0=0.5, n=n, rho_or_tau=rho,
                      target_censoring=q, reps=reps, master_seed=master_seed + i)
            for i, (rho, q) in enumerate(_RHO_CENS_BLOCKS)]


def table3_designs(reps=10000, master_seed=0, n=100):
    """Six one-sample blocks evaluated at the exp(1) median log 2."""
    return [SimDesign(model="onesample", n=n, rho_or_tau=rho,
                      target_censoring=q, reps=reps, master_seed=master_seed + i,
                      eval_time=math.log(2.0))
            for i, (q, rho) in enumerate(_ONESAMPLE_BLOCKS)]


def type2_designs(reps=500, master_seed=0, n=2000):
    """Competing-risks bias demonstration block (tau = 0.5)."""
    return [SimDesign(model="type2", beta0=0.5, n=n, rho_or_tau=0.5,
                      target_censoring=0.2, reps=reps, master_seed=master_seed,
                      estimators=("adaptive", "complete-case"))]


TABLES = {
    "table1": table1_designs,
    "table2": table2_designs,
    "table3": table3_designs,
    "type2": type2_designs,
}
