"""Step-function curve containers and CSV (de)serialization.

All curves are right-continuous step functions: the value at ``t`` is the
cumulative value at the last jump time <= t.  Hazard curves start at 0,
survival curves at 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCSV


def _eval_step(jump_times, values, t, before):
    t = np.asarray(t, dtype=np.float64)
    if values.size == 0:
        out = np.full(t.shape, before)
        return float(before) if t.ndim == 0 else out
    idx = np.searchsorted(jump_times, t, side="right") - 1
    out = np.where(idx >= 0, values[np.maximum(idx, 0)], before)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HazardCurve:
    """Cumulative-hazard step function.

    ``values[i]`` is the cumulative hazard just after ``jump_times[i]``;
    the curve is 0 before the first jump.  ``variances``, when present,
    estimates Var of sqrt(n) * (estimate - truth) at each jump time.
    """

    jump_times: np.ndarray
    values: np.ndarray
    variances: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def value_at(self, t):
        return _eval_step(self.jump_times, self.values, t, 0.0)

    def variance_at(self, t):
        if self.variances is None:
            return None
        return _eval_step(self.jump_times, self.variances, t, 0.0)


@dataclass(frozen=True)
class SurvivalCurve:
    """Survival-probability step function (1 before the first jump)."""

    jump_times: np.ndarray
    values: np.ndarray
    variances: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def value_at(self, t):
        return _eval_step(self.jump_times, self.values, t, 1.0)

    def variance_at(self, t):
        if self.variances is None:
            return None
        return _eval_step(self.jump_times, self.variances, t, 0.0)


@dataclass(frozen=True)
class BaselineCurve:
    """Cumulative baseline hazard under the Cox model.

    Besides the step function itself, carries the coefficient vector it
    was evaluated at, the running integral of the risk-weighted covariate
    mean (``a_path``), and the per-jump value of n^{-1} sum Y_i e^{b'Z_i}
    (``hz_path``), whose size near the right tail indicates how reliable
    tail estimates are.
    """

    jump_times: np.ndarray
    values: np.ndarray
    beta_used: np.ndarray
    a_path: np.ndarray            # (njumps, p)
    hz_path: np.ndarray           # (njumps,)
    variances: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def value_at(self, t):
        return _eval_step(self.jump_times, self.values, t, 0.0)

    def a_at(self, t):
        idx = int(np.searchsorted(self.jump_times, t, side="right")) - 1
        if idx < 0:
            return np.zeros(self.a_path.shape[1])
        return self.a_path[idx]


def group_by_time(times_sorted, increments, support):
    """Sum per-record increments within tie groups.

    Returns (unique jump times, per-time increment sums) keeping exactly
    the times where ``support`` marks at least one contributing record.
    Cumulative values stay exact because unsupported times carry zero
    increment by construction.
    """
    uniq, inverse = np.unique(times_sorted, return_inverse=True)
    inc_by_time = np.bincount(inverse, weights=increments, minlength=uniq.size)
    keep = np.bincount(inverse, weights=np.asarray(support, dtype=np.float64),
                       minlength=uniq.size) > 0
    cum = np.cumsum(inc_by_time)
    return uniq[keep], cum[keep]


def group_last_positions(times_sorted, support):
    """Sorted-record index of the last member of each kept tie group."""
    uniq, inverse = np.unique(times_sorted, return_inverse=True)
    last = np.zeros(uniq.size, dtype=np.int64)
    np.maximum.at(last, inverse, np.arange(times_sorted.size, dtype=np.int64))
    keep = np.bincount(inverse, weights=np.asarray(support, dtype=np.float64),
                       minlength=uniq.size) > 0
    return last[keep]


def curve_to_csv(curve) -> str:
    """Serialize as ``time,value,variance`` rows (17 significant digits)."""
    lines = ["time,value,variance"]
    var = curve.variances
    for i, (t, v) in enumerate(zip(curve.jump_times, curve.values)):
        tail = "" if var is None else format(var[i], ".17g")
        lines.append(f"{t:.17g},{v:.17g},{tail}")
    return "\n".join(lines) + "\n"


def curve_from_csv(text: str, survival: bool = False):
    """Parse :func:`curve_to_csv` output back into a curve."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].split(",")[:2] != ["time", "value"]:
        raise InvalidCSV("expected a 'time,value,variance' header")
    times, values, variances = [], [], []
    has_var = False
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise InvalidCSV(f"malformed curve row: {ln!r}")
        times.append(float(parts[0]))
        values.append(float(parts[1]))
        if parts[2] != "":
            has_var = True
            variances.append(float(parts[2]))
        else:
            variances.append(np.nan)
    cls = SurvivalCurve if survival else HazardCurve
    return cls(
        jump_times=np.asarray(times),
        values=np.asarray(values),
        variances=np.asarray(variances) if has_var else None,
    )
