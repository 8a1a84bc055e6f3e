"""Data model and counting-process primitives.

A :class:`Dataset` is a validated, immutable collection of subjects with
an observed time, a status, and a (possibly empty) covariate vector.
Two status families are supported:

* :class:`FailureStatus` for data where the failure indicator itself may
  be missing (``type1``): Failure, Censored, or Unknown.
* :class:`Type2Status` for competing-risks data where the cause of a
  death may be missing (``type2``): CauseOfInterest, OtherCause,
  UnknownCause, or Censored.

All estimators consume the precomputed event ordering (time ascending,
ties kept in input order) and the sorted array views stored here.
"""

from __future__ import annotations

import csv
import enum
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    InvalidCSV,
    MixedStatusKinds,
    NegativeTime,
    NonFiniteValue,
)


class FailureStatus(enum.Enum):
    """Observation state when the failure indicator may be missing."""

    FAILURE = "failure"      # indicator observed, event was a failure
    CENSORED = "censored"    # indicator observed, event was censoring
    UNKNOWN = "unknown"      # indicator not observed


class Type2Status(enum.Enum):
    """Observation state when the cause of death may be missing.

    Censored subjects never carry cause information; a death has either a
    known cause (of interest or other) or an unknown one.
    """

    CAUSE_OF_INTEREST = "cause-of-interest"
    OTHER_CAUSE = "other-cause"
    UNKNOWN_CAUSE = "unknown-cause"
    CENSORED = "censored"


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject: observed time, status, covariate vector."""

    time: float
    status: FailureStatus | Type2Status
    covariates: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(float(c) for c in self.covariates))
        object.__setattr__(self, "time", float(self.time))


Increment = namedtuple("Increment", ["index", "time", "xi_dn_u", "xi_dn_c", "unknown_dn"])


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Validated records plus the sorted views every estimator shares.

    ``event_order`` sorts records by time ascending with ties kept in
    input order.  ``group_start[k]`` is, for sorted position ``k``, the
    first sorted position sharing the same time; the risk set for any
    jump at that time is the suffix ``group_start[k]:``.

    Instances are immutable (arrays are write-protected) and safe to
    share across threads.
    """

    kind: str                      # "type1" | "type2"
    n: int
    p: int
    times: np.ndarray              # (n,) input order
    z: np.ndarray                  # (n, p) input order
    event_order: np.ndarray        # (n,) permutation: input index per sorted slot
    times_sorted: np.ndarray       # (n,)
    z_sorted: np.ndarray           # (n, p)
    group_start: np.ndarray        # (n,) first sorted index of each tie group
    xi: np.ndarray                 # (n,) sorted; 1 = indicator/cause observed
    delta: np.ndarray              # (n,) sorted; 1 = failure/death (0 when unknown, type1)
    phi: np.ndarray                # (n,) sorted; type2 cause of interest (0 elsewhere)
    records: tuple[SurvivalRecord, ...] = field(repr=False, default=())

    # -- constructors --------------------------------------------------

    @staticmethod
    def from_type1_arrays(times, xi, delta, z=None) -> "Dataset":
        """Build a type1 dataset from arrays (xi=1 where delta is known)."""
        return _build("type1", times, xi, delta, None, z)

    @staticmethod
    def from_type2_arrays(times, delta, xi, phi, z=None) -> "Dataset":
        """Build a type2 dataset from arrays (delta = death, xi = cause known)."""
        return _build("type2", times, xi, delta, phi, z)

    # -- views ----------------------------------------------------------

    @property
    def risk_count(self) -> np.ndarray:
        """Size of the risk set at each sorted record's time."""
        return self.n - self.group_start

    def sorted_statuses(self):
        return self.xi, self.delta, self.phi

    def subset(self, mask_input_order: np.ndarray) -> "Dataset":
        """Dataset restricted to the records selected in input order."""
        idx = np.flatnonzero(np.asarray(mask_input_order))
        if idx.size == 0:
            raise EmptyDataset("subset selects no records")
        recs = [self.records[i] for i in idx] if self.records else None
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.event_order] = np.arange(self.n)
        if self.kind == "type1":
            ds = _build(
                "type1",
                self.times[idx],
                self.xi[inv][idx],
                self.delta[inv][idx],
                None,
                self.z[idx] if self.p else None,
            )
        else:
            ds = _build(
                "type2",
                self.times[idx],
                self.xi[inv][idx],
                self.delta[inv][idx],
                self.phi[inv][idx],
                self.z[idx] if self.p else None,
            )
        if recs is not None:
            object.__setattr__(ds, "records", tuple(recs))
        return ds


def _build(kind, times, xi, delta, phi, z) -> Dataset:
    times = np.ascontiguousarray(times, dtype=np.float64)
    n = times.shape[0]
    if n == 0:
        raise EmptyDataset("need at least one record")
    if not np.all(np.isfinite(times)):
        raise NonFiniteValue("times contain NaN or infinity")
    if np.any(times < 0):
        raise NegativeTime("times must be nonnegative")
    if z is None:
        z = np.zeros((n, 0))
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != n:
        raise DimensionMismatch(f"{n} times but {z.shape[0]} covariate rows")
    if z.size and not np.all(np.isfinite(z)):
        raise NonFiniteValue("covariates contain NaN or infinity")
    p = z.shape[1]

    order = np.argsort(times, kind="stable")
    ts = times[order]
    group_start = np.searchsorted(ts, ts, side="left").astype(np.int64)

    xi = np.asarray(xi, dtype=np.uint8)[order]
    delta = np.asarray(delta, dtype=np.uint8)[order]
    phi = (np.zeros(n, dtype=np.uint8) if phi is None
           else np.asarray(phi, dtype=np.uint8)[order])
    if kind == "type1":
        delta = delta * xi            # an unknown indicator carries no delta
    else:
        xi = xi | (1 - delta)         # censored records carry no cause info
        phi = phi * xi * delta        # a cause is meaningful only when observed

    return Dataset(
        kind=kind,
        n=n,
        p=p,
        times=_freeze(times),
        z=_freeze(z),
        event_order=_freeze(order.astype(np.int64)),
        times_sorted=_freeze(ts),
        z_sorted=_freeze(np.ascontiguousarray(z[order])),
        group_start=_freeze(group_start),
        xi=_freeze(xi),
        delta=_freeze(delta),
        phi=_freeze(phi),
    )


def validate(records) -> Dataset:
    """Validate a list of :class:`SurvivalRecord` and build a Dataset.

    Ties are broken by (time, input position), so results are
    reproducible for a given input order.

    Raises
    ------
    EmptyDataset, DimensionMismatch, NonFiniteValue, NegativeTime,
    MixedStatusKinds
    """
    records = tuple(records)
    if not records:
        raise EmptyDataset("need at least one record")

    kinds = {type(r.status) for r in records}
    if kinds == {FailureStatus}:
        kind = "type1"
    elif kinds == {Type2Status}:
        kind = "type2"
    else:
        raise MixedStatusKinds("records mix type1 and type2 statuses")

    p = len(records[0].covariates)
    for i, r in enumerate(records):
        if len(r.covariates) != p:
            raise DimensionMismatch(
                f"record {i} has {len(r.covariates)} covariates, expected {p}"
            )

    times = np.array([r.time for r in records], dtype=np.float64)
    z = (np.array([r.covariates for r in records], dtype=np.float64)
         if p else np.zeros((len(records), 0)))

    if kind == "type1":
        xi = np.array([r.status is not FailureStatus.UNKNOWN for r in records], dtype=np.uint8)
        delta = np.array([r.status is FailureStatus.FAILURE for r in records], dtype=np.uint8)
        ds = _build("type1", times, xi, delta, None, z)
    else:
        delta = np.array([r.status is not Type2Status.CENSORED for r in records], dtype=np.uint8)
        xi = np.array(
            [r.status in (Type2Status.CAUSE_OF_INTEREST, Type2Status.OTHER_CAUSE)
             or r.status is Type2Status.CENSORED
             for r in records],
            dtype=np.uint8,
        )
        phi = np.array([r.status is Type2Status.CAUSE_OF_INTEREST for r in records], dtype=np.uint8)
        ds = _build("type2", times, xi, delta, phi, z)
    object.__setattr__(ds, "records", records)
    return ds


def risk_set_size(ds: Dataset, t: float) -> int:
    """Number of subjects still under observation at ``t`` (time >= t)."""
    return int(ds.n - np.searchsorted(ds.times_sorted, t, side="left"))


def counting_increments(ds: Dataset):
    """Yield one jump entry per record in event order (type1 datasets).

    Each entry carries the indicators of the three observable jump kinds
    at that record's time: a known failure, a known censoring, and an
    unknown-status event.
    """
    if ds.kind != "type1":
        raise MixedStatusKinds("counting_increments is defined for type1 datasets")
    for k in range(ds.n):
        xi = int(ds.xi[k])
        delta = int(ds.delta[k])
        yield Increment(
            index=int(ds.event_order[k]),
            time=float(ds.times_sorted[k]),
            xi_dn_u=xi * delta,
            xi_dn_c=xi * (1 - delta),
            unknown_dn=1 - xi,
        )


# -- CSV ingestion ----------------------------------------------------------
#
# Schema: header row with `time`, `status`, then `z1..zp`.
# type1 status codes: 1=Failure, 0=Censored, NA=Unknown.
# type2 status codes: 1=CauseOfInterest, 2=OtherCause, NA=UnknownCause, 0=Censored.

_TYPE1_CODES = {
    "1": FailureStatus.FAILURE,
    "0": FailureStatus.CENSORED,
    "NA": FailureStatus.UNKNOWN,
}
_TYPE2_CODES = {
    "1": Type2Status.CAUSE_OF_INTEREST,
    "2": Type2Status.OTHER_CAUSE,
    "NA": Type2Status.UNKNOWN_CAUSE,
    "0": Type2Status.CENSORED,
}


def read_csv(path, missing_type: str = "type1") -> Dataset:
    """Read the documented CSV schema into a validated Dataset."""
    codes = {"type1": _TYPE1_CODES, "type2": _TYPE2_CODES}.get(missing_type)
    if codes is None:
        raise InvalidCSV(f"unknown missing type {missing_type!r}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidCSV("empty file") from None
        header = [h.strip() for h in header]
        try:
            t_col = header.index("time")
            s_col = header.index("status")
        except ValueError:
            raise InvalidCSV("header must contain 'time' and 'status'") from None
        z_cols = []
        for j in range(1, len(header) + 1):
            name = f"z{j}"
            if name in header:
                z_cols.append(header.index(name))
            else:
                break

        records = []
        for ln, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DimensionMismatch(f"line {ln}: expected {len(header)} fields, got {len(row)}")
            code = row[s_col].strip()
            if code not in codes:
                raise InvalidCSV(f"line {ln}: unknown status code {code!r}")
            try:
                time = float(row[t_col])
                covs = tuple(float(row[c]) for c in z_cols)
            except ValueError as exc:
                raise InvalidCSV(f"line {ln}: {exc}") from None
            records.append(SurvivalRecord(time, codes[code], covs))
    return validate(records)
