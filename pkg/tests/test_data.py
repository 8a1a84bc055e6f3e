import numpy as np
import pytest

import missurv as mv
from missurv.data import Dataset, FailureStatus as F, SurvivalRecord as R, Type2Status as T2
from missurv import errors


def test_event_order_sorts_by_time_then_input_position():
    ds = mv.validate([R(3, F.CENSORED), R(1, F.FAILURE), R(2, F.FAILURE), R(4, F.CENSORED)])
    assert list(ds.event_order) == [1, 2, 0, 3]


def test_tied_times_keep_input_order():
    ds = mv.validate([R(2, F.FAILURE), R(1, F.FAILURE), R(2, F.CENSORED)])
    assert list(ds.event_order) == [1, 0, 2]
    assert list(ds.group_start) == [0, 1, 1]


def test_mixed_covariate_lengths_rejected():
    with pytest.raises(errors.DimensionMismatch):
        mv.validate([R(1, F.FAILURE, (1.0, 2.0)), R(2, F.CENSORED, (1.0, 2.0, 3.0))])


def test_single_record_time_zero_is_valid():
    ds = mv.validate([R(0.0, F.CENSORED)])
    assert ds.n == 1
    assert mv.risk_set_size(ds, 0.0) == 1


def test_empty_and_nonfinite_and_negative_inputs():
    with pytest.raises(errors.EmptyDataset):
        mv.validate([])
    with pytest.raises(errors.NonFiniteValue):
        mv.validate([R(np.nan, F.FAILURE)])
    with pytest.raises(errors.NonFiniteValue):
        mv.validate([R(1.0, F.FAILURE, (np.inf,))])
    with pytest.raises(errors.NegativeTime):
        mv.validate([R(-1.0, F.FAILURE)])


def test_mixed_status_kinds_rejected():
    with pytest.raises(errors.MixedStatusKinds):
        mv.validate([R(1, F.FAILURE), R(2, T2.CENSORED)])


def test_risk_set_size_examples():
    ds = mv.validate([R(t, F.FAILURE) for t in (1, 2, 3, 4)])
    assert mv.risk_set_size(ds, 2.5) == 2
    assert mv.risk_set_size(ds, 0) == 4
    assert mv.risk_set_size(ds, 5) == 0


def test_risk_set_size_monotone_nonincreasing():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(1, 40)
        times = rng.exponential(size=n)
        ds = Dataset.from_type1_arrays(times, np.ones(n), rng.integers(0, 2, n))
        grid = np.sort(rng.uniform(0, times.max() * 1.5, size=15))
        sizes = [mv.risk_set_size(ds, t) for t in grid]
        assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_counting_increments_definitions():
    ds = mv.validate([R(2, F.FAILURE), R(2, F.UNKNOWN), R(2, F.CENSORED)])
    by_index = {inc.index: inc for inc in mv.counting_increments(ds)}
    assert (by_index[0].xi_dn_u, by_index[0].xi_dn_c, by_index[0].unknown_dn) == (1, 0, 0)
    assert (by_index[1].xi_dn_u, by_index[1].xi_dn_c, by_index[1].unknown_dn) == (0, 0, 1)
    assert (by_index[2].xi_dn_u, by_index[2].xi_dn_c, by_index[2].unknown_dn) == (0, 1, 0)


def test_counting_increments_cover_every_record_once():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(1, 30))
        statuses = rng.choice([F.FAILURE, F.CENSORED, F.UNKNOWN], size=n)
        ds = mv.validate([R(t, s) for t, s in zip(rng.exponential(size=n), statuses)])
        entries = list(mv.counting_increments(ds))
        assert len(entries) == n
        assert sorted(e.index for e in entries) == list(range(n))
        total = sum(e.xi_dn_u + e.xi_dn_c + e.unknown_dn for e in entries)
        assert total == n


def test_validate_is_idempotent():
    rng = np.random.default_rng(2)
    statuses = rng.choice([F.FAILURE, F.CENSORED, F.UNKNOWN], size=25)
    times = rng.choice([1.0, 2.0, 3.0, 4.0], size=25)
    ds = mv.validate([R(t, s, (float(v),)) for t, s, v in zip(times, statuses, rng.normal(size=25))])
    again = mv.validate(ds.records)
    assert np.array_equal(ds.event_order, again.event_order)
    assert np.array_equal(ds.times_sorted, again.times_sorted)


def test_dataset_arrays_are_immutable():
    ds = mv.validate([R(1, F.FAILURE), R(2, F.CENSORED)])
    with pytest.raises(ValueError):
        ds.times_sorted[0] = 5.0


def test_type2_censored_records_carry_no_cause():
    ds = mv.validate([R(1, T2.CAUSE_OF_INTEREST), R(2, T2.UNKNOWN_CAUSE), R(3, T2.CENSORED)])
    assert list(ds.delta) == [1, 1, 0]
    assert list(ds.xi) == [1, 0, 1]
    assert list(ds.phi) == [1, 0, 0]


def test_subset_restricts_in_input_order():
    ds = mv.validate([R(3, F.FAILURE, (1.0,)), R(1, F.CENSORED, (2.0,)), R(2, F.UNKNOWN, (3.0,))])
    sub = ds.subset([True, False, True])
    assert sub.n == 2
    assert list(sub.times) == [3.0, 2.0]
    assert list(sub.z[:, 0]) == [1.0, 3.0]


def test_csv_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,status,z1,z2\n1.5,1,0.3,-1\n2.0,NA,0.1,2\n0.5,0,1.0,0\n")
    ds = mv.read_csv(path)
    assert ds.n == 3 and ds.p == 2
    assert ds.kind == "type1"
    # sorted order: 0.5 (censored), 1.5 (failure), 2.0 (unknown)
    assert list(ds.xi) == [1, 1, 0]
    assert list(ds.delta) == [0, 1, 0]


def test_csv_type2_codes(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,status\n1,1\n2,2\n3,NA\n4,0\n")
    ds = mv.read_csv(path, "type2")
    assert ds.kind == "type2"
    assert list(ds.delta) == [1, 1, 1, 0]
    assert list(ds.phi) == [1, 0, 0, 0]


def test_csv_bad_status_code(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,status\n1,7\n")
    with pytest.raises(errors.InvalidCSV):
        mv.read_csv(path)


def test_csv_ragged_row_maps_to_dimension_mismatch(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("time,status,z1\n1,1,0.5\n2,0\n")
    with pytest.raises(errors.DimensionMismatch):
        mv.read_csv(path)
