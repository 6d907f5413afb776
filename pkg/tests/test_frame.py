import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drumcast.exceptions import (
    DuplicateTimestamp,
    IrregularSampling,
    MalformedRow,
    NonMonotonicTimestamp,
    SchemaMismatch,
    UnknownVariable,
)
from drumcast.frame import SeriesFrame, as_frame, format_float, load_csv, write_csv


def test_three_row_file(write_text):
    frame = load_csv(write_text("a.csv", "timestamp,a\n0,1.0\n1,2.0\n2,3.0"))
    assert frame.names == ("a",)
    assert len(frame) == 3
    np.testing.assert_array_equal(frame["a"], [1.0, 2.0, 3.0])


def test_decreasing_timestamp(write_text):
    with pytest.raises(NonMonotonicTimestamp):
        load_csv(write_text("a.csv", "timestamp,a\n5,1\n4,2\n"))


def test_duplicate_timestamp(write_text):
    with pytest.raises(DuplicateTimestamp):
        load_csv(write_text("a.csv", "timestamp,a\n5,1\n5,2\n"))


def test_irregular_sampling(write_text):
    with pytest.raises(IrregularSampling):
        load_csv(write_text("a.csv", "timestamp,a\n0,1\n1,2\n3,3\n"))


def test_empty_cell_is_a_gap(write_text):
    frame = load_csv(write_text("a.csv", "timestamp,a,b\n0,1,4\n1,2,5\n2,,6\n3,4,7\n"))
    a = frame["a"]
    assert np.isnan(a[2])
    assert np.flatnonzero(np.isnan(a)).tolist() == [2]
    assert frame.gap_mask()["a"].tolist() == [False, False, True, False]
    assert not frame.gap_mask()["b"].any()


def test_crlf_accepted(write_text):
    frame = load_csv(write_text("a.csv", "timestamp,a\r\n0,1.5\r\n1,2.5\r\n"))
    np.testing.assert_array_equal(frame["a"], [1.5, 2.5])


@pytest.mark.parametrize("cell", ["abc", "nan", "inf", "1e400"])
def test_bad_cells(write_text, cell):
    with pytest.raises(MalformedRow):
        load_csv(write_text("a.csv", f"timestamp,a\n0,1\n1,{cell}\n"))


def test_ragged_row(write_text):
    with pytest.raises(MalformedRow):
        load_csv(write_text("a.csv", "timestamp,a,b\n0,1,2\n1,2\n"))


def test_schema(write_text):
    path = write_text("a.csv", "timestamp,a,b\n0,1,2\n")
    assert load_csv(path, ["a", "b"]).names == ("a", "b")
    with pytest.raises(SchemaMismatch):
        load_csv(path, ["b", "a"])
    with pytest.raises(SchemaMismatch):
        load_csv(write_text("b.csv", "time,a\n0,1\n"))


def test_unknown_variable():
    frame = SeriesFrame.from_arrays({"a": [1.0, 2.0]})
    with pytest.raises(UnknownVariable):
        frame["zz"]
    with pytest.raises(UnknownVariable):
        frame.require(["a", "zz"])


def test_round_trip_is_bit_exact(tmp_path, rng):
    values = rng.standard_normal(50) * 10 ** rng.uniform(-8, 8, 50)
    frame = SeriesFrame.from_arrays({"x": values, "y": np.arange(50.0)}, start=1483354801)
    path = tmp_path / "f.csv"
    write_csv(frame, path)
    back = load_csv(path)
    assert back.equals(frame)
    assert back["x"].tobytes() == frame["x"].tobytes()
    assert path.read_bytes().count(b"\r") == 0


def test_gaps_round_trip(tmp_path):
    frame = SeriesFrame.from_arrays({"x": [1.0, math.nan, 3.0]})
    path = tmp_path / "f.csv"
    text = write_csv(frame, path)
    assert text.splitlines()[2] == "1,"
    assert np.isnan(load_csv(path)["x"][1])


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(v):
    assert float(format_float(v)) == v


def test_columns_are_read_only():
    frame = SeriesFrame.from_arrays({"a": [1.0, 2.0]})
    with pytest.raises(ValueError):
        frame["a"][0] = 5.0


def test_slice_concat_and_select():
    frame = SeriesFrame.from_arrays({"a": np.arange(10.0), "b": -np.arange(10.0)}, start=100)
    parts = [frame.slice(0, 3), frame.slice(3, 7), frame.slice(7, None)]
    assert SeriesFrame.concat(parts).equals(frame)
    assert frame.select(["b"]).names == ("b",)
    assert frame.slice(3, 7).timestamps[0] == 103


def test_to_array_orders_columns():
    frame = SeriesFrame.from_arrays({"a": [1.0, 2.0], "b": [3.0, 4.0]})
    np.testing.assert_array_equal(frame.to_array(["b", "a"]), [[3.0, 1.0], [4.0, 2.0]])


def test_as_frame_from_pandas():
    pd = pytest.importorskip("pandas")
    df = pd.DataFrame({"a": [1.0, 2.0, 3.0]}, index=pd.Index([10, 11, 12], name="timestamp"))
    frame = as_frame(df)
    assert frame.timestamps.tolist() == [10, 11, 12]
    assert frame.to_pandas()["a"].tolist() == [1.0, 2.0, 3.0]
