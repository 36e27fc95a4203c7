import logging

import numpy as np
import pytest

from bfmm.datamodel import (
    Censor,
    ColumnSchema,
    build_dataset,
    load_dataset,
    parse_schema_line,
    read_labels,
    standardization_report,
    write_dataset,
    write_labels,
)
from bfmm.errors import IngestionError, InvalidArgumentError, SchemaError

from conftest import small_dataset


def _write(tmp_path, csv_text, schema_text):
    d, s = tmp_path / "d.csv", tmp_path / "s.txt"
    d.write_text(csv_text)
    s.write_text(schema_text)
    return d, s


PLAIN_CSV = """g,x1,x2
a,1.0,10
b,2.5,11
c,3.0,12
a,0.5,9
b,1.5,8
c,2.0,7
"""
PLAIN_SCHEMA = """# columns
g,categorical,levels=a|b|c
x1,continuous
x2,continuous
"""


def test_plain_load_reorders_continuous_first(tmp_path):
    ds = load_dataset(*_write(tmp_path, PLAIN_CSV, PLAIN_SCHEMA))
    assert (ds.n, ds.q, ds.M) == (6, 2, 3)
    assert ds.names == ["x1", "x2", "g"]
    assert (ds.censor == Censor.OBSERVED).all()
    assert ds.categorical[:, 0].tolist() == [0, 1, 2, 0, 1, 2]
    assert ds.continuous[1, 0] == 2.5
    assert ds.row_ids == tuple(str(i) for i in range(1, 7))


def test_flag_column_maps_to_lower_limit(tmp_path):
    csv_text = "subject_id,x3,x3_cens\ns1,0.2,0\ns2,-1.0,1\ns3,,1\ns4,1.7,0\n"
    ds = load_dataset(*_write(tmp_path, csv_text, "x3,continuous,lower=-1.0\n"))
    assert ds.censor[:, 0].tolist() == [0, 1, 1, 0]
    assert ds.continuous[1, 0] == -1.0 and ds.continuous[2, 0] == -1.0
    assert ds.row_ids == ("s1", "s2", "s3", "s4")
    assert ds.has_censoring


def test_unknown_level_names_row_and_column(tmp_path):
    csv_text = "x1,colour\n1.0,a\n2.0,purple\n"
    with pytest.raises(IngestionError, match=r"row 3.*colour.*purple"):
        load_dataset(*_write(tmp_path, csv_text, "x1,continuous\ncolour,categorical,levels=a|b|c\n"))


def test_missing_cell(tmp_path):
    with pytest.raises(IngestionError, match="missing"):
        load_dataset(*_write(tmp_path, "x1,x2\n1.0,\n2.0,3.0\n", "x1,continuous\nx2,continuous\n"))


def test_flag_without_limits_is_schema_error(tmp_path):
    with pytest.raises(SchemaError):
        load_dataset(*_write(tmp_path, "x1,x1_cens\n1.0,0\n2.0,1\n", "x1,continuous\n"))


def test_observed_value_outside_limit_rejected(tmp_path):
    with pytest.raises(IngestionError):
        load_dataset(*_write(tmp_path, "x1,x1_cens\n-5.0,0\n2.0,1\n", "x1,continuous,lower=-1\n"))


def test_schema_validation():
    with pytest.raises(SchemaError):
        parse_schema_line("g,categorical,levels=a")
    with pytest.raises(SchemaError):
        parse_schema_line("x,continuous,lower=2,upper=1")
    with pytest.raises(SchemaError):
        parse_schema_line("x,ordinal")
    with pytest.raises(SchemaError):
        parse_schema_line("x,continuous,lower=abc")
    c = parse_schema_line("x,continuous,lower=-0.5,upper=3")
    assert (c.lower_limit, c.upper_limit) == (-0.5, 3.0)
    assert parse_schema_line(c.to_line()) == c


def test_limits_normalised_to_float():
    c = ColumnSchema("x", "continuous", lower_limit=np.float64(-0.25))
    assert type(c.lower_limit) is float
    assert c.to_line() == "x,continuous,lower=-0.25"


def test_round_trip_is_bit_exact(tmp_path):
    ds = small_dataset(n=40, seed=3, censored=True)
    assert ds.has_censoring
    write_dataset(ds, tmp_path / "d.csv", tmp_path / "s.txt")
    back = load_dataset(tmp_path / "d.csv", tmp_path / "s.txt")
    assert back.equals(ds)


def test_dataset_is_read_only(tiny):
    with pytest.raises(ValueError):
        tiny.continuous[0, 0] = 1.0


def test_build_dataset_checks():
    cols = [ColumnSchema("x", "continuous")]
    with pytest.raises(SchemaError):
        build_dataset(cols, {"x": np.zeros(3)}, {"x": np.array([0, 1, 0])})
    cat = [ColumnSchema("g", "categorical", ("a", "b"))]
    with pytest.raises(InvalidArgumentError):
        build_dataset(cat, {"g": np.array([0, 2])})


def test_labels_round_trip(tmp_path):
    write_labels([1, 2, 3, 1], tmp_path / "l.csv")
    assert read_labels(tmp_path / "l.csv").tolist() == [1, 2, 3, 1]
    (tmp_path / "bare.csv").write_text("2\n1\n")
    assert read_labels(tmp_path / "bare.csv").tolist() == [2, 1]


def test_report_constant_column(caplog):
    cols = [ColumnSchema("k", "continuous")]
    ds = build_dataset(cols, {"k": np.full(10, 5.0)})
    with caplog.at_level(logging.WARNING):
        (st,) = standardization_report(ds)
    assert st.mean == 5.0 and st.sd == 0.0
    assert st.note == "zero variance"
    assert "zero observed variance" in caplog.text


def test_report_normal_sample():
    x = np.random.default_rng(0).normal(0, 1, 10_000)
    (st,) = standardization_report(build_dataset([ColumnSchema("x", "continuous")], {"x": x}))
    assert abs(st.mean) < 0.05 and abs(st.sd - 1) < 0.05


def test_report_fully_censored_and_observed_only():
    cols = [ColumnSchema("x", "continuous", lower_limit=0.0), ColumnSchema("y", "continuous", lower_limit=0.0)]
    vals = {"x": np.zeros(4), "y": np.array([0.0, 0.0, 2.0, 4.0])}
    cens = {"x": np.ones(4, np.int8), "y": np.array([1, 1, 0, 0])}
    rx, ry = standardization_report(build_dataset(cols, vals, cens))
    assert rx.note == "no observed values" and rx.mean is None
    assert ry.n_observed == 2 and ry.mean == 3.0
