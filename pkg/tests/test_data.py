import io
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meetg.data import (
    CsvSchema,
    DataParseError,
    Dataset,
    generate_twonorm,
    load_csv,
    load_schemas,
    normalize_apply,
    normalize_fit,
    save_csv,
    stratified_folds,
)

TOY = "1.0,2.0,yes\n3.0,4.0,no\n5.0,6.5,yes\n7.0,8.0,no\n"


def test_toy_file():
    ds = load_csv(io.StringIO(TOY))
    assert ds.n_classes == 2
    assert ds.class_names == ("yes", "no")
    assert ds.labels.tolist() == [0, 1, 0, 1]
    assert ds.targets.tolist() == [[1, 0], [0, 1], [1, 0], [0, 1]]
    assert ds.features[2].tolist() == [5.0, 6.5]
    assert np.array_equal(np.argmax(ds.targets, axis=1), ds.labels)


def test_question_mark_names_the_cell():
    with pytest.raises(DataParseError) as err:
        load_csv(io.StringIO("1,2,a\n3,?,b\n"))
    assert (err.value.row, err.value.column) == (2, 1)
    assert "row 2" in str(err.value) and "column 1" in str(err.value)


def test_non_numeric_cell():
    with pytest.raises(DataParseError, match="non-numeric"):
        load_csv(io.StringIO("1,2,a\n3,x4,b\n"))


def test_ragged_row():
    with pytest.raises(DataParseError, match="expected 3 cells"):
        load_csv(io.StringIO("1,2,a\n3,b\n"))


def test_single_class_rejected():
    with pytest.raises(ValueError, match="single class"):
        load_csv(io.StringIO("1,2,a\n3,4,a\n"))


def test_iris_shape(iris):
    assert (iris.n_samples, iris.n_features, iris.n_classes) == (150, 4, 3)
    assert iris.class_names == ("Iris-setosa", "Iris-versicolor", "Iris-virginica")


def test_label_by_header_name_and_delimiter():
    text = "cls;a;b\nx;1;2\ny;3;4\n"
    ds = load_csv(io.StringIO(text), CsvSchema(label_column="cls", header=True, delimiter=";"))
    assert ds.features.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert ds.class_names == ("x", "y")


def test_whitespace_delimiter_and_dropped_id():
    text = "id1  0.5 0.25  A\nid2 1.5   2.5 B\n"
    ds = load_csv(io.StringIO(text), CsvSchema(label_column=-1, delimiter=" ", drop_columns=(0,)))
    assert ds.features.tolist() == [[0.5, 0.25], [1.5, 2.5]]


def test_unknown_header_column():
    with pytest.raises(DataParseError, match="no column named"):
        load_csv(io.StringIO("a,b\n1,x\n2,y\n"), CsvSchema(label_column="zzz", header=True))


def test_csv_round_trip(tmp_path, iris):
    path = tmp_path / "iris.csv"
    save_csv(iris, path)
    assert load_csv(path) == iris


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_property(x):
    labels = np.arange(x.shape[0]) % 2
    ds = Dataset(x, labels, ("p", "q"))
    buf = io.StringIO()
    save_csv(ds, buf)
    assert load_csv(io.StringIO(buf.getvalue())) == ds


def test_shipped_schema_file():
    with resources.as_file(resources.files("meetg") / "schemas" / "uci.ini") as path:
        schemas = load_schemas(path)
    assert len(schemas) == 11
    assert schemas["iris"].label_column == -1
    assert schemas["balance"].label_column == 0
    assert schemas["yeast"].delimiter == " " and schemas["yeast"].drop_columns == (0,)
    assert schemas["glass"].path.endswith("data/glass.data")


def test_schema_version_checked(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[meta]\nformat_version = 2\n[x]\npath = x.csv\n")
    with pytest.raises(ValueError, match="format_version"):
        load_schemas(p)
    p.write_text("[x]\npath = x.csv\n")
    with pytest.raises(ValueError, match="format_version"):
        load_schemas(p)


def test_schema_drives_loader(tmp_path):
    (tmp_path / "toy.csv").write_text("yes,1,2\nno,3,4\n")
    (tmp_path / "s.ini").write_text("[meta]\nformat_version = 1\n[toy]\npath = toy.csv\nlabel_column = 0\n")
    schema = load_schemas(tmp_path / "s.ini")["toy"]
    ds = load_csv(schema.path, schema)
    assert ds.name == "toy" and ds.features.tolist() == [[1.0, 2.0], [3.0, 4.0]]


# -- normalization ------------------------------------------------------------


def test_minmax_linear_map():
    p = normalize_fit([[0.0], [5.0], [10.0]])
    assert normalize_apply(p, [[0.0], [5.0], [10.0]]).ravel().tolist() == [0.0, 0.5, 1.0]


def test_constant_column_goes_to_half():
    p = normalize_fit([[3.0, 1.0], [3.0, 2.0], [3.0, 3.0]])
    assert normalize_apply(p, [[3.0, 1.0], [7.0, 2.0]])[:, 0].tolist() == [0.5, 0.5]


def test_no_clamping():
    p = normalize_fit([[0.0], [10.0]])
    assert normalize_apply(p, [[12.0]])[0, 0] == pytest.approx(1.2)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 6)),
              elements=st.floats(-1e5, 1e5, allow_nan=False, allow_infinity=False)))
def test_minmax_range_property(x):
    out = normalize_apply(normalize_fit(x), x)
    varying = x.max(axis=0) > x.min(axis=0)
    assert np.allclose(out[:, varying].min(axis=0), 0.0, atol=1e-12)
    assert np.allclose(out[:, varying].max(axis=0), 1.0, atol=1e-12)


# -- folds ---------------------------------------------------------------------


def per_class_fold_counts(labels, plan):
    m = labels.max() + 1
    counts = np.zeros((m, plan.n_folds), dtype=int)
    np.add.at(counts, (labels, plan.assignments), 1)
    return counts


def test_exactly_divisible_folds():
    labels = np.repeat([0, 1], 5)
    plan = stratified_folds(labels, 5, seed=1)
    assert np.all(per_class_fold_counts(labels, plan) == 1)


def test_fold_determinism(iris):
    a = stratified_folds(iris, 10, seed=4)
    b = stratified_folds(iris, 10, seed=4)
    c = stratified_folds(iris, 10, seed=5)
    assert np.array_equal(a.assignments, b.assignments)
    assert not np.array_equal(a.assignments, c.assignments)


def test_iris_ten_folds(iris):
    plan = stratified_folds(iris, 10, seed=0)
    assert np.all(per_class_fold_counts(iris.labels, plan) == 5)


def test_fold_errors():
    with pytest.raises(ValueError):
        stratified_folds(np.array([0, 1, 0, 1]), 1)
    with pytest.raises(ValueError, match="exceeds"):
        stratified_folds(np.array([0, 1, 0, 1]), 5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=80), st.integers(2, 10), st.integers(0, 2**32))
def test_fold_partition_property(labels, n_folds, seed):
    labels = np.array(labels)
    if n_folds > labels.size:
        return
    plan = stratified_folds(labels, n_folds, seed)
    tests = [plan.test_index(f) for f in range(n_folds)]
    assert all(t.size > 0 for t in tests)
    assert np.array_equal(np.sort(np.concatenate(tests)), np.arange(labels.size))
    counts = per_class_fold_counts(labels, plan)
    present = counts.sum(axis=1) > 0
    assert np.all(counts[present].max(axis=1) - counts[present].min(axis=1) <= 1)
    for f, train, test in plan.splits():
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == labels.size


# -- twonorm --------------------------------------------------------------------


def test_twonorm_shape():
    ds = generate_twonorm(7400, 20, seed=0)
    assert (ds.n_samples, ds.n_features, ds.n_classes) == (7400, 20, 2)
    assert np.bincount(ds.labels).tolist() == [3700, 3700]


def test_twonorm_class_means():
    ds = generate_twonorm(7400, 20, seed=1)
    a = 2 / np.sqrt(20)
    assert np.all(np.abs(ds.features[ds.labels == 0].mean(axis=0) - a) <= 0.05)
    assert np.all(np.abs(ds.features[ds.labels == 1].mean(axis=0) + a) <= 0.05)


def test_twonorm_seeded():
    assert generate_twonorm(100, 5, seed=3) == generate_twonorm(100, 5, seed=3)
    assert generate_twonorm(100, 5, seed=3) != generate_twonorm(100, 5, seed=4)


def test_twonorm_rejects_odd():
    with pytest.raises(ValueError):
        generate_twonorm(7, 3)
