import math
import statistics

import numpy as np
import pytest

from autosmote.data import (DataError, Dataset, RawTable, fit_preprocess, load_csv, load_dataset,
                            make_imbalanced, preprocess, save_dataset, split)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_rarer_label_becomes_minority(tmp_path):
    path = write(tmp_path, "x,label\n1,a\n2,a\n3,a\n4,b\n")
    table = load_csv(path, "label")
    assert table.labels.tolist() == [0, 0, 0, 1]
    assert table.label_values == ("a", "b")


def test_three_label_values_rejected(tmp_path):
    path = write(tmp_path, "x,label\n1,a\n2,b\n3,c\n")
    with pytest.raises(DataError, match="exactly two"):
        load_csv(path, "label")


@pytest.mark.parametrize("text", ["", "x,label\n"])
def test_empty_csv_rejected(tmp_path, text):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, text), "label")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv", "label")


def test_phoneme_shaped_table_has_five_features(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["V1,V2,V3,V4,V5,Class"]
    for i in range(30):
        lines.append(",".join(f"{v:.4f}" for v in rng.normal(size=5)) + f",{1 + (i % 3 == 0)}")
    ds = preprocess(load_csv(write(tmp_path, "\n".join(lines) + "\n"), "Class"))
    assert ds.n_features == 5


def test_standardization_matches_population_std():
    table = RawTable.from_arrays(np.array([[2.0], [4.0], [6.0]]), [0, 0, 1])
    spec = fit_preprocess(table)
    assert spec.means == [4.0]
    assert spec.stddevs[0] == pytest.approx(math.sqrt(8 / 3), abs=1e-15)
    ds = preprocess(table, spec)
    # brute-force recomputation
    mu = statistics.fmean([2, 4, 6])
    sd = statistics.pstdev([2, 4, 6])
    expected = [(v - mu) / sd for v in (2, 4, 6)]
    np.testing.assert_allclose(ds.features[:, 0], expected, atol=1e-15)


def test_missing_numeric_cell_imputed_with_zero(tmp_path):
    path = write(tmp_path, "x,y,label\n1,?,a\n3,5,a\n,7,b\n")
    ds = preprocess(load_csv(path, "label"))
    assert ds.features[2, 0] == 0.0
    assert ds.features[0, 1] == 0.0
    assert not np.isnan(ds.features).any()


def test_categorical_one_hot(tmp_path):
    path = write(tmp_path, "colour,label\nred,a\nblue,a\nred,b\n")
    table = load_csv(path, "label")
    spec = fit_preprocess(table)
    ds = preprocess(table, spec)
    assert spec.category_vocabularies == [["blue", "red"]]
    assert ds.features[0].tolist() == [0.0, 1.0]
    assert ds.n_features == spec.output_dim == 2


def test_unseen_category_encodes_as_zeros(tmp_path):
    fit_table = load_csv(write(tmp_path, "c,label\nred,a\nblue,b\n"), "label")
    spec = fit_preprocess(fit_table)
    other = load_csv(write(tmp_path, "c,label\ngreen,a\nred,b\n", "other.csv"), "label")
    ds = preprocess(other, spec)
    assert ds.features[0].tolist() == [0.0, 0.0]
    assert spec.unseen_categories == 1


def test_zero_variance_column_gets_unit_std():
    table = RawTable.from_arrays(np.array([[3.0, 1.0], [3.0, 2.0]]), [0, 1])
    spec = fit_preprocess(table)
    assert spec.stddevs[0] == 1.0
    assert preprocess(table, spec).features[:, 0].tolist() == [0.0, 0.0]


def test_round_trip_standardized_columns(rng):
    X = rng.normal(3.0, 2.5, size=(200, 4))
    X[:, 3] = 7.0
    ds = preprocess(RawTable.from_arrays(X, rng.integers(0, 2, 200)))
    assert np.all(np.abs(ds.features.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose(ds.features[:, :3].std(axis=0), 1.0, atol=1e-12)


@pytest.mark.parametrize("ir, expected", [(20, 190), (50, 76), (100, 38)])
def test_make_imbalanced_table_counts(ir, expected):
    ds = Dataset(np.zeros((3818 + 1000, 1)), np.r_[np.zeros(3818, int), np.ones(1000, int)])
    out = make_imbalanced(ds, ir, seed=0)
    assert out.n_majority == 3818
    assert out.n_minority == expected


def test_make_imbalanced_keeps_majority_rows(rng):
    X = rng.normal(size=(300, 3))
    y = np.r_[np.zeros(200, int), np.ones(100, int)]
    ds = Dataset(X, y)
    out = make_imbalanced(ds, 10, seed=3)
    before = {tuple(r) for r in ds.majority}
    after = {tuple(r) for r in out.majority}
    assert before == after
    assert out.n_minority == 20


def test_make_imbalanced_noop_at_current_ratio():
    ds = Dataset(np.arange(12.0)[:, None], [0] * 9 + [1] * 3)
    assert make_imbalanced(ds, 3.0, seed=0) is ds


def test_make_imbalanced_errors():
    ds = Dataset(np.arange(12.0)[:, None], [0] * 9 + [1] * 3)
    with pytest.raises(DataError, match="below"):
        make_imbalanced(ds, 2.0, seed=0)
    with pytest.raises(DataError, match="at least 2"):
        make_imbalanced(ds, 5.0, seed=0)


def test_split_sizes_follow_fractions():
    ds = Dataset(np.arange(110.0)[:, None], [0] * 100 + [1] * 10)
    parts = split(ds, seed=0)
    assert (parts.train.n_majority, parts.train.n_minority) == (60, 6)
    assert (parts.validation.n_majority, parts.validation.n_minority) == (20, 2)
    assert (parts.test.n_majority, parts.test.n_minority) == (20, 2)


def test_split_is_a_deterministic_partition():
    ds = Dataset(np.arange(110.0)[:, None], [0] * 100 + [1] * 10)
    a, b = split(ds, seed=7), split(ds, seed=7)
    for part in ("train", "validation", "test"):
        assert np.array_equal(getattr(a, part).features, getattr(b, part).features)
    rows = np.concatenate([a.train.features[:, 0], a.validation.features[:, 0], a.test.features[:, 0]])
    assert sorted(rows.tolist()) == list(np.arange(110.0))


def test_split_rejects_tiny_class():
    ds = Dataset(np.arange(12.0)[:, None], [0] * 10 + [1] * 2)
    with pytest.raises(DataError, match="at least 3"):
        split(ds, seed=0)


def test_sealed_split_blocks_test_access():
    ds = Dataset(np.arange(110.0)[:, None], [0] * 100 + [1] * 10)
    sealed = split(ds, seed=0).sealed()
    assert sealed.train.n_rows == 66
    with pytest.raises(RuntimeError, match="sealed"):
        sealed.test.features


def test_dataset_cache_round_trip(tmp_path):
    ds = Dataset(np.array([[1.5, -2.0], [0.25, 3.0]]), [0, 1], ("neg", "pos"))
    ds = ds.with_extra_minority([[9.0, 9.0]])
    save_dataset(ds, tmp_path / "ds.json")
    back = load_dataset(tmp_path / "ds.json")
    assert np.array_equal(back.features, ds.features)
    assert back.labels.tolist() == [0, 1, 1]
    assert back.synthetic.tolist() == [False, False, True]
    assert back.label_values == ("neg", "pos")
