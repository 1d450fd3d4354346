import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autosmote.classifiers import ClassifierSpec, fit
from autosmote.data import Dataset, split
from autosmote.samplers import (RATIO_GRID, SyntheticSet, grid_search_ratio, interpolate, knn_minority,
                                random_oversample, random_undersample, smote, smote_to_ratio)

from conftest import blobs


def brute_force_neighbors(X, K):
    out = []
    for i in range(len(X)):
        dists = [(float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(len(X)) if j != i]
        out.append([j for _, j in sorted(dists)[:K]])
    return out


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 25), st.integers(1, 8), st.integers(0, 10_000))
def test_knn_matches_brute_force(n, K, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(-3, 4, size=(n, 2)).astype(float)  # small grid forces distance ties
    index = knn_minority(X, K)
    assert index.table.tolist() == brute_force_neighbors(X, K)
    assert index.width == min(K, n - 1)


def test_knn_needs_two_rows():
    with pytest.raises(ValueError, match="at least 2"):
        knn_minority(np.zeros((1, 2)), 3)


@pytest.mark.parametrize("lam, expected", [(0.0, [0.0, 0.0]), (1.0, [2.0, 4.0]), (0.25, [0.5, 1.0])])
def test_interpolate_endpoints(lam, expected):
    assert interpolate([0.0, 0.0], [2.0, 4.0], lam).tolist() == expected


def test_interpolate_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        interpolate([0.0], [1.0, 2.0], 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 200), st.integers(0, 1000))
def test_smote_samples_stay_in_smote_space(n_new, seed):
    ds = blobs(n_maj=30, n_min=9, dim=3, seed=seed)
    index = knn_minority(ds, 5)
    syn = smote(ds, n_new, k=5, seed=seed, neighbors=index)
    assert len(syn) == n_new
    assert syn.reconstruction_error(ds.minority) <= 1e-12
    for s, nb, lam in zip(syn.source, syn.neighbor, syn.lam):
        assert nb in index.table[s]
        assert 0.0 <= lam <= 1.0


def test_smote_to_ratio_counts():
    ds = blobs(n_maj=100, n_min=10)
    out, syn = smote_to_ratio(ds, 0.5, seed=0)
    assert out.n_minority == 50 and len(syn) == 40 and out.n_majority == 100
    assert out.synthetic.sum() == 40


def test_random_over_and_under_counts():
    ds = blobs(n_maj=100, n_min=10)
    over = random_oversample(ds, 0.35, seed=0)
    assert (over.n_majority, over.n_minority) == (100, 35)
    under = random_undersample(ds, 0.4, seed=0)
    assert (under.n_majority, under.n_minority) == (25, 10)
    # duplicated rows come from the original minority
    originals = {tuple(r) for r in ds.minority}
    assert all(tuple(r) in originals for r in over.minority)


def test_unreachable_ratios_raise():
    ds = blobs(n_maj=20, n_min=10)
    with pytest.raises(ValueError, match="below"):
        smote_to_ratio(ds, 0.2)
    with pytest.raises(ValueError, match="unreachable"):
        random_undersample(ds, 0.1)
    with pytest.raises(ValueError, match="ratio"):
        random_oversample(ds, 1.5)


def test_synthetic_csv_round_trip(tmp_path):
    ds = blobs()
    syn = smote(ds, 12, seed=1)
    syn.to_csv(tmp_path / "syn.csv")
    back = SyntheticSet.from_csv(tmp_path / "syn.csv")
    assert np.array_equal(back.samples, syn.samples)
    assert np.array_equal(back.source, syn.source) and np.array_equal(back.lam, syn.lam)
    SyntheticSet.empty(2).to_csv(tmp_path / "empty.csv")
    assert len(SyntheticSet.from_csv(tmp_path / "empty.csv")) == 0


def test_grid_search_fits_every_reachable_ratio():
    parts = split(blobs(n_maj=200, n_min=20, gap=2.0, seed=3), seed=0)
    calls = []

    def counting_fit(spec, train):
        calls.append(train.n_minority)
        return fit(spec, train)

    result = grid_search_ratio("smote", parts, ClassifierSpec(), "macro_f1", fit_fn=counting_fit)
    assert result.n_fits == len(calls) == len(RATIO_GRID)
    assert result.validation_score == max(result.scores.values())


def test_grid_search_ties_go_to_smaller_ratio():
    parts = split(blobs(n_maj=200, n_min=20, gap=10.0, seed=3), seed=0)
    result = grid_search_ratio("random_over", parts, ClassifierSpec(), "macro_f1")
    # perfectly separable: every ratio scores the same
    assert len(set(result.scores.values())) == 1
    assert result.ratio == min(result.scores)


def test_grid_search_skips_unreachable():
    ds = Dataset(np.random.default_rng(0).normal(size=(70, 2)), [0] * 40 + [1] * 30)
    parts = split(ds, seed=0)
    result = grid_search_ratio("smote", parts, ClassifierSpec(), "macro_f1")
    assert min(result.scores) >= parts.train.n_minority / parts.train.n_majority - 0.05
