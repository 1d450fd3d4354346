import numpy as np
import pytest

from autosmote.classifiers import ClassifierSpec, _Tree, evaluate, fit
from autosmote.data import Dataset

from conftest import blobs


def brute_force_root_split(X, y):
    """Exhaustive Gini search: every feature, every midpoint; first best wins."""
    def gini(labels):
        if len(labels) == 0:
            return 0.0
        p = labels.mean()
        return 1.0 - p * p - (1 - p) * (1 - p)

    n = len(y)
    best = (-np.inf, None, None)
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f]))
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2
            left = y[X[:, f] <= thr]
            right = y[X[:, f] > thr]
            gain = gini(y) - (len(left) * gini(left) + len(right) * gini(right)) / n
            if gain > best[0] + 1e-12:
                best = (gain, f, thr)
    return best[1], best[2]


@pytest.mark.parametrize("seed", range(10))
def test_root_split_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3)).round(1)  # rounding creates repeated values
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(0, 0.5, 40) > 0).astype(int)
    tree = _Tree(1, 2).fit(X, y)
    feat, thr = brute_force_root_split(X, y)
    assert tree.feature[0] == feat
    assert tree.threshold[0] == pytest.approx(thr, abs=1e-12)


def test_tree_training_accuracy_matches_sklearn():
    # exact predictions can differ where two splits tie on gain; sklearn breaks
    # those ties randomly, this tree takes the lower feature
    sk_tree = pytest.importorskip("sklearn.tree")
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(120, 4))
        y = (np.sin(2 * X[:, 0]) + X[:, 1] * X[:, 2] > 0).astype(int)
        for depth in (1, 2, 3):  # deeper trees compound tie choices
            ours = fit(ClassifierSpec("decision_tree", {"max_depth": depth}), Dataset(X, y))
            ref = sk_tree.DecisionTreeClassifier(max_depth=depth, random_state=0).fit(X, y)
            assert np.mean(ours.predict(X) == y) == pytest.approx(ref.score(X, y), abs=1e-12)


@pytest.mark.parametrize("kind, params", [
    ("decision_tree", {}), ("knn", {"k": 1}), ("adaboost", {"n_rounds": 300}),
])
def test_memorizes_distinct_points(kind, params):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 2, 60)
    y[:2] = [0, 1]
    model = fit(ClassifierSpec(kind, params), Dataset(X, y))
    accuracy = np.mean(model.predict(X) == y)
    assert accuracy == 1.0 if kind != "adaboost" else accuracy > 0.9


def test_tree_training_accuracy_monotone_in_depth():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    accs = []
    for depth in range(1, 9):
        model = fit(ClassifierSpec("decision_tree", {"max_depth": depth}), Dataset(X, y))
        accs.append(np.mean(model.predict(X) == y))
        assert model.state.depth <= depth
    assert all(a <= b for a, b in zip(accs, accs[1:]))


def test_linear_svm_separates_separable_data():
    ds = blobs(n_maj=80, n_min=20, gap=6.0, seed=4)
    model = fit(ClassifierSpec("linear_svm"), ds)
    assert evaluate(model, ds, "macro_f1") == 1.0


def test_one_round_adaboost_is_a_stump():
    ds = blobs(seed=5, gap=2.0)
    boost = fit(ClassifierSpec("adaboost", {"n_rounds": 1}), ds)
    stump = fit(ClassifierSpec("decision_tree", {"max_depth": 1}), ds)
    grid = np.random.default_rng(0).normal(1, 2, size=(300, 2))
    assert np.array_equal(boost.predict(grid), stump.predict(grid))


def test_knn_class_ties_go_to_majority():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    model = fit(ClassifierSpec("knn", {"k": 2}), Dataset(X, [0, 1, 0, 1]))
    assert model.predict(np.array([[0.4]])).tolist() == [0]


def test_knn_agrees_with_sklearn_on_odd_k():
    sk = pytest.importorskip("sklearn.neighbors")
    rng = np.random.default_rng(6)
    X, q = rng.normal(size=(100, 3)), rng.normal(size=(200, 3))
    y = rng.integers(0, 2, 100)
    ours = fit(ClassifierSpec("knn", {"k": 5}), Dataset(X, y)).predict(q)
    assert np.array_equal(ours, sk.KNeighborsClassifier(5).fit(X, y).predict(q))


@pytest.mark.parametrize("kind", ["knn", "decision_tree", "adaboost", "linear_svm"])
def test_fit_is_deterministic(kind):
    ds = blobs(seed=7, gap=1.5)
    q = np.random.default_rng(1).normal(size=(100, 2))
    a = fit(ClassifierSpec(kind, seed=3), ds).predict(q)
    b = fit(ClassifierSpec(kind, seed=3), ds).predict(q)
    assert np.array_equal(a, b)


def test_errors():
    with pytest.raises(ValueError, match="unknown classifier"):
        ClassifierSpec("forest")
    with pytest.raises(ValueError, match="hyperparameters"):
        ClassifierSpec("knn", {"depth": 3})
    with pytest.raises(ValueError, match="positive integer"):
        ClassifierSpec("knn", {"k": 0})
    with pytest.raises(ValueError, match="both classes"):
        fit(ClassifierSpec(), Dataset(np.zeros((3, 1)), [0, 0, 0]))
    model = fit(ClassifierSpec(), blobs())
    with pytest.raises(ValueError, match="features"):
        model.predict(np.zeros((2, 5)))
    assert model.predict(np.zeros((0, 2))).shape == (0,)
