import numpy as np
import pytest

from autosmote.nn import Mlp, softmax
from autosmote.policy import (LAMBDAS, DiscretePolicy, LowPolicy, PolicyBundle, UniformPolicy, bin_onehot,
                              cross_state, low_action_features, split_action, state_features, usage_bin)


def reference_bin(count):
    for b, upper in enumerate(range(10, 100, 10)):
        if count < upper:
            return b
    return 9


def test_usage_bins_enumerated():
    for count in range(121):
        assert usage_bin(count) == reference_bin(count)
        assert bin_onehot(count).sum() == 1.0 and bin_onehot(count)[reference_bin(count)] == 1.0
    assert usage_bin(np.array([0, 9, 10, 99, 100, 5000])).tolist() == [0, 0, 1, 9, 9, 9]


def test_state_layout():
    minority = np.array([[1.0, 2.0], [3.0, 4.0]])
    counts = np.array([0, 25])
    s = state_features(1, minority, counts)
    assert s[:2].tolist() == [3.0, 4.0]
    assert s[2:].tolist() == [0, 0, 1, 0, 0, 0, 0, 0, 0, 0]
    assert cross_state(minority)[:2].tolist() == [2.0, 3.0]


def test_action_features_and_flat_index():
    f = low_action_features(3, 1, np.array([0, 42]))
    assert np.flatnonzero(f).tolist() == [4, 13]
    assert split_action(17) == (3, 2)
    assert LAMBDAS.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_discrete_fast_path_matches_forward(rng):
    net = DiscretePolicy(6, 5, hidden=16, rng=rng)
    states = rng.normal(size=(4, 6))
    logits, values, _ = net.forward(states)
    assert logits.shape == (4, 5) and values.shape == (4,)
    for s, lg in zip(states, logits):
        np.testing.assert_allclose(net.probs(s), softmax(lg), atol=1e-14)


def test_low_scorer_equals_mlp_on_concatenated_action_features(rng):
    net = LowPolicy(6, hidden=16, scorer_hidden=8, rng=rng)
    states = rng.normal(size=(3, 6))
    bins = rng.integers(0, 10, size=(3, 4))
    logits, _, _ = net.forward(states, bins)
    assert logits.shape == (3, 20)
    scorer = Mlp([16 + 15, 8, 1])
    scorer.params = [np.vstack([net.W_rep, net.W_bin, net.W_lam]), net.b1, net.w_out[:, None], np.zeros(1)]
    h = net.trunk.forward(states)
    for b in range(3):
        for slot in range(4):
            for lam in range(5):
                action = np.zeros(15)
                action[bins[b, slot]] = 1.0
                action[10 + lam] = 1.0
                expected = scorer.forward(np.concatenate([h[b], action]))[0]
                assert logits[b, slot * 5 + lam] == pytest.approx(expected, abs=1e-12)
        np.testing.assert_allclose(net.probs(states[b], bins[b]), softmax(logits[b]), atol=1e-14)


def test_low_policy_handles_fewer_neighbours(rng):
    net = LowPolicy(4, hidden=8, rng=rng)
    logits, _, _ = net.forward(rng.normal(size=(2, 4)), np.zeros((2, 1), dtype=int))
    assert logits.shape == (2, 5)


def test_bundle_snapshot_and_uniform(rng):
    bundle = PolicyBundle.create(5, 3, 4, hidden=8, rng=rng)
    other = PolicyBundle.create(5, 3, 4, hidden=8, rng=np.random.default_rng(99))
    other.load(bundle.snapshot())
    s = rng.normal(size=5)
    assert np.array_equal(other.cross.probs(s), bundle.cross.probs(s))
    with pytest.raises(ValueError, match="shape"):
        PolicyBundle.create(5, 2, 4, hidden=8).load(bundle.snapshot())
    uniform = PolicyBundle.uniform(3, 4)
    assert not uniform.learnable and uniform.snapshot() == {}
    assert uniform.cross.probs(s).tolist() == [0.25] * 4
    assert len(UniformPolicy().probs(s, np.zeros(6))) == 30
