import numpy as np
import pytest

from bfmm.errors import InvalidArgumentError
from bfmm.relabel import apply_relabeling
from bfmm.sampler import Hyperparameters, McmcConfig, run_chain
from bfmm.summarize import adjusted_rand_index, assign, summarize_chain, variable_weights

import oracles
from conftest import small_dataset


def test_weights_counting():
    d = np.zeros((10, 2, 3), np.int8)
    assert variable_weights(d).tolist() == [0.0, 0.0]
    d[:5, 0, 1] = 1
    d[:, 1, 0] = 1
    assert variable_weights(d).tolist() == [0.5, 1.0]


def test_weight_counts_any_cluster():
    d = np.zeros((4, 1, 3), np.int8)
    d[0, 0, 1] = 1
    d[1, 0, 2] = 1
    d[2, 0, 1:] = 1
    assert variable_weights(d)[0] == 0.75


def test_assign_argmax_and_ties():
    assert assign(np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])).tolist() == [1, 2, 1]


@pytest.fixture(scope="module")
def relabeled():
    ds = small_dataset(n=30, seed=6)
    hp = Hyperparameters.defaults(3, ds.n_levels)
    out = run_chain(ds, hp, McmcConfig(T=40, B=20, seed=2))
    return apply_relabeling(out, np.tile(np.arange(3), (out.R, 1)))


def test_single_draw_summary(relabeled):
    one = relabeled.copy()
    for name in ("P", "z", "delta", "A1", "mu", "gamma", "tau", "sigma2_delta0", "p1", "p2"):
        setattr(one, name, getattr(one, name)[:1])
    one.theta = [th[:1] for th in one.theta]
    s = summarize_chain(one)
    assert np.array_equal(s.A1, one.A1[0]) and np.array_equal(s.mu, one.mu[0])
    assert np.array_equal(s.membership, one.P[0])
    assert np.array_equal(s.theta[0], one.theta[0][0])
    assert s.sigma2_delta0 == one.sigma2_delta0[0]


def test_frozen_chain_summary(relabeled):
    frozen = relabeled.copy()
    for name in ("P", "z", "delta", "A1", "mu", "gamma", "tau", "sigma2_delta0", "p1", "p2"):
        a = getattr(frozen, name)
        setattr(frozen, name, np.repeat(a[:1], 4, axis=0))
    frozen.theta = [np.repeat(th[:1], 4, axis=0) for th in frozen.theta]
    s = summarize_chain(frozen)
    assert np.allclose(s.tau, frozen.tau[0], rtol=0, atol=1e-15)
    assert np.allclose(s.gamma, frozen.gamma[0], rtol=0, atol=1e-15)
    assert np.array_equal(s.weights, frozen.delta[0].any(axis=1).astype(float))


def test_global_permutation_invariance(relabeled):
    truth = np.arange(30) % 3 + 1
    base = summarize_chain(relabeled)
    perm = np.array([2, 0, 1])
    moved = summarize_chain(apply_relabeling(relabeled, np.tile(perm, (relabeled.R, 1))))
    # relabelled cluster g is old cluster perm[g]
    assert np.array_equal(perm[moved.assignments - 1] + 1, base.assignments)
    assert np.array_equal(moved.weights, base.weights)
    assert adjusted_rand_index(truth, moved.assignments) == adjusted_rand_index(truth, base.assignments)


# --- ARI --------------------------------------------------------------------------


def test_ari_known_values():
    assert adjusted_rand_index([1, 1, 2, 2], [5, 5, 7, 7]) == 1.0
    assert adjusted_rand_index([1, 1, 1, 1], [1, 1, 2, 2]) == 0.0
    # contingency table [[2,0,0],[0,1,1],[0,0,2]]: (2 - 0.8) / (3.5 - 0.8) = 4/9
    assert adjusted_rand_index([1, 1, 2, 2, 3, 3], [1, 1, 2, 3, 3, 3]) == pytest.approx(4 / 9, abs=1e-15)
    assert adjusted_rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5, abs=1e-15)


def test_ari_errors():
    with pytest.raises(InvalidArgumentError):
        adjusted_rand_index([1, 2], [1, 2, 3])
    with pytest.raises(InvalidArgumentError):
        adjusted_rand_index([1], [1])


def test_ari_matches_pair_counting():
    for a, b in oracles.random_partition_pairs(50, seed=0):
        assert abs(adjusted_rand_index(a, b) - oracles.ari_pair_count(a, b)) < 1e-12


def test_ari_symmetry_and_label_invariance():
    rng = np.random.default_rng(1)
    for a, b in oracles.random_partition_pairs(1000, seed=2):
        v = adjusted_rand_index(a, b)
        assert v == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
        relabel = rng.permutation(20) + 100
        assert v == pytest.approx(adjusted_rand_index([relabel[x] for x in a], b), abs=1e-12)
        assert v <= 1.0 + 1e-12
