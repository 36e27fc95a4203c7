import itertools

import numpy as np
import pytest

from bfmm import relabel as RL
from bfmm.errors import InvalidArgumentError
from bfmm.sampler import Hyperparameters, McmcConfig, mixture_loglik, run_chain

from conftest import small_dataset


def _aligned_chain(R=40, n=30, G=3, seed=0, sharp=0.02):
    """Well-separated memberships with per-draw noise."""
    rng = np.random.default_rng(seed)
    truth = np.arange(n) % G
    base = np.full((n, G), sharp / (G - 1))
    base[np.arange(n), truth] = 1 - sharp
    P = np.empty((R, n, G))
    for t in range(R):
        noisy = base * rng.uniform(0.8, 1.2, base.shape)
        P[t] = noisy / noisy.sum(axis=1, keepdims=True)
    return P


def test_mean_membership_cases():
    P = _aligned_chain(R=1)
    U = np.array([[2, 0, 1]])
    assert np.allclose(RL.mean_membership(P, U), P[0][:, [2, 0, 1]])
    same = np.repeat(P[:1], 5, axis=0)
    assert np.allclose(RL.mean_membership(same, np.tile(np.arange(3), (5, 1))), P[0])
    # hand-computed 2x2 case: the second draw is a column swap of the first
    A = np.array([[0.9, 0.1], [0.2, 0.8]])
    pair = np.stack([A, A[:, ::-1]])
    assert np.allclose(RL.mean_membership(pair, np.array([[0, 1], [1, 0]])), A)


def test_relabel_cost_properties():
    Pbar = _aligned_chain(R=1)[0]
    cost = RL.relabel_cost(Pbar, Pbar)
    assert np.array_equal(RL.solve_assignment(cost), np.arange(3))
    assert np.allclose(np.diag(cost), 0.0, atol=1e-12)
    swapped = Pbar[:, [1, 0, 2]]
    assert RL.solve_assignment(RL.relabel_cost(swapped, Pbar)).tolist() == [1, 0, 2]
    zeros = np.zeros_like(Pbar)
    zeros[:, 0] = 1.0
    assert np.isfinite(RL.relabel_cost(zeros, zeros)).all()


def test_relabel_cost_formula():
    rng = np.random.default_rng(1)
    Pt = rng.dirichlet(np.ones(3), 6)
    Pbar = rng.dirichlet(np.ones(3), 6)
    cost = RL.relabel_cost(Pt, Pbar)
    for g in range(3):
        for j in range(3):
            direct = sum(Pt[i, g] * np.log(Pt[i, g] / Pbar[i, j]) for i in range(6))
            assert cost[g, j] == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_solve_assignment_simple():
    assert RL.solve_assignment(np.zeros((4, 4))).tolist() == [0, 1, 2, 3]
    assert RL.solve_assignment(np.array([[0.0, 5.0], [5.0, 0.0]])).tolist() == [0, 1]
    with pytest.raises(InvalidArgumentError):
        RL.solve_assignment(np.zeros((2, 3)))


def brute_force_min(cost):
    G = cost.shape[0]
    return min(sum(cost[g, p[g]] for g in range(G)) for p in itertools.permutations(range(G)))


def test_solve_assignment_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        cost = rng.normal(size=(4, 4))
        perm = RL.solve_assignment(cost)
        assert sorted(perm.tolist()) == [0, 1, 2, 3]
        assert cost[np.arange(4), perm].sum() == pytest.approx(brute_force_min(cost), abs=1e-12)


def test_hungarian_branch_is_optimal():
    rng = np.random.default_rng(8)
    for _ in range(20):
        cost = rng.normal(size=(7, 7))
        perm = RL.solve_assignment(cost)
        assert cost[np.arange(7), perm].sum() == pytest.approx(brute_force_min(cost), abs=1e-9)


def test_aligned_chain_converges_to_identity():
    P = _aligned_chain()
    U, trace = RL.run_relabel(P, return_trace=True)
    assert (U == np.arange(3)).all()
    assert len(trace) == 2  # one sweep, no change
    assert (RL.run_relabel(P[:1]) == np.arange(3)).all()


def _inject(P, seed):
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(P.shape[2]) for _ in range(P.shape[0])])
    return np.take_along_axis(P, perms[:, None, :], axis=2), perms


@pytest.mark.parametrize("seed", range(5))
def test_permutation_recovery(seed):
    P = _aligned_chain(seed=seed)
    scrambled, _ = _inject(P, seed + 100)
    U = RL.run_relabel(scrambled)
    fixed = np.take_along_axis(scrambled, U[:, None, :], axis=2)
    # aligned up to one global relabelling rho (relabelled -> true);
    # subject i < 3 belongs to true cluster i
    rho = np.argsort([int(np.argmax(fixed[0, i])) for i in range(3)])
    assert np.array_equal(fixed, P[:, :, rho])


def test_objective_non_increasing():
    P = _aligned_chain(R=60, sharp=0.4, seed=4)
    scrambled, _ = _inject(P, 5)
    _, trace = RL.run_relabel(scrambled, return_trace=True)
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
    assert trace[-1] < trace[0]


def test_nonconvergence_warns(caplog):
    P, _ = _inject(_aligned_chain(R=30), 1)
    RL.run_relabel(P, max_sweeps=1)
    assert "did not converge" in caplog.text


@pytest.fixture(scope="module")
def chain():
    ds = small_dataset(n=30, seed=2)
    hp = Hyperparameters.defaults(3, ds.n_levels)
    return ds, run_chain(ds, hp, McmcConfig(T=60, B=20, seed=5))


def test_apply_identity(chain):
    _, out = chain
    same = RL.apply_relabeling(out, np.tile(np.arange(3), (out.R, 1)))
    assert same.equals(out)


def test_apply_then_inverse_round_trip(chain):
    _, out = chain
    rng = np.random.default_rng(0)
    U = np.array([rng.permutation(3) for _ in range(out.R)])
    there = RL.apply_relabeling(out, U)
    back = RL.apply_relabeling(there, np.argsort(U, axis=1))
    for name in ("P", "z", "delta", "tau", "gamma", "p1", "p2", "sigma2_delta0"):
        assert np.array_equal(getattr(back, name), getattr(out, name)), name
    assert np.allclose(back.mu, out.mu, atol=1e-12) and np.allclose(back.A1, out.A1, atol=1e-12)
    assert all(np.array_equal(a, b) for a, b in zip(back.theta, out.theta))


def test_two_cluster_swap_reanchors():
    ds = small_dataset(n=20, seed=3)
    hp = Hyperparameters.defaults(2, ds.n_levels)
    out = run_chain(ds, hp, McmcConfig(T=6, B=3, G=2, seed=1))
    U = np.tile([1, 0], (out.R, 1))
    sw = RL.apply_relabeling(out, U)
    assert (sw.mu[:, :, 0] == 0).all()
    # old cluster 2 mean becomes the new reference
    assert np.allclose(sw.A1, out.A1 + out.mu[:, :, 1])
    assert np.allclose(sw.mu[:, :, 1], -out.mu[:, :, 1])
    assert np.array_equal(sw.tau, out.tau[:, ::-1])
    assert np.array_equal(sw.z, 1 - out.z)
    assert np.array_equal(sw.gamma, out.gamma)


def test_apply_rejects_bad_tables(chain):
    _, out = chain
    with pytest.raises(InvalidArgumentError):
        RL.apply_relabeling(out, np.zeros((out.R, 2), int))
    with pytest.raises(InvalidArgumentError):
        RL.apply_relabeling(out, np.zeros((out.R, 3), int))


def test_likelihood_invariance(chain):
    ds, out = chain
    U = RL.run_relabel(out.P)
    U[::2] = U[::2, ::-1]  # force non-trivial permutations too
    rel = RL.apply_relabeling(out, U)
    for t in range(out.R):
        before = mixture_loglik(ds, out.A1[t], out.mu[t], out.gamma[t], [th[t] for th in out.theta], out.tau[t])
        after = mixture_loglik(ds, rel.A1[t], rel.mu[t], rel.gamma[t], [th[t] for th in rel.theta], rel.tau[t])
        assert after == pytest.approx(before, rel=1e-12)
