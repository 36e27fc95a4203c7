"""Stephens' KL relabelling to undo label switching across retained draws.

Permutation convention: row ``U[t]`` maps relabelled cluster ``g`` to the
sampled label ``U[t, g]``, i.e. relabelled quantities are
``param[t][..., U[t]]``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError
from .sampler import ChainOutput

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
MAX_SWEEPS = 100
EXHAUSTIVE_MAX_G = 6


def _xlogx(P):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)


def mean_membership(P_draws, U) -> np.ndarray:
    """Average of the relabelled membership matrices, shape (n, G)."""
    P_draws = np.asarray(P_draws)
    U = np.asarray(U)
    return np.take_along_axis(P_draws, U[:, None, :], axis=2).mean(axis=0)


def relabel_cost(Pt, Pbar) -> np.ndarray:
    """cost[g, j] = sum_i Pt[i, g] * log(Pt[i, g] / Pbar[i, j])."""
    Pt = np.asarray(Pt, float)
    logbar = np.log(np.maximum(np.asarray(Pbar, float), PROB_FLOOR))
    return _xlogx(Pt).sum(axis=0)[:, None] - Pt.T @ logbar


def _batch_costs(P_draws, Pbar):
    logbar = np.log(np.maximum(Pbar, PROB_FLOOR))
    ent = _xlogx(P_draws).sum(axis=1)  # (R, G)
    return ent[:, :, None] - np.einsum("tig,ij->tgj", P_draws, logbar)


def solve_assignment(cost) -> np.ndarray:
    """Permutation sigma minimising sum_g cost[g, sigma[g]].

    Exhaustive search for G <= 6 (ties go to the lexicographically smallest
    permutation), Hungarian algorithm above that.
    """
    cost = np.asarray(cost, float)
    G = cost.shape[0]
    if cost.shape != (G, G):
        raise InvalidArgumentError("cost matrix must be square")
    if G <= EXHAUSTIVE_MAX_G:
        perms = np.array(list(itertools.permutations(range(G))))
        totals = cost[np.arange(G), perms].sum(axis=1)
        return perms[int(np.argmin(totals))]
    _, cols = linear_sum_assignment(cost)
    return cols


def _solve_all(costs):
    R, G, _ = costs.shape
    if G <= EXHAUSTIVE_MAX_G:
        perms = np.array(list(itertools.permutations(range(G))))
        totals = costs[:, np.arange(G), perms].sum(axis=2)  # (R, n_perms)
        return perms[np.argmin(totals, axis=1)]
    return np.array([solve_assignment(c) for c in costs])


def total_kl(P_draws, U) -> float:
    """Objective sum_t KL(relabelled P_t || mean) at the current U."""
    aligned = np.take_along_axis(np.asarray(P_draws), np.asarray(U)[:, None, :], axis=2)
    Pbar = aligned.mean(axis=0)
    return float((_xlogx(aligned) - aligned * np.log(np.maximum(Pbar, PROB_FLOOR))).sum())


def run_relabel(P_draws, max_sweeps: int = MAX_SWEEPS, return_trace: bool = False):
    """Iterate mean/assignment steps until the permutation table is stable.

    Returns the (R, G) table ``U``; with ``return_trace`` also the list of
    objective values after each sweep.
    """
    P_draws = np.asarray(P_draws, float)
    R, _, G = P_draws.shape
    if R < 1:
        raise InvalidArgumentError("need at least one retained draw")
    U = np.tile(np.arange(G), (R, 1))
    trace = [total_kl(P_draws, U)]
    if R > 1:
        for sweep in range(max_sweeps):
            Pbar = mean_membership(P_draws, U)
            sigma = _solve_all(_batch_costs(P_draws, Pbar))
            # sigma sends sampled g to relabelled sigma[g]; U is its inverse
            new_U = np.argsort(sigma, axis=1)
            changed = not np.array_equal(new_U, U)
            U = new_U
            trace.append(total_kl(P_draws, U))
            if not changed:
                break
        else:
            log.warning("relabelling did not converge within %d sweeps", max_sweeps)
    return (U, trace) if return_trace else U


def _take(a, U, axis):
    # reorder the cluster axis of a per-draw array a[t, ...]
    idx_shape = [U.shape[0]] + [1] * (a.ndim - 1)
    idx_shape[axis] = U.shape[1]
    return np.take_along_axis(a, U.reshape(idx_shape), axis=axis)


def apply_relabeling(draws: ChainOutput, U, reanchor: bool = True) -> ChainOutput:
    """Permute every cluster-indexed draw by ``U``.

    With ``reanchor`` the continuous means are re-expressed against the new
    cluster 1: its offset is moved from ``mu`` into ``A1`` so that every
    cluster mean ``A1 + mu[:, g]`` is unchanged.
    """
    U = np.asarray(U)
    if U.shape != (draws.R, draws.G):
        raise InvalidArgumentError(f"U has shape {U.shape}, expected {(draws.R, draws.G)}")
    if not np.array_equal(np.sort(U, axis=1), np.tile(np.arange(draws.G), (draws.R, 1))):
        raise InvalidArgumentError("every row of U must be a permutation")
    inv = np.argsort(U, axis=1)
    mu = _take(draws.mu, U, 2)
    A1 = draws.A1.copy()
    if reanchor and mu.shape[1]:
        ref = mu[:, :, :1].copy()
        mu = mu - ref
        A1 = A1 + ref[:, :, 0]
    return replace(
        draws,
        P=_take(draws.P, U, 2),
        z=np.take_along_axis(inv, draws.z, axis=1),
        delta=_take(draws.delta, U, 2),
        mu=mu,
        A1=A1,
        theta=[_take(th, U, 1) for th in draws.theta],
        tau=_take(draws.tau, U, 1),
    )
