"""Posterior summaries of relabelled draws and the adjusted Rand index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .sampler import ChainOutput


@dataclass
class PosteriorSummary:
    assignments: np.ndarray  # (n,) clusters in 1..G
    membership: np.ndarray  # (n, G)
    weights: np.ndarray  # (M,)
    A1: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    theta: list
    tau: np.ndarray
    sigma2_delta0: float
    p1: np.ndarray
    p2: np.ndarray
    names: tuple = ()


def variable_weights(delta_draws) -> np.ndarray:
    """Fraction of draws in which each variable is in the slab for some cluster.

    Entries outside a variable's index range (the reference column of a
    continuous variable) are stored as 0, wherever relabelling moved them,
    so "any cluster" needs no per-type range.
    """
    delta_draws = np.asarray(delta_draws)
    return delta_draws.any(axis=2).mean(axis=0)


def assign(membership) -> np.ndarray:
    # argmax returns the first maximum: ties go to the smallest cluster
    return np.argmax(membership, axis=1) + 1


def summarize_chain(draws: ChainOutput) -> PosteriorSummary:
    membership = draws.P.mean(axis=0)
    return PosteriorSummary(
        assignments=assign(membership),
        membership=membership,
        weights=variable_weights(draws.delta),
        A1=draws.A1.mean(axis=0),
        mu=draws.mu.mean(axis=0),
        gamma=draws.gamma.mean(axis=0),
        theta=[th.mean(axis=0) for th in draws.theta],
        tau=draws.tau.mean(axis=0),
        sigma2_delta0=float(draws.sigma2_delta0.mean()),
        p1=draws.p1.mean(axis=0),
        p2=draws.p2.mean(axis=0),
        names=draws.names,
    )


def _comb2(x):
    x = np.asarray(x, float)
    return x * (x - 1) / 2.0


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index from the contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError("label vectors must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise InvalidArgumentError("need at least two subjects")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    sa = _comb2(table.sum(axis=1)).sum()
    sb = _comb2(table.sum(axis=0)).sum()
    expected = sa * sb / _comb2(n)
    top = 0.5 * (sa + sb)
    if top == expected:
        # both partitions trivial (all-in-one or all singletons)
        return 1.0 if index == expected else 0.0
    return float((index - expected) / (top - expected))
