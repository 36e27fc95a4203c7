"""Gibbs sampler for the spike-and-slab mixture of mixed-type data.

Continuous variable m in cluster g is Normal(A1[m] + mu[m, g], 1/gamma[m])
with ``mu[:, 0] == 0`` (cluster 0 is the reference). Categorical variable j
in cluster g is Multinomial(theta[j][g]). ``delta[m, g]`` switches the prior
on ``mu[m, g]`` / ``theta[j][g]`` between spike and slab.

Cluster indices are 0-based internally; files and summaries use 1..G.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

from . import distkernels as dk
from .datamodel import Censor, Dataset
from .errors import FmmError, InitializationError, InvalidArgumentError, NumericalError, SamplingError

log = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class Hyperparameters:
    delta: np.ndarray
    alpha_spike: tuple
    mu_A: float = 0.0
    sigma2_A: float = 100.0
    a_delta0: float = 2.0
    b_delta0: float = 1e-4
    sigma2_delta1: float = 1000.0
    a_tilde: float = 2.0
    b_tilde: float = 1.0
    alpha_slab: float = 1.0
    a_p1: float = 1.0
    b_p1: float = 2.0
    a_p2: float = 1.0
    b_p2: float = 2.0

    @classmethod
    def defaults(cls, G: int, n_levels, **overrides) -> "Hyperparameters":
        """Simulation defaults: delta = 1/G each, alpha_spike = 10 per level."""
        hp = cls(
            delta=np.full(G, 1.0 / G),
            alpha_spike=tuple(np.full(L, 10.0) for L in n_levels),
        )
        return replace(hp, **overrides) if overrides else hp

    def __post_init__(self):
        self.delta = np.asarray(self.delta, float)
        self.alpha_spike = tuple(np.asarray(a, float) for a in self.alpha_spike)

    def validate(self, ds: Dataset, G: int) -> None:
        if self.delta.shape != (G,):
            raise InvalidArgumentError(f"delta has length {self.delta.size}, expected G={G}")
        if np.any(self.delta <= 0):
            raise InvalidArgumentError("delta entries must be positive")
        if len(self.alpha_spike) != ds.M - ds.q:
            raise InvalidArgumentError("alpha_spike needs one vector per categorical variable")
        for a, c in zip(self.alpha_spike, ds.categorical_columns):
            if a.shape != (len(c.levels),):
                raise InvalidArgumentError(f"alpha_spike for {c.name!r} must have {len(c.levels)} entries")
            if np.any(a <= 0):
                raise InvalidArgumentError(f"alpha_spike for {c.name!r} must be positive")
        for f in fields(self):
            if f.name in ("delta", "alpha_spike", "mu_A"):
                continue
            if not getattr(self, f.name) > 0:
                raise InvalidArgumentError(f"hyper-parameter {f.name} must be positive")
        if self.a_delta0 > 1:
            spike_mean = self.b_delta0 / (self.a_delta0 - 1)
            if self.sigma2_delta1 < 100 * spike_mean:
                log.warning(
                    "sigma2_delta1=%g is not >> the prior spike variance %g; spike and slab overlap",
                    self.sigma2_delta1,
                    spike_mean,
                )
        else:
            log.warning("a_delta0 <= 1: the spike variance prior has no finite mean")


@dataclass(frozen=True)
class McmcConfig:
    T: int = 4000
    B: int = 2000
    k: int = 1
    seed: int = 0
    G: int = 3

    def __post_init__(self):
        if not (0 <= self.B < self.T):
            raise InvalidArgumentError(f"burn-in B={self.B} must satisfy 0 <= B < T={self.T}")
        if self.k < 1:
            raise InvalidArgumentError("thinning k must be >= 1")
        if self.G < 2:
            raise InvalidArgumentError("G must be >= 2")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")

    @property
    def retained(self) -> int:
        return -(-(self.T - self.B) // self.k)


@dataclass
class ChainState:
    z: np.ndarray  # (n,) cluster index per subject
    tau: np.ndarray  # (G,)
    A1: np.ndarray  # (q,)
    mu: np.ndarray  # (q, G), column 0 fixed at 0
    gamma: np.ndarray  # (q,) precisions
    sigma2_delta0: float
    theta: list  # per categorical variable, (G, L_j)
    delta: np.ndarray  # (M, G) int8; delta[:q, 0] unused and kept 0
    p1: np.ndarray  # (q,)
    p2: np.ndarray  # (M - q,)
    x: np.ndarray  # (n, q) continuous values with censored cells imputed
    P: np.ndarray = field(default=None)  # (n, G) membership probabilities of the last Z update

    @property
    def G(self) -> int:
        return self.tau.shape[0]

    @property
    def Z(self) -> np.ndarray:
        return np.eye(self.G, dtype=np.int8)[self.z]

    def copy(self) -> "ChainState":
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.copy()
            elif isinstance(v, list):
                v = [a.copy() for a in v]
            kw[f.name] = v
        return ChainState(**kw)


@dataclass
class ChainOutput:
    """Retained post-burn-in draws, stacked along the first axis."""

    P: np.ndarray  # (R, n, G)
    z: np.ndarray  # (R, n)
    delta: np.ndarray  # (R, M, G)
    A1: np.ndarray  # (R, q)
    mu: np.ndarray  # (R, q, G)
    gamma: np.ndarray  # (R, q)
    theta: list  # per categorical variable, (R, G, L_j)
    tau: np.ndarray  # (R, G)
    sigma2_delta0: np.ndarray  # (R,)
    p1: np.ndarray  # (R, q)
    p2: np.ndarray  # (R, M - q)
    q: int
    names: tuple = ()

    @property
    def R(self) -> int:
        return self.P.shape[0]

    @property
    def G(self) -> int:
        return self.P.shape[2]

    def copy(self) -> "ChainOutput":
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.copy()
            elif isinstance(v, list):
                v = [a.copy() for a in v]
            kw[f.name] = v
        return ChainOutput(**kw)

    def equals(self, other: "ChainOutput") -> bool:
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, list):
                if len(a) != len(b) or not all(np.array_equal(u, v) for u, v in zip(a, b)):
                    return False
            elif isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


# --------------------------------------------------------------------------
# initialisation


def init_state(ds: Dataset, hp: Hyperparameters, cfg: McmcConfig, rng) -> ChainState:
    G, n, q = cfg.G, ds.n, ds.q
    observed = ds.censor == Censor.OBSERVED
    A1 = np.empty(q)
    sd = np.empty(q)
    for j, c in enumerate(ds.continuous_columns):
        obs = ds.continuous[observed[:, j], j]
        if obs.size < 2:
            raise InitializationError(f"column {c.name!r} has fewer than two observed values")
        A1[j] = obs.mean()
        sd[j] = obs.std(ddof=1)
        if sd[j] == 0.0:
            raise InitializationError(f"column {c.name!r} has zero observed variance")
    gamma = 1.0 / np.maximum(sd**2, 1e-6)

    x = np.array(ds.continuous, dtype=float)
    below = ds.censor == Censor.BELOW_LOWER
    above = ds.censor == Censor.ABOVE_UPPER
    x = np.where(below, ds.lower_limits - 0.5 * sd, x)
    x = np.where(above, ds.upper_limits + 0.5 * sd, x)

    theta = []
    for j in range(ds.M - q):
        freq = ds.level_counts(j) / n
        theta.append(np.tile(dk.clamp_simplex(freq), (G, 1)))

    delta = np.ones((ds.M, G), dtype=np.int8)
    delta[:q, 0] = 0
    return ChainState(
        z=rng.integers(G, size=n),
        tau=np.full(G, 1.0 / G),
        A1=A1,
        mu=np.zeros((q, G)),
        gamma=gamma,
        sigma2_delta0=hp.b_delta0 / (hp.a_delta0 + 1.0),
        theta=theta,
        delta=delta,
        p1=np.full(q, 0.5),
        p2=np.full(ds.M - q, 0.5),
        x=x,
        P=np.full((n, G), 1.0 / G),
    )


# --------------------------------------------------------------------------
# censored values


def impute_censored(state: ChainState, ds: Dataset, rng) -> None:
    """Redraw every censored cell from its cluster's truncated normal."""
    for code in (Censor.BELOW_LOWER, Censor.ABOVE_UPPER):
        rows, cols = np.nonzero(ds.censor == code)
        if rows.size == 0:
            continue
        mean = state.A1[cols] + state.mu[cols, state.z[rows]]
        sd = 1.0 / np.sqrt(state.gamma[cols])
        if code == Censor.BELOW_LOWER:
            lower, upper = None, ds.lower_limits[cols]
        else:
            lower, upper = ds.upper_limits[cols], None
        try:
            draws = dk.truncated_normal(rng, mean, sd, lower, upper)
        except SamplingError:
            # locate the failing cell for the error message
            for r, c, mu_, s_ in zip(rows, cols, mean, sd):
                lo = None if lower is None else ds.upper_limits[c]
                hi = None if upper is None else ds.lower_limits[c]
                dk.truncated_normal(rng, mu_, s_, lo, hi, name=f"{ds.columns[c].name}, subject {ds.row_ids[r]}")
            raise
        state.x[rows, cols] = draws


# --------------------------------------------------------------------------
# continuous parameters


def _cluster_counts(state: ChainState) -> np.ndarray:
    return np.bincount(state.z, minlength=state.G).astype(float)


def update_A1(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    n = ds.n
    var = 1.0 / state.gamma
    shift = state.mu @ _cluster_counts(state)  # sum_i mu[m, z_i]
    denom = n * hp.sigma2_A + var
    mean = (hp.sigma2_A * (state.x.sum(axis=0) - shift) + hp.mu_A * var) / denom
    sd = np.sqrt(hp.sigma2_A * var / denom)
    state.A1 = mean + sd * rng.standard_normal(ds.q)


def update_mu(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    q, G = ds.q, state.G
    counts = _cluster_counts(state)
    sums = state.x.T @ np.eye(G)[state.z]  # (q, G): sum of x over members of g
    var = (1.0 / state.gamma)[:, None]
    s2 = np.where(state.delta[:q] == 1, hp.sigma2_delta1, state.sigma2_delta0)
    denom = s2 * counts + var
    mean = s2 * (sums - counts * state.A1[:, None]) / denom
    sd = np.sqrt(s2 * var / denom)
    mu = mean + sd * rng.standard_normal((q, G))
    mu[:, 0] = 0.0
    state.mu = mu


def update_gamma(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    resid = state.x - state.A1 - state.mu[:, state.z].T
    rate = hp.b_tilde + 0.5 * (resid**2).sum(axis=0)
    state.gamma = dk.sample_gamma(rng, np.full(ds.q, hp.a_tilde + 0.5 * ds.n), rate)


def update_continuous(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    if ds.q == 0:
        return
    update_A1(state, ds, hp, rng)
    update_mu(state, ds, hp, rng)
    update_gamma(state, ds, hp, rng)


# --------------------------------------------------------------------------
# categorical parameters


def level_counts_by_cluster(state: ChainState, ds: Dataset, j: int) -> np.ndarray:
    L = len(ds.categorical_columns[j].levels)
    flat = state.z * L + ds.categorical[:, j]
    return np.bincount(flat, minlength=state.G * L).reshape(state.G, L)


def update_categorical(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    q = ds.q
    for j in range(ds.M - q):
        counts = level_counts_by_cluster(state, ds, j)
        slab = state.delta[q + j][:, None] == 1
        alpha = np.where(slab, hp.alpha_slab, hp.alpha_spike[j][None, :]) + counts
        state.theta[j] = dk.sample_dirichlet(rng, alpha)


# --------------------------------------------------------------------------
# importance indicators


def slab_probabilities(state: ChainState, ds: Dataset, hp: Hyperparameters) -> np.ndarray:
    """P(delta[m, g] = 1 | rest) for every (m, g); continuous column 0 is 0.

    Log-odds of slab versus spike, so tiny spike variances cannot underflow.
    """
    q, G = ds.q, state.G
    out = np.zeros((ds.M, G))
    with np.errstate(divide="ignore"):
        if q:
            mu2 = state.mu[:, 1:] ** 2
            s1, s0 = hp.sigma2_delta1, state.sigma2_delta0
            # log N(mu; 0, s1) - log N(mu; 0, s0)
            log_ratio = 0.5 * math.log(s0 / s1) - 0.5 * mu2 * (1.0 / s1 - 1.0 / s0)
            prior = np.log(state.p1) - np.log1p(-state.p1)
            out[:q, 1:] = expit(prior[:, None] + log_ratio)
        for j, theta in enumerate(state.theta):
            theta = dk.clamp_simplex(theta)
            p = state.p2[j]
            slab = dk.log_dirichlet_density(theta, np.full(theta.shape[1], hp.alpha_slab))
            spike = dk.log_dirichlet_density(theta, hp.alpha_spike[j])
            out[q + j] = expit(np.log(p) - np.log1p(-p) + slab - spike)
    return out


def update_delta(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    probs = slab_probabilities(state, ds, hp)
    delta = dk.sample_bernoulli(rng, probs)
    delta[: ds.q, 0] = 0
    state.delta = delta


def update_p(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    q, G = ds.q, state.G
    if q:
        on = state.delta[:q, 1:].sum(axis=1)
        state.p1 = dk.sample_beta(rng, hp.a_p1 + on, hp.b_p1 + (G - 1) - on)
    if ds.M > q:
        on = state.delta[q:].sum(axis=1)
        state.p2 = dk.sample_beta(rng, hp.a_p2 + on, hp.b_p2 + G - on)


def update_importance(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    update_delta(state, ds, hp, rng)
    update_p(state, ds, hp, rng)


def update_sigma_delta0(state: ChainState, hp: Hyperparameters, rng) -> None:
    off = 1 - state.delta[: state.mu.shape[0], 1:]
    shape = hp.a_delta0 + 0.5 * off.sum()
    scale = hp.b_delta0 + 0.5 * (off * state.mu[:, 1:] ** 2).sum()
    state.sigma2_delta0 = float(dk.sample_inverse_gamma(rng, shape, scale))


# --------------------------------------------------------------------------
# memberships


def membership_logits(
    ds: Dataset, x, A1, mu, gamma, theta, tau, per_variable: bool = False
):
    """Unnormalised log P(z_i = g | rest), shape (n, G).

    With ``per_variable`` also return the (n, M, G) contributions, used to
    name the culprit when something is non-finite.
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        resid = x[:, :, None] - (A1[:, None] + mu)[None]
        cont = 0.5 * np.log(gamma)[:, None] - _HALF_LOG_2PI - 0.5 * gamma[:, None] * resid**2
        cat = [np.log(th).T[ds.categorical[:, j]] for j, th in enumerate(theta)]
        logits = np.log(tau) + cont.sum(axis=1)
        for c in cat:
            logits = logits + c
    if per_variable:
        parts = np.concatenate([cont] + [c[:, None, :] for c in cat], axis=1)
        return logits, parts
    return logits


def _raise_nonfinite(ds, state, logits):
    _, parts = membership_logits(ds, state.x, state.A1, state.mu, state.gamma, state.theta, state.tau, True)
    bad = ~np.isfinite(parts)
    if bad.any():
        i, m, g = map(int, np.argwhere(bad)[0])
        raise NumericalError(
            f"non-finite log-likelihood for subject {ds.row_ids[i]}, variable {ds.columns[m].name!r}, cluster {g + 1}"
        )
    i = int(np.argwhere(~np.isfinite(logits))[0][0])
    raise NumericalError(f"non-finite log-likelihood for subject {ds.row_ids[i]} (cluster weights)")


def update_z(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    logits = membership_logits(ds, state.x, state.A1, state.mu, state.gamma, state.theta, state.tau)
    if not np.all(np.isfinite(logits)):
        _raise_nonfinite(ds, state, logits)
    P = np.exp(logits - logits.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    state.P = P
    state.z = dk.sample_categorical(rng, P)


def update_tau(state: ChainState, hp: Hyperparameters, rng) -> None:
    state.tau = dk.sample_dirichlet(rng, hp.delta + _cluster_counts(state))


def update_assignments(state: ChainState, ds: Dataset, hp: Hyperparameters, rng) -> None:
    update_z(state, ds, hp, rng)
    update_tau(state, hp, rng)


def mixture_loglik(ds: Dataset, A1, mu, gamma, theta, tau, x=None) -> float:
    """Observed-data log-likelihood with memberships summed out."""
    x = ds.continuous if x is None else x
    return float(logsumexp(membership_logits(ds, x, A1, mu, gamma, theta, tau), axis=1).sum())


# --------------------------------------------------------------------------
# driver


def gibbs_step(state: ChainState, ds: Dataset, hp: Hyperparameters, rng, censored: bool = True) -> None:
    if censored:
        impute_censored(state, ds, rng)
    update_continuous(state, ds, hp, rng)
    update_categorical(state, ds, hp, rng)
    update_importance(state, ds, hp, rng)
    update_sigma_delta0(state, hp, rng)
    update_assignments(state, ds, hp, rng)


def _allocate(ds: Dataset, cfg: McmcConfig) -> ChainOutput:
    R, n, G, q, M = cfg.retained, ds.n, cfg.G, ds.q, ds.M
    return ChainOutput(
        P=np.empty((R, n, G)),
        z=np.empty((R, n), dtype=np.int64),
        delta=np.empty((R, M, G), dtype=np.int8),
        A1=np.empty((R, q)),
        mu=np.empty((R, q, G)),
        gamma=np.empty((R, q)),
        theta=[np.empty((R, G, L)) for L in ds.n_levels],
        tau=np.empty((R, G)),
        sigma2_delta0=np.empty(R),
        p1=np.empty((R, q)),
        p2=np.empty((R, M - q)),
        q=q,
        names=tuple(ds.names),
    )


def _record(out: ChainOutput, r: int, s: ChainState) -> None:
    out.P[r] = s.P
    out.z[r] = s.z
    out.delta[r] = s.delta
    out.A1[r] = s.A1
    out.mu[r] = s.mu
    out.gamma[r] = s.gamma
    for j, th in enumerate(s.theta):
        out.theta[j][r] = th
    out.tau[r] = s.tau
    out.sigma2_delta0[r] = s.sigma2_delta0
    out.p1[r] = s.p1
    out.p2[r] = s.p2


def run_chain(ds: Dataset, hp: Hyperparameters, cfg: McmcConfig, rng=None, state: Optional[ChainState] = None) -> ChainOutput:
    """Run one chain of ``cfg.T`` Gibbs sweeps and keep every k-th post-burn-in draw."""
    hp.validate(ds, cfg.G)
    rng = dk.make_rng(cfg.seed) if rng is None else rng
    state = init_state(ds, hp, cfg, rng) if state is None else state
    out = _allocate(ds, cfg)
    censored = ds.has_censoring
    r = 0
    for t in range(1, cfg.T + 1):
        try:
            gibbs_step(state, ds, hp, rng, censored)
        except FmmError as exc:
            raise type(exc)(f"iteration {t}: {exc}") from exc
        if t > cfg.B and (t - cfg.B - 1) % cfg.k == 0:
            _record(out, r, state)
            r += 1
    assert r == out.R
    return out
