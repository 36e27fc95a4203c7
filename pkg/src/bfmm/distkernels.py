"""Seedable samplers and log-densities used by the Gibbs updates.

Every sampler takes a ``numpy.random.Generator`` as its first argument and
accepts broadcastable array parameters, so the sampler can update all
variables and clusters of one block in a single call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, ndtr, ndtri

from .errors import BoundaryDensityError, InvalidArgumentError, SamplingError

SIMPLEX_FLOOR = 1e-12
TAIL_MASS_FLOOR = 1e-10
_MAX_REJECTION_TRIES = 100_000
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def make_rng(seed: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``.

    ``stream`` selects an independent child stream (e.g. one per replicate
    or per purpose) without correlating it with the parent.
    """
    if seed < 0:
        raise InvalidArgumentError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class TruncationBounds:
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise InvalidArgumentError(
                f"degenerate truncation bounds: lower={self.lower} >= upper={self.upper}"
            )

    def contains(self, x: float) -> bool:
        lo = -math.inf if self.lower is None else self.lower
        hi = math.inf if self.upper is None else self.upper
        return lo < x < hi


# --------------------------------------------------------------------------
# truncated normal


def _tail_rejection(rng, a, b):
    """Standard normal restricted to [a, b] with 0 < a < b <= inf.

    Exponential proposal (Robert 1995) for wide intervals, uniform
    proposal when the interval is narrow relative to the tail.
    """
    if b - a < 1.0 / a:
        for _ in range(_MAX_REJECTION_TRIES):
            z = rng.uniform(a, b)
            if rng.random() <= math.exp(0.5 * (a * a - z * z)):
                return z
        return None
    alpha = 0.5 * (a + math.sqrt(a * a + 4.0))
    for _ in range(_MAX_REJECTION_TRIES):
        z = a + rng.exponential(1.0 / alpha)
        if z >= b:
            continue
        if rng.random() <= math.exp(-0.5 * (z - alpha) ** 2):
            return z
    return None


def _narrow_rejection(rng, lo, hi):
    # lo <= 0 <= hi, so the density peak exp(0) bounds the target
    for _ in range(_MAX_REJECTION_TRIES):
        z = rng.uniform(lo, hi)
        if rng.random() <= math.exp(-0.5 * z * z):
            return z
    return None


def truncated_normal(rng, mean, sd, lower=None, upper=None, name=None):
    """Vectorised draw from Normal(mean, sd**2) restricted to (lower, upper).

    ``lower``/``upper`` may be None, scalars or arrays; ``+-inf`` marks an
    open side. Inverse-CDF sampling on the side of the distribution where
    the CDF is accurate, with rejection sampling when the retained mass is
    below ``TAIL_MASS_FLOOR``.
    """
    mean, sd = np.broadcast_arrays(np.asarray(mean, float), np.asarray(sd, float))
    shape = mean.shape
    lo_raw = np.full(shape, -np.inf) if lower is None else np.broadcast_to(np.asarray(lower, float), shape)
    hi_raw = np.full(shape, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, float), shape)
    if np.any(sd <= 0):
        raise InvalidArgumentError(f"sd must be positive{_for(name)}")
    if np.any(lo_raw >= hi_raw):
        raise InvalidArgumentError(f"degenerate truncation bounds{_for(name)}")

    a = (lo_raw - mean) / sd
    b = (hi_raw - mean) / sd
    # reflect intervals lying in the upper half so ndtr works in its accurate tail
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    p_lo = ndtr(lo)
    p_hi = ndtr(hi)
    mass = p_hi - p_lo
    u = rng.random(shape)
    z = ndtri(p_lo + u * mass)

    bad = ~(mass >= TAIL_MASS_FLOOR) | ~np.isfinite(z)
    if np.any(bad):
        z = np.array(z, copy=True)
        for idx in zip(*np.nonzero(bad)) if z.ndim else [()]:
            l, h = float(lo[idx]), float(hi[idx])
            if h < 0:
                draw = _tail_rejection(rng, -h, -l)
                draw = None if draw is None else -draw
            else:
                draw = _narrow_rejection(rng, l, h)
            if draw is None or not math.isfinite(draw):
                raise SamplingError(f"truncated normal mass is numerically zero{_for(name)}")
            z[idx] = draw

    x = mean + sd * np.where(flip, -z, z)
    # keep draws strictly inside the bounds despite rounding
    x = np.clip(x, np.nextafter(lo_raw, np.inf), np.nextafter(hi_raw, -np.inf))
    return x


def sample_truncated_normal(rng, mean: float, sd: float, bounds: TruncationBounds, name=None) -> float:
    return float(truncated_normal(rng, mean, sd, bounds.lower, bounds.upper, name=name))


def _for(name):
    return f" (variable {name})" if name is not None else ""


# --------------------------------------------------------------------------
# conjugate-family samplers


def sample_dirichlet(rng, alphas):
    """Dirichlet draw(s); ``alphas`` may carry leading batch dimensions.

    Components are clamped to ``[SIMPLEX_FLOOR, 1 - SIMPLEX_FLOOR]`` and
    renormalised so downstream log-densities stay finite.
    """
    alphas = np.asarray(alphas, float)
    if alphas.shape[-1] < 2:
        raise InvalidArgumentError("Dirichlet needs at least two components")
    if not (alphas > 0).all():
        raise InvalidArgumentError("Dirichlet concentration parameters must be positive")
    g = rng.standard_gamma(alphas)
    total = g.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = g / total
    # every gamma draw underflowed (tiny alphas): fall back to the centroid
    degenerate = ~np.isfinite(theta).all(axis=-1)
    if np.any(degenerate):
        theta[degenerate] = 1.0 / alphas.shape[-1]
    return clamp_simplex(theta)


def clamp_simplex(theta):
    theta = np.clip(theta, SIMPLEX_FLOOR, 1.0 - SIMPLEX_FLOOR)
    return theta / theta.sum(axis=-1, keepdims=True)


def sample_gamma(rng, shape, rate):
    shape = np.asarray(shape, float)
    rate = np.asarray(rate, float)
    if not ((shape > 0).all() and (rate > 0).all()):
        raise InvalidArgumentError("gamma shape and rate must be positive")
    return rng.gamma(shape, 1.0 / rate)


def sample_inverse_gamma(rng, shape, scale):
    """Inverse-gamma draw as the reciprocal of Gamma(shape, rate=scale)."""
    return 1.0 / sample_gamma(rng, shape, scale)


def sample_beta(rng, a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if not ((a > 0).all() and (b > 0).all()):
        raise InvalidArgumentError("beta parameters must be positive")
    return rng.beta(a, b)


def sample_bernoulli(rng, p):
    p = np.asarray(p, float)
    if not ((p >= 0) & (p <= 1)).all():
        raise InvalidArgumentError("bernoulli probability must lie in [0, 1]")
    return (rng.random(p.shape) < p).astype(np.int8)


def sample_categorical(rng, probs):
    """Index draw(s) from the last axis of ``probs`` (renormalised)."""
    probs = np.asarray(probs, float)
    if not (np.isfinite(probs).all() and (probs >= 0).all()):
        raise InvalidArgumentError("categorical probabilities must be finite and non-negative")
    total = probs.sum(axis=-1, keepdims=True)
    if not (total > 0).all():
        raise InvalidArgumentError("categorical probabilities sum to zero")
    cdf = np.cumsum(probs / total, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None]
    idx = (cdf < u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


# --------------------------------------------------------------------------
# densities


def log_dirichlet_density(theta, alphas):
    """Exact Dirichlet log-density (batch over leading dimensions)."""
    theta = np.asarray(theta, float)
    alphas = np.asarray(alphas, float)
    if not (alphas > 0).all():
        raise InvalidArgumentError("Dirichlet concentration parameters must be positive")
    if not (theta > 1e-300).all():
        raise BoundaryDensityError("Dirichlet density evaluated on the simplex boundary; clamp theta first")
    return (
        gammaln(alphas.sum(axis=-1))
        - gammaln(alphas).sum(axis=-1)
        + ((alphas - 1.0) * np.log(theta)).sum(axis=-1)
    )


def normal_log_pdf(x, mean, sd):
    sd = np.asarray(sd, float)
    if not (sd > 0).all():
        raise InvalidArgumentError("sd must be positive")
    z = (np.asarray(x, float) - mean) / sd
    return -0.5 * z * z - np.log(sd) - _LOG_SQRT_2PI


def normal_cdf(x, mean, sd):
    sd = np.asarray(sd, float)
    if not (sd > 0).all():
        raise InvalidArgumentError("sd must be positive")
    return ndtr((np.asarray(x, float) - mean) / sd)
