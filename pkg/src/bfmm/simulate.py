"""Synthetic three-cluster scenarios and detection-limit censoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass
import numpy as np

from .datamodel import CATEGORICAL, CONTINUOUS, Censor, ColumnSchema, Dataset
from .distkernels import make_rng
from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

LEVELS = ("L1", "L2", "L3")


def N(mean, scale):
    return ("normal", float(mean), float(scale))


def Mult(*probs):
    return ("multinomial",) + tuple(float(p) for p in probs)


def _same(law):
    return (law, law, law)


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    cluster_sizes: tuple
    # per variable: (name, (law_cluster1, law_cluster2, law_cluster3))
    variables: tuple
    important: tuple

    @property
    def names(self):
        return [v[0] for v in self.variables]


SCENARIOS = {
    "sim1a": ScenarioSpec(
        "sim1a",
        (100, 100, 100),
        (
            ("x1", (N(-2, 2), N(2, 2), N(6, 2))),
            ("x2", (N(20, 1), N(25, 1), N(18, 1))),
            ("x3", (N(0, 1), N(-7, 1), N(4, 1))),
            ("x4", _same(N(0, 1))),
            ("x5", (Mult(0.1, 0.1, 0.8), Mult(0.1, 0.8, 0.1), Mult(0.8, 0.1, 0.1))),
        ),
        ("x1", "x2", "x3", "x5"),
    ),
    "sim1b": ScenarioSpec(
        "sim1b",
        (100, 100, 100),
        (
            ("x1", (N(-2, 2), N(-1, 2), N(0, 2))),
            ("x2", (N(20, 1), N(24, 1), N(21, 1))),
            ("x3", (N(5, 1), N(8, 1), N(7, 1))),
            ("x4", _same(N(0, 1))),
            ("x5", (N(-1, 1), N(1, 1), N(-2, 1))),
            ("x6", (N(0, 1), N(-1, 1), N(2, 1))),
            ("x7", (N(2, 1), N(1, 1), N(0, 1))),
            ("x8", (Mult(0.05, 0.05, 0.9), Mult(0.05, 0.9, 0.05), Mult(0.9, 0.05, 0.05))),
            ("x9", (Mult(0.3, 0.3, 0.4), Mult(0.4, 0.3, 0.3), Mult(0.3, 0.4, 0.3))),
            ("x10", (Mult(0.9, 0.05, 0.05), Mult(0.05, 0.9, 0.05), Mult(0.05, 0.05, 0.9))),
        ),
        ("x1", "x2", "x3", "x5", "x6", "x7", "x8", "x10"),
    ),
    "sim2": ScenarioSpec(
        "sim2",
        (100, 100, 100),
        (
            ("x1", (N(-2, 2), N(2, 2), N(6, 2))),
            ("x2", (N(20, 1), N(25, 1), N(18, 1))),
            ("x3", (N(0, 1), N(-7, 1), N(4, 1))),
            ("x4", _same(N(0, 1))),
            ("x5", (Mult(0.3, 0.3, 0.4), Mult(0.3, 0.3, 0.4), Mult(0.4, 0.3, 0.3))),
        ),
        ("x1", "x2", "x3"),
    ),
    "sim3": ScenarioSpec(
        "sim3",
        (100, 100, 100),
        (
            ("x1", _same(N(0, 0.5))),
            ("x2", _same(N(-3, 1))),
            ("x3", _same(N(4, 2))),
            ("x4", _same(N(0, 1))),
            ("x5", (Mult(0.05, 0.05, 0.9), Mult(0.05, 0.9, 0.05), Mult(0.9, 0.05, 0.05))),
            ("x6", (Mult(0.3, 0.3, 0.4), Mult(0.4, 0.3, 0.3), Mult(0.3, 0.4, 0.3))),
            ("x7", (Mult(0.9, 0.05, 0.05), Mult(0.05, 0.9, 0.05), Mult(0.05, 0.05, 0.9))),
        ),
        ("x5", "x7"),
    ),
}


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


def generate(spec: ScenarioSpec, seed: int, normal_param: str = "sd"):
    """Draw one dataset and its true labels (1-based).

    ``normal_param`` says how to read the second argument of the normal
    laws: ``"sd"`` (default) or ``"var"``.
    """
    if normal_param not in ("sd", "var"):
        raise InvalidArgumentError("normal_param must be 'sd' or 'var'")
    rng = make_rng(seed, (1,))
    labels = np.repeat(np.arange(1, len(spec.cluster_sizes) + 1), spec.cluster_sizes)
    n = labels.size
    cols, values = [], {}
    for name, laws in spec.variables:
        kind = CONTINUOUS if laws[0][0] == "normal" else CATEGORICAL
        out = np.empty(n, float if kind == CONTINUOUS else np.int64)
        for g, law in enumerate(laws):
            idx = labels == g + 1
            if kind == CONTINUOUS:
                scale = law[2] if normal_param == "sd" else np.sqrt(law[2])
                out[idx] = rng.normal(law[1], scale, idx.sum())
            else:
                out[idx] = rng.choice(len(law) - 1, size=idx.sum(), p=np.asarray(law[1:]))
        cols.append(ColumnSchema(name, kind, LEVELS if kind == CATEGORICAL else ()))
        values[name] = out
    cont = [c for c in cols if c.kind == CONTINUOUS]
    cat = [c for c in cols if c.kind == CATEGORICAL]
    ds = Dataset(
        tuple(cont + cat),
        np.column_stack([values[c.name] for c in cont]) if cont else np.zeros((n, 0)),
        np.zeros((n, len(cont)), np.int8),
        np.column_stack([values[c.name] for c in cat]) if cat else np.zeros((n, 0), np.int64),
    )
    return ds, labels


@dataclass(frozen=True)
class CensorSpec:
    variables: tuple
    proportion: float
    side: str = "lower"

    def __post_init__(self):
        if not 0 <= self.proportion < 1:
            raise InvalidArgumentError("censoring proportion must lie in [0, 1)")
        if self.side != "lower":
            raise InvalidArgumentError("only lower censoring is simulated")


def apply_censoring(ds: Dataset, cs: CensorSpec) -> Dataset:
    """Censor the lowest ``floor(proportion * n)`` values of each target column.

    The lower limit is the midpoint between the last censored and first
    retained order statistic (the median when proportion is 0.5 and n is
    even), so exactly that many cells fall below it.
    """
    names = ds.names
    X = np.array(ds.continuous)
    F = np.array(ds.censor)
    cols = list(ds.columns)
    k = int(np.floor(cs.proportion * ds.n + 1e-9))
    for v in cs.variables:
        if v not in names:
            raise InvalidArgumentError(f"unknown variable {v!r}")
        j = names.index(v)
        if cols[j].kind != CONTINUOUS:
            raise InvalidArgumentError(f"cannot censor categorical variable {v!r}")
        if k == 0:
            continue
        if np.any(F[:, j] != Censor.OBSERVED):
            raise InvalidArgumentError(f"variable {v!r} is already censored")
        s = np.sort(X[:, j])
        limit = 0.5 * (s[k - 1] + s[k])
        if s[k - 1] == s[k]:
            log.warning("tied order statistics in %s: censored count will differ from %d", v, k)
        hit = X[:, j] < limit
        X[hit, j] = limit
        F[hit, j] = Censor.BELOW_LOWER
        c = cols[j]
        cols[j] = ColumnSchema(c.name, c.kind, c.levels, limit, c.upper_limit)
    return ds.replace(columns=tuple(cols), continuous=X, censor=F)


def naive_fill(ds: Dataset) -> Dataset:
    """Replace below-limit cells with half the lower limit, treating them as observed."""
    X = np.array(ds.continuous)
    F = np.array(ds.censor)
    cols = list(ds.columns)
    for j, c in enumerate(ds.continuous_columns):
        hit = F[:, j] == Censor.BELOW_LOWER
        if not hit.any():
            continue
        if c.lower_limit == 0:
            log.warning("lower limit of %s is 0; half-limit fill is 0", c.name)
        X[hit, j] = 0.5 * c.lower_limit
        F[hit, j] = Censor.OBSERVED
        cols[j] = ColumnSchema(c.name, c.kind, c.levels, None, c.upper_limit)
    # limits dropped: filled cells may sit on the wrong side of the old limit
    return ds.replace(columns=tuple(cols), continuous=X, censor=F)

