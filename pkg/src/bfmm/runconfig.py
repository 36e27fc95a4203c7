"""Line-oriented ``key = value`` run configuration.

Recognised keys: every :class:`~bfmm.sampler.Hyperparameters` field,
``alpha_spike.<variable>`` for per-variable spike concentrations, and the
chain settings ``T``, ``B``, ``k``, ``seed``, ``G``. Vectors are comma
separated; a scalar ``delta`` or ``alpha_spike`` is replicated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .datamodel import Dataset
from .errors import InvalidArgumentError
from .sampler import Hyperparameters, McmcConfig

_SCALAR_HP = {f.name for f in fields(Hyperparameters)} - {"delta", "alpha_spike"}
_CHAIN_KEYS = {"T", "B", "k", "seed", "G"}
_ALIASES = {"iterations": "T", "burnin": "B", "burn_in": "B", "thin": "k", "thinning": "k"}


@dataclass
class RunConfig:
    hyper: dict = field(default_factory=dict)
    chain: dict = field(default_factory=dict)

    def mcmc(self, **overrides) -> McmcConfig:
        kw = dict(self.chain)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return McmcConfig(**kw)

    def hyperparameters(self, ds: Dataset, G: int) -> Hyperparameters:
        hp = Hyperparameters.defaults(G, ds.n_levels)
        for key, val in self.hyper.items():
            if key == "delta":
                val = np.full(G, val[0]) if len(val) == 1 else np.asarray(val)
                hp.delta = val
            elif key == "alpha_spike":
                hp.alpha_spike = tuple(
                    np.full(L, val[0]) if len(val) == 1 else np.asarray(val) for L in ds.n_levels
                )
            elif key.startswith("alpha_spike."):
                continue
            else:
                setattr(hp, key, val)
        # per-variable keys override the blanket alpha_spike regardless of order
        cats = [c.name for c in ds.categorical_columns]
        for key, val in self.hyper.items():
            if key.startswith("alpha_spike."):
                name = key.split(".", 1)[1]
                if name not in cats:
                    raise InvalidArgumentError(f"config key {key!r}: {name!r} is not a categorical variable")
                j = cats.index(name)
                spikes = list(hp.alpha_spike)
                spikes[j] = np.full(ds.n_levels[j], val[0]) if len(val) == 1 else np.asarray(val)
                hp.alpha_spike = tuple(spikes)
        hp.validate(ds, G)
        return hp

    def snapshot(self) -> list:
        lines = []
        for key in sorted(self.chain):
            lines.append(f"{key} = {self.chain[key]}")
        for key in sorted(self.hyper):
            v = self.hyper[key]
            v = ",".join(repr(float(x)) for x in v) if isinstance(v, (list, tuple)) else repr(v)
            lines.append(f"{key} = {v}")
        return lines


def _floats(text, key):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise InvalidArgumentError(f"config key {key!r}: expected numbers, got {text!r}") from None


def parse_run_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep or not key:
            raise InvalidArgumentError(f"config line {lineno}: expected 'key = value'")
        key = _ALIASES.get(key, key)
        if key in _CHAIN_KEYS:
            try:
                cfg.chain[key] = int(val)
            except ValueError:
                raise InvalidArgumentError(f"config line {lineno}: {key} must be an integer") from None
        elif key in ("delta", "alpha_spike") or key.startswith("alpha_spike."):
            vals = _floats(val, key)
            if not vals:
                raise InvalidArgumentError(f"config line {lineno}: {key} has no values")
            cfg.hyper[key] = vals
        elif key in _SCALAR_HP:
            vals = _floats(val, key)
            if len(vals) != 1:
                raise InvalidArgumentError(f"config line {lineno}: {key} takes a single number")
            cfg.hyper[key] = vals[0]
        else:
            raise InvalidArgumentError(f"config line {lineno}: unknown key {key!r}")
    return cfg


def load_run_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_run_config(fh.read())
