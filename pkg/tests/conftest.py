import numpy as np
import pytest

from bfmm.datamodel import Censor, ColumnSchema, build_dataset
from bfmm.distkernels import make_rng
from bfmm.sampler import Hyperparameters, McmcConfig, init_state

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def small_dataset(n=12, seed=0, censored=False):
    """Two continuous columns plus one 3-level categorical column."""
    rng = np.random.default_rng(seed)
    cols = [
        ColumnSchema("a", "continuous", lower_limit=-1.0 if censored else None),
        ColumnSchema("b", "continuous"),
        ColumnSchema("c", "categorical", ("u", "v", "w")),
    ]
    a = rng.normal(0, 1, n)
    values = {"a": a, "b": rng.normal(3, 2, n), "c": rng.integers(0, 3, n)}
    cens = {"a": np.where(a < -1.0, Censor.BELOW_LOWER, Censor.OBSERVED)} if censored else None
    return build_dataset(cols, values, cens)


@pytest.fixture
def tiny():
    return small_dataset()


@pytest.fixture
def tiny_state(tiny):
    hp = Hyperparameters.defaults(3, tiny.n_levels)
    cfg = McmcConfig(T=10, B=5, G=3, seed=1)
    return tiny, hp, init_state(tiny, hp, cfg, make_rng(1))
