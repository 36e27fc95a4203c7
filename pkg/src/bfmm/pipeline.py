"""End-to-end fitting and simulation replicates, plus their file outputs."""

from __future__ import annotations

import csv
import hashlib
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .datamodel import Dataset
from .errors import FmmError, InvalidArgumentError
from .relabel import apply_relabeling, run_relabel
from .runconfig import RunConfig
from .sampler import ChainOutput, Hyperparameters, McmcConfig, run_chain
from .simulate import CensorSpec, apply_censoring, generate, get_scenario, naive_fill
from .summarize import PosteriorSummary, adjusted_rand_index, summarize_chain

log = logging.getLogger(__name__)


@dataclass
class FitResult:
    draws: ChainOutput
    U: np.ndarray
    relabeled: ChainOutput
    summary: PosteriorSummary


def fit_dataset(ds: Dataset, hp: Hyperparameters, cfg: McmcConfig) -> FitResult:
    draws = run_chain(ds, hp, cfg)
    U = run_relabel(draws.P)
    relabeled = apply_relabeling(draws, U)
    return FitResult(draws, U, relabeled, summarize_chain(relabeled))


# --------------------------------------------------------------------------
# writers


def _f(x) -> str:
    return repr(float(x))


def write_assignments(summary: PosteriorSummary, row_ids, path) -> None:
    G = summary.membership.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "cluster"] + [f"p_{g + 1}" for g in range(G)])
        for i, rid in enumerate(row_ids):
            w.writerow([rid, int(summary.assignments[i])] + [_f(p) for p in summary.membership[i]])


def write_weights(summary: PosteriorSummary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "weight"])
        for name, wt in zip(summary.names, summary.weights):
            w.writerow([name, _f(wt)])


def write_estimates(summary: PosteriorSummary, ds: Dataset, path) -> None:
    G = summary.tau.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "cluster", "value"])
        for g in range(G):
            w.writerow(["tau", g + 1, _f(summary.tau[g])])
        for m, c in enumerate(ds.continuous_columns):
            w.writerow([f"A1[{c.name}]", "", _f(summary.A1[m])])
            for g in range(G):
                w.writerow([f"mu[{c.name}]", g + 1, _f(summary.mu[m, g])])
            w.writerow([f"gamma[{c.name}]", "", _f(summary.gamma[m])])
            w.writerow([f"p1[{c.name}]", "", _f(summary.p1[m])])
        for j, c in enumerate(ds.categorical_columns):
            for g in range(G):
                for l, level in enumerate(c.levels):
                    w.writerow([f"theta[{c.name}={level}]", g + 1, _f(summary.theta[j][g, l])])
            w.writerow([f"p2[{c.name}]", "", _f(summary.p2[j])])
        w.writerow(["sigma2_delta0", "", _f(summary.sigma2_delta0)])


def dump_draws(draws: ChainOutput, path) -> None:
    arrays = {
        "P": draws.P,
        "z": draws.z,
        "delta": draws.delta,
        "A1": draws.A1,
        "mu": draws.mu,
        "gamma": draws.gamma,
        "tau": draws.tau,
        "sigma2_delta0": draws.sigma2_delta0,
        "p1": draws.p1,
        "p2": draws.p2,
        "names": np.array(draws.names),
    }
    for j, th in enumerate(draws.theta):
        arrays[f"theta_{j}"] = th
    np.savez_compressed(path, **arrays)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, entries: dict, inputs: Sequence = (), outputs: Sequence = (), started: Optional[float] = None) -> Path:
    """Plain-text ``key: value`` record of how an output directory was made."""
    out_dir = Path(out_dir)
    lines = [f"command: {command}", f"software: bfmm {__version__} (python {platform.python_version()})"]
    for k, v in entries.items():
        if isinstance(v, (list, tuple)):
            lines.append(f"{k}:")
            lines.extend(f"  {item}" for item in v)
        else:
            lines.append(f"{k}: {v}")
    for p in inputs:
        lines.append(f"input: {p} sha256={file_sha256(p)}")
    for p in outputs:
        lines.append(f"output: {p}")
    if started is not None:
        lines.append(f"wall_clock_seconds: {time.time() - started:.3f}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# replicates


@dataclass(frozen=True)
class ReplicateJob:
    scenario: str
    seed: int
    censor_vars: tuple = ()
    proportion: float = 0.0
    naive: bool = False
    T: int = 4000
    B: int = 2000
    k: int = 1
    G: int = 3
    normal_param: str = "sd"
    hyper: tuple = ()  # sorted (key, value) pairs from a RunConfig


def make_dataset(job: ReplicateJob):
    ds, labels = generate(get_scenario(job.scenario), job.seed, job.normal_param)
    if job.censor_vars and job.proportion > 0:
        ds = apply_censoring(ds, CensorSpec(tuple(job.censor_vars), job.proportion))
        if job.naive:
            ds = naive_fill(ds)
    return ds, labels


def run_replicate(job: ReplicateJob):
    """Simulate, fit and score one replicate; returns (ARI, weights, names)."""
    ds, labels = make_dataset(job)
    rc = RunConfig(hyper={k: (list(v) if isinstance(v, tuple) else v) for k, v in job.hyper})
    hp = rc.hyperparameters(ds, job.G)
    cfg = McmcConfig(T=job.T, B=job.B, k=job.k, seed=job.seed, G=job.G)
    res = fit_dataset(ds, hp, cfg)
    return adjusted_rand_index(labels, res.summary.assignments), res.summary.weights, tuple(ds.names)


def replicate_jobs(base: ReplicateJob, n_reps: int) -> list:
    return [ReplicateJob(**{**base.__dict__, "seed": base.seed + r}) for r in range(n_reps)]


def run_replicates(base: ReplicateJob, n_reps: int, workers: int = 1):
    """Run ``n_reps`` replicates with seeds ``base.seed + r``.

    Returns (ari array, weights matrix (n_reps, M), variable names). Worker
    count does not affect results.
    """
    if n_reps < 1:
        raise InvalidArgumentError("n_reps must be >= 1")
    jobs = replicate_jobs(base, n_reps)
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_replicate, j) for j in jobs]
            for r, fut in enumerate(futures):
                try:
                    results.append(fut.result())
                except FmmError as exc:
                    raise type(exc)(f"replicate {r}: {exc}") from exc
    else:
        for r, j in enumerate(jobs):
            try:
                results.append(run_replicate(j))
            except FmmError as exc:
                raise type(exc)(f"replicate {r}: {exc}") from exc
    ari = np.array([a for a, _, _ in results])
    weights = np.vstack([w for _, w, _ in results])
    return ari, weights, results[0][2]


def summary_rows(ari, weights, names) -> list:
    """(metric, median, 2.5th percentile, 97.5th percentile) rows."""
    rows = [("ARI",) + tuple(np.percentile(ari, [50, 2.5, 97.5]))]
    for j, name in enumerate(names):
        rows.append((f"weight[{name}]",) + tuple(np.percentile(weights[:, j], [50, 2.5, 97.5])))
    return rows


def write_summary(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "median", "p2.5", "p97.5"])
        for name, *vals in rows:
            w.writerow([name] + [_f(v) for v in vals])


def write_replicates(ari, weights, names, seeds, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "seed", "ARI"] + [f"weight[{n}]" for n in names])
        for r, seed in enumerate(seeds):
            w.writerow([r, seed, _f(ari[r])] + [_f(v) for v in weights[r]])
