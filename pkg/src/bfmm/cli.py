"""Command-line entry point: ``bfmm simulate | fit | evaluate | replicate``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .datamodel import load_dataset, read_labels, write_dataset, write_labels
from .errors import FmmError, IngestionError
from .pipeline import (
    ReplicateJob,
    dump_draws,
    fit_dataset,
    make_dataset,
    run_replicates,
    summary_rows,
    write_assignments,
    write_estimates,
    write_manifest,
    write_replicates,
    write_summary,
    write_weights,
)
from .runconfig import RunConfig, load_run_config
from .simulate import SCENARIOS
from .summarize import adjusted_rand_index

log = logging.getLogger("bfmm")


class UsageError(Exception):
    pass


def _split(text):
    return tuple(v.strip() for v in text.split(",") if v.strip()) if text else ()


def _require_file(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _load_config(path):
    if path is None:
        return RunConfig()
    _require_file(path, "config file")
    return load_run_config(path)


def cmd_simulate(args) -> int:
    started = time.time()
    job = ReplicateJob(args.scenario, args.seed, _split(args.censor), args.prop, args.naive, normal_param=args.normal_param)
    ds, labels = make_dataset(job)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data, schema, lab = out / "data.csv", out / "schema.txt", out / "labels.csv"
    write_dataset(ds, data, schema)
    write_labels(labels, lab)
    write_manifest(
        out,
        "simulate",
        {
            "scenario": args.scenario,
            "seed": args.seed,
            "censor": ",".join(job.censor_vars) or "none",
            "proportion": args.prop,
            "naive_fill": args.naive,
            "normal_param": args.normal_param,
        },
        outputs=[data, schema, lab],
        started=started,
    )
    return 0


def cmd_fit(args) -> int:
    started = time.time()
    _require_file(args.data, "data file")
    _require_file(args.schema, "schema file")
    rc = _load_config(args.config)
    cfg = rc.mcmc(T=args.iters, B=args.burnin, k=args.thin, seed=args.seed, G=args.G)
    ds = load_dataset(args.data, args.schema)
    hp = rc.hyperparameters(ds, cfg.G)
    res = fit_dataset(ds, hp, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "assignments.csv", out / "weights.csv", out / "estimates.csv"]
    write_assignments(res.summary, ds.row_ids, paths[0])
    write_weights(res.summary, paths[1])
    write_estimates(res.summary, ds, paths[2])
    if args.dump_draws:
        paths.append(out / "draws.npz")
        dump_draws(res.relabeled, paths[-1])
    inputs = [args.data, args.schema] + ([args.config] if args.config else [])
    write_manifest(
        out,
        "fit",
        {
            "seed": cfg.seed,
            "G": cfg.G,
            "iterations": cfg.T,
            "burn_in": cfg.B,
            "thinning": cfg.k,
            "retained_draws": cfg.retained,
            "config": rc.snapshot() or ["(defaults)"],
        },
        inputs=inputs,
        outputs=paths,
        started=started,
    )
    return 0


def _read_partition(path):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if "cluster" in header:
        j = header.index("cluster")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        try:
            return np.array([int(r[j]) for r in rows if r])
        except (ValueError, IndexError):
            raise IngestionError(f"{path}: malformed cluster column") from None
    return read_labels(path)


def cmd_evaluate(args) -> int:
    _require_file(args.assignments, "assignments file")
    _require_file(args.labels, "labels file")
    a = _read_partition(args.assignments)
    b = _read_partition(args.labels)
    print(adjusted_rand_index(a, b))
    return 0


def cmd_replicate(args) -> int:
    started = time.time()
    rc = _load_config(args.config)
    cfg = rc.mcmc(T=args.iters, B=args.burnin, k=args.thin, seed=args.seed, G=args.G)
    hyper = tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in rc.hyper.items()))
    base = ReplicateJob(
        args.scenario, cfg.seed, _split(args.censor), args.prop, args.naive,
        cfg.T, cfg.B, cfg.k, cfg.G, args.normal_param, hyper,
    )
    ari, weights, names = run_replicates(base, args.reps, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = summary_rows(ari, weights, names)
    summary, per_rep = out / "summary.csv", out / "replicates.csv"
    write_summary(rows, summary)
    write_replicates(ari, weights, names, [cfg.seed + r for r in range(args.reps)], per_rep)
    for name, med, lo, hi in rows:
        print(f"{name}: {med:.2f} ({lo:.2f}, {hi:.2f})")
    write_manifest(
        out,
        "replicate",
        {
            "scenario": args.scenario,
            "replicates": args.reps,
            "base_seed": cfg.seed,
            "censor": ",".join(base.censor_vars) or "none",
            "proportion": args.prop,
            "naive_fill": args.naive,
            "normal_param": args.normal_param,
            "G": cfg.G,
            "iterations": cfg.T,
            "burn_in": cfg.B,
            "thinning": cfg.k,
            "config": rc.snapshot() or ["(defaults)"],
        },
        inputs=[args.config] if args.config else [],
        outputs=[summary, per_rep],
        started=started,
    )
    return 0


def _chain_flags(p):
    p.add_argument("--config", help="run configuration file (key = value)")
    p.add_argument("--iters", type=int, help="total iterations T (default 4000)")
    p.add_argument("--burnin", type=int, help="burn-in B (default 2000)")
    p.add_argument("--thin", type=int, help="thinning k (default 1)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("-G", "--clusters", dest="G", type=int, help="number of clusters (default 3)")


def _censor_flags(p):
    p.add_argument("--censor", default="", help="comma-separated continuous variables to censor from below")
    p.add_argument("--prop", type=float, default=0.2, help="censoring proportion per variable")
    p.add_argument("--naive", action="store_true", help="fill censored cells with half the lower limit")
    p.add_argument("--normal-param", choices=("sd", "var"), default="sd", help="second normal parameter of the scenario laws")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bfmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _censor_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the mixture model to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-draws", action="store_true", help="also write relabelled raw draws (draws.npz)")
    _chain_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="adjusted Rand index between two partitions")
    p.add_argument("assignments")
    p.add_argument("labels")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replicate", help="simulate, fit and score many replicates")
    p.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    _censor_flags(p)
    _chain_flags(p)
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "reps", 1) < 1:
        parser.error("--reps must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bfmm: error: {exc}", file=sys.stderr)
        return 2
    except (FmmError, OSError) as exc:
        print(f"bfmm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
