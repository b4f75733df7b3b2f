"""Command-line interface.

Subcommands: simulate, test, multi-test, level-study, power-study, reproduce.
All randomness flows from ``--seed`` (default 0): inline simulation uses the
sub-streams (seed, 0, TAG_F) and (seed, 0, TAG_G); sign draws use
(seed, 0, TAG_SIGNS, 0).  Test reports are printed as JSON on stdout; study
reports are written as CSV with a JSON sidecar.

Exit status: 0 on success (including accept decisions), 1 on runtime
failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys

from threadpoolctl import threadpool_limits

from .aggregate import collection_from_id, run_multi_test
from .experiments import (
    EXPERIMENTS,
    SCALES,
    StudyConfig,
    level_study,
    power_study,
    reproduce_experiment,
    write_report,
    write_reproduce_report,
)
from .intensity import model_from_id
from .kernels import kernel_from_id
from .point_process import (
    pool,
    read_pool_csv,
    simulate,
    write_pattern_csv,
    write_pool_csv,
)
from .single_test import run_single_test
from .streams import TAG_F, TAG_G, TAG_SIGNS, stream


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poisson-twosample",
        description="Kernel two-sample tests for Poisson process intensities "
        "with exact wild-bootstrap calibration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a point pattern or a marked pool")
    sim.add_argument("--model", required=True, help="intensity id, e.g. f1, beta:2:5, g2:15")
    sim.add_argument("--g-model", help="second intensity id; if given, write a marked pool")
    sim.add_argument("--n", type=float, default=100.0, help="intensity scale (default 100)")
    sim.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sim.add_argument("--out", required=True, help="output CSV path")

    def add_pool_source(p):
        p.add_argument("--pool", help="pool CSV (header x,mark); omit to simulate inline")
        p.add_argument("--model", help="first intensity id for inline simulation")
        p.add_argument("--g-model", help="second intensity id for inline simulation")
        p.add_argument("--n", type=float, default=100.0, help="intensity scale (default 100)")
        p.add_argument("--alpha", type=float, default=0.05, help="test level (default 0.05)")
        p.add_argument("--b", type=int, default=10000, help="bootstrap replicates (default 10000)")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")

    tst = sub.add_parser("test", help="single kernel test of a pool")
    tst.add_argument("--kernel", required=True, help="kernel id, e.g. gauss:h=0.25, haar:J=5")
    add_pool_source(tst)

    mtst = sub.add_parser("multi-test", help="aggregated multiple test of a pool")
    mtst.add_argument("--collection", required=True, help="collection id: Ne, Th, G, E, ...")
    mtst.add_argument(
        "--grid-step", type=float, default=2.0**-16, help="u-search grid step (default 2^-16)"
    )
    add_pool_source(mtst)

    def add_study_flags(p):
        p.add_argument("--config", help="flat key = value config file (flags override)")
        p.add_argument("--f-model", help="first intensity id")
        p.add_argument("--g-model", help="second intensity id")
        p.add_argument("--n", type=float, help="intensity scale (default 100)")
        p.add_argument("--alpha", type=float, help="test level (default 0.05)")
        p.add_argument("--n-sims", type=int, help="number of simulations (default 1000)")
        p.add_argument("--b", type=int, help="bootstrap replicates (default 10000)")
        p.add_argument("--tests", help="comma-separated test ids (default KS,Ne:Jbar=7,Th:Jtilde=6,G,E)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--grid-step", type=float, help="u-search grid step (default 2^-16)")
        p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--out", required=True, help="output CSV path (JSON sidecar alongside)")

    lvl = sub.add_parser("level-study", help="first-kind-error study (f = g)")
    add_study_flags(lvl)
    pwr = sub.add_parser("power-study", help="power study under an alternative")
    add_study_flags(pwr)

    rep = sub.add_parser("reproduce", help="rerun a named benchmark experiment")
    rep.add_argument("experiment", choices=sorted(EXPERIMENTS), help="experiment name")
    rep.add_argument("--scale", choices=sorted(SCALES), default="desk", help="desk or paper")
    rep.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    rep.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    rep.add_argument("--out", required=True, help="output CSV path (JSON sidecar alongside)")
    return parser


def _load_pool(args: argparse.Namespace):
    if args.pool:
        return read_pool_csv(args.pool)
    if not (args.model and args.g_model):
        raise ValueError("provide --pool, or both --model and --g-model to simulate inline")
    f = model_from_id(args.model)
    g = model_from_id(args.g_model)
    pat_f = simulate(f, args.n, stream(args.seed, 0, TAG_F))
    pat_g = simulate(g, args.n, stream(args.seed, 0, TAG_G))
    return pool(pat_f, pat_g)


def _cmd_simulate(args) -> int:
    f = model_from_id(args.model)
    pat_f = simulate(f, args.n, stream(args.seed, 0, TAG_F))
    if args.g_model:
        g = model_from_id(args.g_model)
        pat_g = simulate(g, args.n, stream(args.seed, 0, TAG_G))
        write_pool_csv(pool(pat_f, pat_g), args.out)
    else:
        write_pattern_csv(pat_f, args.out)
    return 0


def _cmd_test(args) -> int:
    spec = kernel_from_id(args.kernel)
    pooled = _load_pool(args)
    report = run_single_test(
        spec, pooled, args.alpha, args.b, stream(args.seed, 0, TAG_SIGNS, 0)
    )
    print(report.to_json())
    return 0


def _cmd_multi_test(args) -> int:
    collection = collection_from_id(args.collection)
    pooled = _load_pool(args)
    report = run_multi_test(
        collection,
        pooled,
        args.alpha,
        args.b,
        stream(args.seed, 0, TAG_SIGNS, 0),
        grid_step=args.grid_step,
    )
    print(report.to_json())
    return 0


_CONFIG_CASTS = {
    "f_model": str,
    "g_model": str,
    "n": float,
    "alpha": float,
    "n_sims": int,
    "b": int,
    "master_seed": int,
    "grid_step": float,
}


def _read_config_file(path) -> dict:
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "tests":
                values[key] = tuple(t.strip() for t in value.split(",") if t.strip())
            elif key in _CONFIG_CASTS:
                values[key] = _CONFIG_CASTS[key](value)
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return values


def _study_config(args) -> StudyConfig:
    values = _read_config_file(args.config) if args.config else {}
    overrides = {
        "f_model": args.f_model,
        "g_model": args.g_model,
        "n": args.n,
        "alpha": args.alpha,
        "n_sims": args.n_sims,
        "b": args.b,
        "master_seed": args.seed,
        "grid_step": args.grid_step,
    }
    if args.tests:
        overrides["tests"] = tuple(t.strip() for t in args.tests.split(",") if t.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "f_model" not in values or "g_model" not in values:
        raise ValueError("f_model and g_model are required (flags or config file)")
    return StudyConfig(**values)


def _cmd_study(args, runner) -> int:
    config = _study_config(args)
    report = runner(config, workers=args.workers)
    write_report(report, args.out)
    print(f"wrote {args.out} ({report.elapsed_seconds:.1f}s)", file=sys.stderr)
    return 0


def _cmd_reproduce(args) -> int:
    rows = reproduce_experiment(
        args.experiment, scale=args.scale, seed=args.seed, workers=args.workers
    )
    write_reproduce_report(args.experiment, args.scale, args.seed, rows, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        # pin BLAS threads so identical commands give identical bytes
        # regardless of the ambient thread configuration
        with threadpool_limits(limits=1, user_api="blas"):
            if args.command == "simulate":
                return _cmd_simulate(args)
            if args.command == "test":
                return _cmd_test(args)
            if args.command == "multi-test":
                return _cmd_multi_test(args)
            if args.command == "level-study":
                return _cmd_study(args, level_study)
            if args.command == "power-study":
                return _cmd_study(args, power_study)
            if args.command == "reproduce":
                return _cmd_reproduce(args)
            raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
