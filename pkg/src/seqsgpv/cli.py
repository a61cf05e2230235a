"""Command line front end: ``seqsgpv {sgpv,simulate,trajectory,reversals,calibrate}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .calibrate import find_min_wait
from .config import (ConfigError, DataError, Pool, RunSpec, config_hash, effective_config,
                     ingest_pool, parse_config)
from .oc import OCConfig, default_workers, reversal_analysis, simulate_oc, t1e_trajectory
from .regions import Interval, Region, sgpv
from .report import COLUMNS, OutputError, emit_csv, prepare_output_dir

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

log = logging.getLogger("seqsgpv")


def _float(text: str) -> float:
    return float(text.replace("−", "-"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqsgpv", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sgpv", help="SGPV of one interval against a region")
    sp.add_argument("--interval", nargs=2, type=_float, metavar=("LO", "HI"), required=True)
    sp.add_argument("--region", nargs=2, type=_float, metavar=("LO", "HI"), action="append",
                    required=True, help="one part of the region; repeat for unions; use inf/-inf")

    for name, text in (("simulate", "operating characteristics per effect"),
                       ("trajectory", "Type I error across caps N"),
                       ("reversals", "reversal probabilities across outcome lags"),
                       ("calibrate", "smallest wait time meeting a Type I error target")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--pool", type=Path, help="single-column outcome pool for bootstrap runs")
    return ap


def _sgpv_command(args) -> int:
    try:
        i = Interval(*args.interval)
        r = Region.of(*[tuple(p) for p in args.region])
        print(repr(sgpv(i, r)))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _metadata(spec: RunSpec, command: str, workers: int) -> dict:
    meta = {"subcommand": command, "config_hash": config_hash(spec), "master_seed": spec.seed,
            "workers": workers, "config": effective_config(spec)}
    if spec.model.kind == "bootstrap":
        meta["pool"] = {"path": spec.pool_path, **Pool(spec.model.pool).summary()}
    return meta


def _run(spec: RunSpec, command: str, workers: int, out: Path) -> Path:
    design, plan, model = spec.design, spec.plan, spec.model
    if command == "simulate":
        oc = simulate_oc(OCConfig(design, plan, model, spec.effects, spec.replicates, spec.seed, workers))
        rows = [dict(vars(e), design=oc.design, W=plan.W, S=plan.S, A=plan.A, N=plan.N, lag=model.lag)
                for e in oc.effects]
    elif command == "trajectory":
        t = spec.trajectory
        rows = t1e_trajectory(design, W_grid=t.W_grid, S_grid=t.S_grid, A_grid=t.A_grid,
                              N_grid=t.N_grid, replicates=spec.replicates, master_seed=spec.seed,
                              model=model, base_plan=plan, workers=workers)
    elif command == "reversals":
        rows = reversal_analysis(design, plan, spec.reversals.lags, replicates=spec.replicates,
                                 master_seed=spec.seed, model=model, workers=workers)
    else:
        c = spec.calibrate
        report = find_min_wait(design, S=plan.S, A=plan.A, N=plan.N, alpha_target=c.alpha_target,
                               W_grid=c.W_grid, replicates=spec.replicates, master_seed=spec.seed,
                               model=model, base_plan=plan, workers=workers)
        rows = [dict(vars(cell), design=report.design, S=report.S, A=report.A, N=report.N,
                     chosen=report.chosen is not None and cell.W == report.chosen.W)
                for cell in report.cells]
        if report.attainable:
            ch = report.chosen
            print(f"W={ch.W} type1_error={ch.type1_error!r} mc_se={ch.mc_se!r} avg_n={ch.avg_n!r}")
        else:
            print(f"not attainable: no W in the grid reaches alpha={c.alpha_target}")
    path = out / f"{command}.csv"
    return emit_csv(rows, COLUMNS[command], path, _metadata(spec, command, workers))


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "sgpv":
        return _sgpv_command(args)

    try:
        pool = ingest_pool(args.pool) if args.pool else None
        if pool is not None:
            s = pool.summary()
            log.info("pool %s: n=%d mean=%.6g sd=%.6g min=%.6g max=%.6g",
                     args.pool, s["count"], s["mean"], s["sd"], s["min"], s["max"])
        spec = parse_config(args.config, pool=pool)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        spec = replace(spec, seed=args.seed)
    section = {"trajectory": spec.trajectory, "reversals": spec.reversals,
               "calibrate": spec.calibrate}.get(args.command, True)
    if section is None:
        print(f"error: config has no '{args.command}' section", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers if args.workers is not None else spec.workers
    if workers is None:
        workers = default_workers()
    if workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG

    try:
        out = prepare_output_dir(args.out)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        path = _run(spec, args.command, workers, out)
    except (MemoryError, RuntimeError, OSError) as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
