"""Command-line harness: ``run``, ``compare``, ``oracle`` and ``kappa-trace``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from .bo import run
from .config import FAMILIES, ConfigError, RunConfig, config_from_dict, load_config
from .hamiltonian import build_hamiltonian, ground_energy
from .records import (
    TRACE_COLUMNS,
    RecordError,
    RunRecord,
    compare_records,
    kappa_trace_rows,
    load_record,
    load_record_dir,
    rows_to_csv,
    save_record,
)

WORKERS_ENV = "PEDT_VQE_WORKERS"
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("pedt_vqe")


def _run_one(args) -> RunRecord:
    config_dict, seed, oracle = args
    return run(config_from_dict(config_dict), seed, oracle=oracle)


def execute(config: RunConfig, seeds: Sequence[int], workers: int = 1) -> List[RunRecord]:
    """Run every seed; results come back in seed order regardless of ``workers``."""
    hs = config.hamiltonian
    oracle = ground_energy(build_hamiltonian(hs.family, hs.n, hs.j, hs.h)).ground_energy
    jobs = [(config.to_dict(), s, oracle) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))


def _workers(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
    return 1


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seeds = [s + args.seed_offset for s in config.seeds]
    out = Path(args.out)
    status = EXIT_OK
    for record in execute(config, seeds, _workers(args.workers)):
        path = save_record(record, out)
        rel = record.relative_error
        final = "n/a" if record.final_energy is None else f"{record.final_energy:.6f}"
        rel_text = "n/a" if rel is None else f"{rel:.4%}"
        print(
            f"{record.variant} seed={record.seed} status={record.status} "
            f"iterations={len(record.entries)} final={final} "
            f"oracle={record.oracle_energy:.6f} rel_err={rel_text} "
            f"kappa0={len(record.kappa_zero_iterations)} -> {path}"
        )
        if record.status != "complete":
            print(f"  error: {record.error}", file=sys.stderr)
            status = EXIT_FAILURE
    return status


def cmd_compare(args) -> int:
    try:
        records, names = load_record_dir(args.record_dir)
    except RecordError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILURE
    variants = [v for v in args.variants.split(",") if v] if args.variants else None
    try:
        report = compare_records(records, variants, names)
    except ValueError as exc:
        print(f"compare failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    out = Path(args.out) if args.out else Path(args.record_dir) / "comparison"
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.csv").write_text(report.to_csv())
    (out / "comparison.json").write_text(report.to_json() + "\n")
    for name, s in sorted(report.variants.items()):
        final = "n/a" if s.final_mean is None else f"{s.final_mean:.6f} +/- {s.final_std:.6f}"
        print(
            f"{name}: seeds={len(s.seeds)} final={final} "
            f"kappa0_episodes={s.kappa_zero_episodes}"
        )
    print(f"wrote {out / 'comparison.csv'} and {out / 'comparison.json'}")
    return EXIT_OK


def parse_hamiltonian_spec(spec: str) -> dict:
    """Accept a config file path, an inline JSON/YAML mapping, or ``k=v,k=v``."""
    path = Path(spec)
    if path.is_file():
        data = yaml.safe_load(path.read_text()) or {}
        data = data.get("hamiltonian", data)
    elif "=" in spec and not spec.lstrip().startswith("{"):
        data = {}
        for part in spec.split(","):
            key, _, value = part.partition("=")
            data[key.strip()] = yaml.safe_load(value.strip())
    else:
        data = yaml.safe_load(spec)
    if not isinstance(data, dict):
        raise ConfigError("hamiltonian", f"could not read a mapping from {spec!r}")
    return data


def cmd_oracle(args) -> int:
    try:
        data = parse_hamiltonian_spec(args.spec)
        cfg = config_from_dict({"hamiltonian": data})
    except (ConfigError, yaml.YAMLError) as exc:
        print(f"invalid Hamiltonian spec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    hs = cfg.hamiltonian
    result = ground_energy(build_hamiltonian(hs.family, hs.n, hs.j, hs.h), method=args.method)
    print(json.dumps({"ground_energy": result.ground_energy}))
    return EXIT_OK


def cmd_kappa_trace(args) -> int:
    try:
        record = load_record(args.record)
    except RecordError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    text = rows_to_csv(kappa_trace_rows(record), TRACE_COLUMNS)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pedt-vqe",
        description="Confident-region BO for VQE with EMICoRe and PEDT thresholds.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every seed of a config and write JSON records")
    p.add_argument("config")
    p.add_argument("--out", default="records")
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help=f"default: ${WORKERS_ENV} or 1")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="aggregate records across seeds per variant")
    p.add_argument("record_dir")
    p.add_argument("--variants", default=None, help="comma-separated, e.g. emicore,pedt")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact ground energy of a Hamiltonian spec")
    p.add_argument("spec", help=f"config path, JSON mapping, or family=...,n=...; families {FAMILIES}")
    p.add_argument("--method", choices=("auto", "dense", "iterative"), default="auto")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("kappa-trace", help="emit the kappa trace of one record as CSV")
    p.add_argument("record")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_kappa_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
