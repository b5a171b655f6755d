"""Command-line entry point.

    fdgsim run --config cfg.txt [--seed N] [--out DIR] [--quick]
    fdgsim ablation --config cfg.txt [--cell ID ...]
    fdgsim sensitivity --config cfg.txt [--cell ID ...]
    fdgsim export-task --config cfg.txt --out DIR
    fdgsim selftest

Exit status is 0 on success, 2 for configuration errors and 1 for any
other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import domains, experiments, selftest
from .config import RunConfig, load_config
from .errors import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _add_common(p: argparse.ArgumentParser, grid: bool = False):
    p.add_argument("--config", required=True, type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--out", type=Path, help="override output_dir")
    p.add_argument("--quick", action="store_true", help="10x fewer rounds and samples")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    if grid:
        p.add_argument("--cell", action="append", dest="cells", metavar="ID",
                       help="run only this grid cell (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdgsim", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="leave-one-domain-out run of one configuration"))
    _add_common(sub.add_parser("ablation", help="smoothing x budget grid"), grid=True)
    _add_common(sub.add_parser("sensitivity", help="epsilon and budget sweeps"), grid=True)
    exp = sub.add_parser("export-task", help="write the synthetic domains as text files")
    exp.add_argument("--config", required=True, type=Path)
    exp.add_argument("--seed", type=int)
    exp.add_argument("--out", required=True, type=Path)
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def _load(args) -> tuple[RunConfig, Path]:
    rc = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        rc = rc.with_seed(args.seed)
    if getattr(args, "quick", False):
        rc = rc.quick()
    return rc, args.out or rc.output_dir


def _report(paths: dict[str, Path]):
    import json

    summary = json.loads(paths["summary_json"].read_text())
    print(experiments.render_table(summary))
    for p in paths.values():
        print(f"wrote {p}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "selftest":
            return EXIT_OK if selftest.run() else EXIT_FAIL
        rc, out = _load(args)
        if args.command == "export-task":
            out.mkdir(parents=True, exist_ok=True)
            for ds in domains.generate_task(rc.task, rc.fed.master_seed):
                print(f"wrote {domains.save_dataset(ds, out / f'{ds.domain_id}.txt')}")
            return EXIT_OK
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        if args.command == "run":
            paths = experiments.run_single(rc, out, jobs=args.jobs)
        elif args.command == "ablation":
            paths = experiments.run_ablation(rc, out, jobs=args.jobs, only=args.cells)
        else:
            paths = experiments.run_sensitivity(rc, out, jobs=args.jobs, only=args.cells)
        _report(paths)
        return EXIT_OK
    except ConfigError as exc:
        print(f"fdgsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"fdgsim: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
