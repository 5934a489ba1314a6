"""``polymer-lab <experiment> --config PATH [--seed S] [--out DIR] [--threads T] [--replicates R]``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigInvalid, PolymerLabError
from .config import EXPERIMENTS, load_config
from .runner import run_experiment

log = logging.getLogger("polymer_lab")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polymer-lab", description="Seeded half-space polymer experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, help="worker processes (default: POLYMER_LAB_THREADS or CPU count)")
    p.add_argument("--replicates", type=int, help="replicate count (overrides the config)")
    p.add_argument("--dump-env", nargs="*", type=int, metavar="R",
                   help="write env-<R>.hspe snapshots; without indices, every replicate")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigInvalid("experiment", f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        cfg = cfg.with_overrides(seed=args.seed, out=args.out, threads=args.threads, replicates=args.replicates)
        dump = None if args.dump_env is None else (args.dump_env or True)
        record = run_experiment(cfg, dump_env=dump)
    except ConfigInvalid as exc:
        print(f"polymer-lab: invalid config: {exc}", file=sys.stderr)
        return 2
    except PolymerLabError as exc:
        print(f"polymer-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return record.exit_status


if __name__ == "__main__":
    sys.exit(main())
