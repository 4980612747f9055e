"""``dsnld-sim`` command line entry point.

Exit codes: 0 all tolerances pass, 1 a tolerance failed, 2 config error,
3 IO error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment
from .report import write_outputs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
OUTPUT_ENV = "DSNLD_OUTPUT_DIR"

log = logging.getLogger("dsnld")


def build_parser():
    p = argparse.ArgumentParser(prog="dsnld-sim", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("config", help="TOML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scalar config field, e.g. --set time.T=0.5")
    p.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    p.add_argument("--threads", type=int, default=1, help="cap on the omega worker pool")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_command(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.experiment != args.experiment:
        print(f"config error: config declares experiment '{cfg.experiment}', "
              f"subcommand is '{args.experiment}'", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        print(f"{args.config}: valid {cfg.experiment} config")
        return EXIT_OK

    out_dir = args.out or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    start = time.perf_counter()
    try:
        report, snapshots = run_experiment(cfg, threads=max(1, args.threads))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.1f s", cfg.experiment, time.perf_counter() - start)

    try:
        manifest = write_outputs(report, snapshots, out_dir)
    except OSError as err:
        print(f"io error: {err} (manifest may be partial in {out_dir})", file=sys.stderr)
        return EXIT_IO

    for m in report.metrics:
        mark = "PASS" if m.passed else "FAIL"
        where = "" if m.t is None else f" t={m.t:g}"
        print(f"{mark} {m.name}{where}: {m.value:.6g} {m.op} {m.tolerance:.6g}")
    print(f"wrote {len(manifest['files'])} files to {out_dir}")
    return EXIT_OK if report.passed else EXIT_FAIL


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
