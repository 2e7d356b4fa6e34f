"""Command-line front end.

    perfspec {bands,dispersion,floquet,trapped,all} --config CFG [--out DIR] [--threads N] [--seed N]
    perfspec export --bundle DIR --kind {band-diagram,dispersion,field-heatmap} [--out DIR] [--name FIELD]

Exit codes: 0 ok, 2 config/usage, 3 solver failure, 4 scientific invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .errors import ScientificInvariantError
from .pipeline import STAGES, Pipeline, StageFailure
from .results import PLOT_KINDS, export_plot_data, load_bundle, save_bundle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_SCIENCE = 4

log = logging.getLogger("perfspec")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfspec", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "all"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run the full pipeline")
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (default: outputs.directory from the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
        p.add_argument("--seed", type=int, default=None, help="reserved for randomized property tests")
    e = sub.add_parser("export", help="write plot-ready data from a saved bundle")
    e.add_argument("--bundle", required=True, help="directory written by a previous run")
    e.add_argument("--kind", required=True, choices=PLOT_KINDS)
    e.add_argument("--out", help="output directory (default: the bundle directory)")
    e.add_argument("--name", help="field name for field-heatmap (default: all fields)")
    return parser


def run(subcommand: str, config_path, out=None, threads: int = 1, seed: int | None = None) -> int:
    """Run one stage or the whole pipeline; returns the exit status."""
    try:
        cfg = load_config(config_path)
        if threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {threads}")
        out_dir = out or cfg.out_dir
        pipe = Pipeline(cfg, threads=threads, seed=seed)
        try:
            bundle = pipe.run(subcommand)
        except ScientificInvariantError as exc:
            save_bundle(pipe.bundle, out_dir)
            print(f"scientific failure: {exc}", file=sys.stderr)
            return EXIT_SCIENCE
        written = save_bundle(bundle, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in written:
        log.info("wrote %s", path)
    if pipe.violations:
        for v in pipe.violations:
            print(f"scientific failure: {v}", file=sys.stderr)
        return EXIT_SCIENCE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "export":
        try:
            bundle = load_bundle(args.bundle)
            for path in export_plot_data(bundle, args.kind, args.out or args.bundle, args.name):
                log.info("wrote %s", path)
        except (ConfigError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK
    return run(args.command, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":
    sys.exit(main())
