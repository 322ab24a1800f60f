"""Command-line entry point: ``run``, ``evaluate`` and ``aggregate``.

Exit codes: 0 success, 1 validation error, 2 runtime fault.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError
from .harness import aggregate, evaluate_stack, parse_config, run_experiment
from .tmm import SpectrumGrid

EXIT_OK, EXIT_INVALID, EXIT_FAULT = 0, 1, 2


def _seeds(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbomix", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="no per-generation progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=_seeds, help="seed or comma-separated seeds")
    p.add_argument("--budget", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--output")
    p.add_argument("--threads", type=int)

    p = sub.add_parser("evaluate", help="reflectance of a stack file")
    p.add_argument("stackfile")
    p.add_argument("--lmin", type=float, default=300.0)
    p.add_argument("--lmax", type=float, default=500.0)
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--spectrum", help="spectrum CSV path (default: <stackfile>.spectrum.csv)")

    p = sub.add_parser("aggregate", help="rebuild aggregate.csv from per-seed histories")
    p.add_argument("directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            config = parse_config(args.config, {
                "seeds": args.seed, "budget": args.budget, "population": args.population,
                "output": args.output, "threads": args.threads})
            artifacts = run_experiment(config, progress=None if args.quiet else sys.stderr)
            print(f"wrote {artifacts.aggregate}")
            for sr in artifacts.seeds:
                print(f"seed {sr.seed}\tbest_cost={sr.result.best_cost!r}"
                      f"\tmean_reflectance={sr.spectrum.mean():.6f}")
        elif args.command == "evaluate":
            grid = SpectrumGrid(args.lmin, args.lmax, args.samples)
            spectrum = args.spectrum or str(Path(args.stackfile).with_suffix(".spectrum.csv"))
            ev = evaluate_stack(args.stackfile, grid, spectrum)
            print(ev.summary_line())
        else:
            print(f"wrote {aggregate(args.directory)}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime fault
        print(f"fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
