"""``factomp run`` / ``factomp summarize``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench

EXIT_CONFIG = 2
EXIT_IO = 3


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factomp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte-Carlo comparison")
    run.add_argument("--config", help="JSON experiment spec (flags override it)")
    run.add_argument("--algos", type=_csv_list)
    run.add_argument("--grid-sizes", type=_int_list)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, dest="base_seed")
    run.add_argument("--noise-sigma", type=float)
    run.add_argument("--out", dest="out_dir")
    run.add_argument("--svg", action="store_true", default=None)
    run.add_argument("--parallel", action="store_true", default=None,
                     help="fan trials over threads; timing columns are zeroed")

    summ = sub.add_parser("summarize", help="aggregate a raw CSV")
    summ.add_argument("--in", dest="inp", required=True)
    summ.add_argument("--out", required=True)
    return parser


def _spec_from_args(args) -> bench.ExperimentSpec:
    spec = bench.ExperimentSpec.load(args.config) if args.config else bench.ExperimentSpec()
    overrides = {"algorithms": args.algos, "grid_sizes": args.grid_sizes, "trials": args.trials,
                 "base_seed": args.base_seed, "noise_sigma": args.noise_sigma,
                 "out_dir": args.out_dir, "svg": args.svg, "parallel": args.parallel}
    for name, value in overrides.items():
        if value is not None:
            setattr(spec, name, value)
    return spec.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            spec = _spec_from_args(args)
            records = bench.run_experiment(spec)
            summary = bench.summarize(records)
            paths = bench.emit_outputs(records, summary, spec)
            for row in summary:
                print(f"{row['algo']:>5}  N*={row['n_star']:<4} miss_rate={row['miss_rate']:.4f} "
                      f"± {row['miss_ci95']:.4f}  median={row['time_median_ns'] / 1e6:.3f} ms")
            print(f"wrote {', '.join(str(p) for p in paths.values())}")
        else:
            records = bench.read_raw_csv(args.inp)
            bench.write_summary_csv(bench.summarize(records), args.out)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        # ValueError here comes from malformed input files
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
