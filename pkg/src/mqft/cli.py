"""``mqft`` command line.

Exit codes: 0 success, 1 oracle check or fit failed, 2 config error,
3 I/O error, 4 too many trials aborted by the retry cap.
"""

import argparse
import logging
import sys

from .experiment import ConfigError, emit_records, load_config, parse_config, run_experiment, summary_text

log = logging.getLogger("mqft")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_ABORT = 0, 1, 2, 3, 4


def _common(parser):
    parser.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
    parser.add_argument("--out-dir", help="directory for output files")
    parser.add_argument("--workers", type=int, help="parallel worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="mqft", description="Measured QFT simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    _common(run)

    oracle = sub.add_parser("oracle-check", help="check circuit-form equivalence for n <= N")
    oracle.add_argument("--n", type=int, required=True)
    oracle.add_argument("--random-phases", type=int, default=20)
    _common(oracle)

    bounds = sub.add_parser("bounds", help="confidence bounds on the per-qubit error")
    bounds.add_argument("--kmax", type=int, required=True)
    bounds.add_argument("--nmax", type=int, required=True)
    bounds.add_argument("--kmin", type=int, required=True)
    bounds.add_argument("--nmin", type=int, required=True)
    bounds.add_argument("--trials", type=int, required=True)
    bounds.add_argument("--alpha", type=float, default=0.05)
    bounds.add_argument("--convention", default="cumulative")
    _common(bounds)
    return parser


def _config_from_args(args):
    overrides = {"master_seed": args.seed, "out_dir": args.out_dir, "workers": args.workers}
    if args.command == "run":
        return load_config(args.config, overrides)
    if args.command == "oracle-check":
        text = f"mode = oracle-check\nn_qubits = {args.n}\nn_random_phases = {args.random_phases}\n"
        if args.seed is None:
            overrides["master_seed"] = 0
        return parse_config(text, overrides)
    text = (
        f"mode = bounds\nk_max = {args.kmax}\nn_max = {args.nmax}\nk_min = {args.kmin}\n"
        f"n_min = {args.nmin}\nn_trials = {args.trials}\nalpha = {args.alpha}\n"
        f"convention = {args.convention}\n"
    )
    return parse_config(text, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = _config_from_args(args)
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("finished %s in %.2f s", summary.mode, summary.wall_time)

    if args.out_dir is not None or args.command == "run":
        try:
            for path in emit_records(summary):
                log.info("wrote %s", path)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    sys.stdout.write(summary_text(summary))

    if summary.records:
        fraction = summary.aborted / len(summary.records)
        if fraction > config["max_abort_fraction"]:
            print(f"{summary.aborted} of {len(summary.records)} trials hit the retry cap", file=sys.stderr)
            return EXIT_ABORT
    return EXIT_OK if summary.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
