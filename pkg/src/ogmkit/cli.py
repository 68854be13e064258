"""Command-line front end.

Subcommands: ``run`` (one experiment from a config file), ``table2`` (the
dampening/rate table), ``certify`` (re-check a serialized trace), ``bench``
(the full benchmark suite).  Exit codes: 0 success, 2 configuration error,
3 solver/problem mismatch, 4 certificate failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import CertificateError, ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISMATCH = 3
EXIT_CERT = 4
EXIT_IO = 5


def _cmd_run(args) -> int:
    from .harness import load_config, run_experiment

    config = load_config(args.config)
    record, paths = run_experiment(config, out_dir=args.out, seed=args.seed)
    summary = record.summary
    print(f"solver {summary['solver']} on {summary['problem']['kind']} "
          f"(seed {summary['problem']['seed']}): "
          f"{summary['iterations']} iterations, "
          f"{summary['oracle_calls']} oracle calls")
    if summary.get("iters_to_threshold") is not None:
        print(f"reached eps_rel={summary['eps_rel']:g} at iteration "
              f"{summary['iters_to_threshold']}")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_table2(args) -> int:
    from .harness import format_table2, table2, write_table2_csv

    q_list = [float(q) for q in args.ql] if args.ql else None
    t = table2(q_list=q_list)
    print(format_table2(t))
    if args.out_csv:
        write_table2_csv(t, args.out_csv)
        print(f"csv: {args.out_csv}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    from .harness import certify_files, load_config

    summary_path = args.summary
    if summary_path is None:
        config = load_config(args.config)
        if config.summary_path is None:
            raise ConfigError("config declares no summary output; "
                              "pass --summary explicitly")
        summary_path = config.summary_path
    report = certify_files(args.trace, summary_path, tol=args.tol)
    print(report.format())
    if not report.passed:
        raise CertificateError("certificate checks failed")
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .harness import bench

    summary = bench(args.scale, args.out, seed=args.seed)
    for kind, labels in sorted(summary.items()):
        print(f"{kind}: iterations to threshold")
        for label, iters in sorted(labels.items()):
            print(f"  {label}: {iters}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ogmkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run one experiment from a config file")
    runp.add_argument("--config", required=True)
    runp.add_argument("--seed", type=int, default=None,
                      help="override the problem seed")
    runp.add_argument("--out", default=None,
                      help="redirect output files into this directory")
    runp.set_defaults(fn=_cmd_run)

    t2p = sub.add_parser("table2", help="dampening limits and rate ratios")
    t2p.add_argument("--ql", nargs="*", default=None,
                     help="lower condition numbers (default: built-in grid)")
    t2p.add_argument("--out-csv", default=None)
    t2p.set_defaults(fn=_cmd_table2)

    cp = sub.add_parser("certify", help="re-check certificates of a trace")
    cp.add_argument("--trace", required=True)
    cp.add_argument("--config", default=None)
    cp.add_argument("--summary", default=None,
                    help="summary JSON (default: from the config's outputs)")
    cp.add_argument("--tol", type=float, default=1e-9)
    cp.set_defaults(fn=_cmd_certify)

    bp = sub.add_parser("bench", help="run the benchmark suite")
    bp.add_argument("--scale", choices=("desk", "paper"), default="desk")
    bp.add_argument("--out", default="bench_out")
    bp.add_argument("--seed", type=int, default=0)
    bp.set_defaults(fn=_cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        msg = str(exc)
        print(f"config error: {msg}", file=sys.stderr)
        if "cannot run on composite problem" in msg:
            return EXIT_MISMATCH
        return EXIT_CONFIG
    except CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
