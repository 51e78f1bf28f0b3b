"""Command-line driver.

Subcommands:
  run       decode a dataset with every configured method and write a report
  bench     per-method mean decode seconds over a dataset sample
  metrics   recompute diversity metrics for a generations JSONL
  validate  check an experiment config and print any problems

Exit codes: 0 success, 1 usage/config error, 2 backend error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .backend import BackendError
from .decoding import ConfigError
from .harness import (
    HarnessError,
    compute_metrics_file,
    measure_latency,
    run_experiment,
    validate_config,
)
from .metrics import write_summary_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fecs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment over a dataset")
    run.add_argument("--config", required=True)
    run.add_argument("--dataset", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--backend", choices=["synthetic", "remote"], default=None)
    run.add_argument("--endpoint", default=None, help="remote backend URL (or FECS_ENDPOINT)")
    run.add_argument("--spec", default=None, help="synthetic model spec file")
    run.add_argument("--methods", default=None, help="comma-separated method names to run")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--external", default=None, help="sidecar JSONL of external scores")

    bench = sub.add_parser("bench", help="measure per-method decoding latency")
    bench.add_argument("--config", required=True)
    bench.add_argument("--dataset", required=True)
    bench.add_argument("--n", type=int, required=True, help="sample size (instances)")
    bench.add_argument("--out", required=True)
    bench.add_argument("--repetitions", type=int, default=1)
    bench.add_argument("--backend", choices=["synthetic", "remote"], default=None)
    bench.add_argument("--endpoint", default=None)
    bench.add_argument("--spec", default=None)

    met = sub.add_parser("metrics", help="compute metrics for existing generations")
    met.add_argument("--in", dest="in_path", required=True)
    met.add_argument("--out", required=True)
    met.add_argument("--external", default=None)
    met.add_argument("--csv", default=None, help="also write the summary as CSV")

    val = sub.add_parser("validate", help="validate an experiment config")
    val.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            report = run_experiment(
                args.config,
                args.dataset,
                args.out,
                methods=args.methods.split(",") if args.methods else None,
                seed=args.seed,
                backend_kind=args.backend,
                endpoint=args.endpoint,
                spec_path=args.spec,
                parallel=args.parallel,
                external_path=args.external,
            )
            ok = len(report["per_instance"])
            failed = len(report["failures"])
            print(f"wrote {args.out}: {ok} records, {failed} failures")
            return 0
        if args.command == "bench":
            result = measure_latency(
                args.config,
                args.dataset,
                args.n,
                out_path=args.out,
                repetitions=args.repetitions,
                backend_kind=args.backend,
                endpoint=args.endpoint,
                spec_path=args.spec,
            )
            for name, row in result["per_method"].items():
                print(f"{name}: {row['mean_seconds']:.6f} s/instance")
            return 0
        if args.command == "metrics":
            report = compute_metrics_file(args.in_path, args.out, args.external)
            if args.csv:
                write_summary_csv(report["summary"], args.csv)
            print(f"wrote {args.out}: {len(report['per_instance'])} records")
            return 0
        if args.command == "validate":
            config, errors = validate_config(args.config)
            if errors:
                for err in errors:
                    print(f"error: {err}", file=sys.stderr)
                return 1
            methods = ", ".join(m["name"] for m in config["methods"])
            print(f"ok: task={config['task']} methods=[{methods}]")
            return 0
    except (HarnessError, ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
