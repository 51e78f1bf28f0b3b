#!/usr/bin/env python3
"""Sweep the degeneration-penalty weight for contrastive search against the
fixed fidelity-enriched operating point and print the comparison table
(diversity per cell, mean decode seconds per method).

Usage:
    python scripts/alpha_sweep.py --out-dir sweep_out [--seed 7] [--instances 32]
"""

import argparse
import json
from pathlib import Path

from fecs.backend.synthetic import random_synthetic_spec, save_spec
from fecs.fixtures import make_word_dataset, write_dataset
from fecs.harness import run_experiment

ALPHAS = (0.6, 0.4, 0.2, 0.0)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--instances", type=int, default=32)
    parser.add_argument("--max-new-tokens", type=int, default=48)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = random_synthetic_spec(args.seed, vocab_size=16, hidden_dim=8, context_order=1)
    save_spec(spec, str(out / "model.json"))
    write_dataset(
        make_word_dataset(spec, args.instances, seed=args.seed + 1, min_words=10, max_words=20),
        str(out / "dataset.jsonl"),
    )
    methods = [
        {"name": f"cs_a{a}", "strategy": "contrastive", "k": 4, "alpha": a} for a in ALPHAS
    ]
    methods.append({"name": "fecs", "strategy": "fecs", "k": 4, "alpha": 0.3, "beta": 0.3})
    config = {
        "task": "summarization",
        "template": "summarization",
        "backend": {"kind": "synthetic", "spec": str(out / "model.json")},
        "defaults": {"max_new_tokens": args.max_new_tokens, "stop_on_eos": False, "seed": 0},
        "methods": methods,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    report = run_experiment(
        str(config_path), str(out / "dataset.jsonl"), str(out / "report.json")
    )
    header = f"{'method':<12}{'rep2':>8}{'rep3':>8}{'rep4':>8}{'diversity':>11}{'sec/inst':>10}"
    print(header)
    print("-" * len(header))
    for method in [m["name"] for m in methods]:
        row = report["summary"][method]
        print(
            f"{method:<12}{row['rep2']:>8.2f}{row['rep3']:>8.2f}{row['rep4']:>8.2f}"
            f"{row['reported_diversity']:>11.2f}{row['mean_decode_seconds']:>10.4f}"
        )
    print(f"\nfull report: {out}/report.json")


if __name__ == "__main__":
    main()
