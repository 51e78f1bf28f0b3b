#!/usr/bin/env python3
"""Generate a synthetic model spec, a matching word dataset, and a ready-made
experiment config so the CLI can run end-to-end offline.

Usage:
    python scripts/make_fixture.py --out-dir fixtures [--seed 42] [--instances 16]
"""

import argparse
import json
from pathlib import Path

from fecs.backend.synthetic import random_synthetic_spec, save_spec
from fecs.fixtures import make_word_dataset, write_dataset

FIVE_METHODS = [
    {"name": "greedy", "strategy": "greedy"},
    {"name": "beam", "strategy": "beam", "beam_width": 4},
    {"name": "nucleus", "strategy": "nucleus", "nucleus_p": 0.95},
    {"name": "contrastive", "strategy": "contrastive", "k": 4, "alpha": 0.6},
    {"name": "fecs", "strategy": "fecs", "k": 4, "alpha": 0.3, "beta": 0.3},
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--instances", type=int, default=16)
    parser.add_argument("--vocab-size", type=int, default=16)
    parser.add_argument("--hidden-dim", type=int, default=8)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = random_synthetic_spec(
        args.seed, vocab_size=args.vocab_size, hidden_dim=args.hidden_dim, context_order=1
    )
    save_spec(spec, str(out / "model.json"))
    dataset = make_word_dataset(spec, args.instances, seed=args.seed + 1)
    write_dataset(dataset, str(out / "dataset.jsonl"))
    config = {
        "task": "summarization",
        "template": "summarization",
        "backend": {"kind": "synthetic", "spec": str(out / "model.json")},
        "defaults": {"max_new_tokens": 32, "stop_on_eos": False, "seed": 0},
        "methods": FIVE_METHODS,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2))
    print(f"wrote {out}/model.json, {out}/dataset.jsonl, {out}/config.json")
    print(f"try: fecs run --config {out}/config.json --dataset {out}/dataset.jsonl --out report.json")


if __name__ == "__main__":
    main()
