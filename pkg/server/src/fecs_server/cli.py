"""Model-server command line.

Subcommands:
  serve       run the HTTP server for a model
  selftest    run the start-up probes and exit 0/1
  train-toy   train the built-in toy checkpoint from scratch
"""

from __future__ import annotations

import argparse
import sys

from .service import ServerConfig, load_service


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fecs-server", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_args(p):
        p.add_argument("--model", required=True, help="toy checkpoint dir or transformers id/path")
        p.add_argument("--max-context", type=int, default=0)
        p.add_argument("--device", default="cpu")
        p.add_argument("--hidden-norm", choices=["post", "pre"], default="post")
        p.add_argument("--top-m-default", type=int, default=512)

    serve = sub.add_parser("serve", help="serve a model over the wire protocol")
    add_model_args(serve)
    serve.add_argument("--port", type=int, default=8350)
    serve.add_argument("--host", default="127.0.0.1")

    selftest = sub.add_parser("selftest", help="run conformance probes")
    add_model_args(selftest)

    train = sub.add_parser("train-toy", help="train the built-in toy model")
    train.add_argument("--out", required=True)
    train.add_argument("--steps", type=int, default=None, help="default reproduces the shipped checkpoint")
    train.add_argument("--seed", type=int, default=None)
    return parser


def config_from(args) -> ServerConfig:
    return ServerConfig(
        model=args.model,
        device=args.device,
        top_m_default=args.top_m_default,
        max_context=args.max_context,
        port=getattr(args, "port", 8350),
        host=getattr(args, "host", "127.0.0.1"),
        hidden_norm=args.hidden_norm,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train-toy":
        from dataclasses import replace

        from .checkpoint import DEFAULT_MODEL_CFG, DEFAULT_TRAIN_CFG
        from .toylm import ToyConfig, save_toy_model, train_toy_model
        from .vocab import WordTokenizer

        tok = WordTokenizer()
        train_cfg = DEFAULT_TRAIN_CFG
        if args.steps is not None:
            train_cfg = replace(train_cfg, steps=args.steps)
        if args.seed is not None:
            train_cfg = replace(train_cfg, seed=args.seed)
        model = train_toy_model(
            tok,
            model_cfg=ToyConfig(vocab_size=tok.vocab_size, **DEFAULT_MODEL_CFG),
            train_cfg=train_cfg,
        )
        save_toy_model(model, tok, args.out)
        print(f"saved toy checkpoint to {args.out}")
        return 0

    cfg = config_from(args)
    try:
        service = load_service(cfg)
    except Exception as exc:
        print(f"cannot load model {cfg.model!r}: {exc}", file=sys.stderr)
        return 1

    if args.command == "selftest":
        from .selftest import first_failure, run_selftest

        results = run_selftest(service)
        for result in results:
            print(result.line())
        failure = first_failure(results)
        if failure is not None:
            print(f"selftest failed at probe {failure.name}", file=sys.stderr)
            return 1
        return 0

    if args.command == "serve":
        import uvicorn

        from .app import create_app
        from .selftest import first_failure, run_selftest

        results = run_selftest(service)
        for result in results:
            print(result.line())
        failure = first_failure(results)
        if failure is not None:
            print(f"refusing to serve: probe {failure.name} failed", file=sys.stderr)
            return 1
        app = create_app(service, cfg)
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
