"""Experiment driver: configuration validation, dataset x method execution,
latency measurement, and report emission.

Reports are JSON documents: {"config": ..., "per_instance": [record, ...],
"summary": {method: aggregates}, "failures": [...]}. A failing instance is
recorded under "failures" and never corrupts the rest of the run.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from importlib import resources

from . import metrics
from .backend import Backend, build_synthetic, connect_remote, load_spec
from .context import TaskTemplate, load_template, render_prompt, segment
from .decoding import DecodeConfig, decode
from .records import TASKS, DatasetInstance, GenerationRecord, load_dataset
from .scoring import MixWeights

ENDPOINT_ENV = "FECS_ENDPOINT"

_CONFIG_KEYS = {"task", "template", "backend", "defaults", "methods"}
_DEFAULT_KEYS = {"max_new_tokens", "stop_on_eos", "stop_on_newline", "seed", "k"}
_METHOD_KEYS = {
    "name",
    "strategy",
    "k",
    "alpha",
    "beta",
    "nucleus_p",
    "beam_width",
    "max_new_tokens",
    "stop_on_eos",
    "stop_on_newline",
    "seed",
}
_BACKEND_KEYS = {"kind", "spec", "endpoint", "timeout"}


class HarnessError(RuntimeError):
    """Configuration or dataset problem; maps to exit code 1."""


def validate_config(path: str) -> tuple[dict | None, list[str]]:
    """Parse and check an experiment config; returns (normalized, errors)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    except json.JSONDecodeError as exc:
        return None, [f"config is not valid JSON: {exc}"]
    errors: list[str] = []
    if not isinstance(doc, dict):
        return None, ["config must be a JSON object"]
    for key in doc:
        if key not in _CONFIG_KEYS:
            errors.append(f"unknown config key {key!r}")
    task = doc.get("task", "summarization")
    if task not in TASKS:
        errors.append(f"unknown task {task!r}")
    defaults = doc.get("defaults", {})
    if not isinstance(defaults, dict):
        errors.append("defaults must be an object")
        defaults = {}
    for key in defaults:
        if key not in _DEFAULT_KEYS:
            errors.append(f"unknown defaults key {key!r}")
    # Few-shot runs stop at the end of the response line; dialogue responses
    # get a shorter budget than summaries.
    task_defaults = {
        "max_new_tokens": 128 if task == "summarization" else 64,
        "stop_on_newline": True,
    }
    defaults = {**task_defaults, **defaults}
    backend_cfg = doc.get("backend", {"kind": "synthetic"})
    if not isinstance(backend_cfg, dict):
        errors.append("backend must be an object")
        backend_cfg = {"kind": "synthetic"}
    for key in backend_cfg:
        if key not in _BACKEND_KEYS:
            errors.append(f"unknown backend key {key!r}")
    if backend_cfg.get("kind", "synthetic") not in ("synthetic", "remote"):
        errors.append(f"backend kind must be synthetic or remote, got {backend_cfg.get('kind')!r}")
    methods_doc = doc.get("methods")
    if not isinstance(methods_doc, list) or not methods_doc:
        errors.append("config must declare a non-empty methods list")
        methods_doc = []
    methods = []
    names = set()
    for i, mdoc in enumerate(methods_doc):
        if not isinstance(mdoc, dict):
            errors.append(f"methods[{i}] must be an object")
            continue
        for key in mdoc:
            if key not in _METHOD_KEYS:
                errors.append(f"methods[{i}]: unknown key {key!r}")
        strategy = mdoc.get("strategy")
        if strategy is None:
            errors.append(f"methods[{i}]: missing strategy")
            continue
        name = mdoc.get("name", strategy)
        if name in names:
            errors.append(f"methods[{i}]: duplicate method name {name!r}")
        names.add(name)
        merged = {**defaults, **mdoc, "name": name}
        try:
            cfg = _decode_config_from(merged)
            for problem in cfg.validate():
                errors.append(f"method {name!r}: {problem}")
        except (TypeError, ValueError) as exc:
            errors.append(f"method {name!r}: {exc}")
            continue
        methods.append({"name": name, "config": cfg})
    if errors:
        return None, errors
    normalized = {
        "task": task,
        "template": doc.get("template", task),
        "backend": {"kind": backend_cfg.get("kind", "synthetic"), **backend_cfg},
        "defaults": defaults,
        "methods": methods,
    }
    return normalized, []


def _decode_config_from(doc: dict) -> DecodeConfig:
    return DecodeConfig(
        strategy=doc["strategy"],
        k=int(doc.get("k", 4)),
        weights=MixWeights(float(doc.get("alpha", 0.0)), float(doc.get("beta", 0.0))),
        nucleus_p=float(doc.get("nucleus_p", 0.95)),
        beam_width=int(doc.get("beam_width", 4)),
        max_new_tokens=int(doc.get("max_new_tokens", 128)),
        stop_on_eos=bool(doc.get("stop_on_eos", True)),
        stop_on_newline=bool(doc.get("stop_on_newline", False)),
        seed=int(doc.get("seed", 0)),
    )


def resolve_template(spec: str) -> TaskTemplate:
    """A template is either a packaged name (summarization, dialogue) or a
    path to a template JSON file."""
    if spec in TASKS:
        ref = resources.files("fecs") / "templates" / f"{spec}.json"
        return TaskTemplate.from_dict(json.loads(ref.read_text(encoding="utf-8")))
    return load_template(spec)


def build_backend(
    backend_cfg: dict,
    backend_kind: str | None = None,
    endpoint: str | None = None,
    spec_path: str | None = None,
) -> Backend:
    """Construct the backend from config, with CLI overrides taking priority.

    Remote endpoints fall back to the FECS_ENDPOINT environment variable.
    """
    kind = backend_kind or backend_cfg.get("kind", "synthetic")
    if kind == "synthetic":
        path = spec_path or backend_cfg.get("spec")
        if not path:
            raise HarnessError("synthetic backend requires a model spec file (--spec)")
        try:
            return build_synthetic(load_spec(path))
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise HarnessError(f"cannot load synthetic spec {path}: {exc}") from exc
    if kind == "remote":
        url = endpoint or backend_cfg.get("endpoint") or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise HarnessError(
                f"remote backend requires --endpoint or the {ENDPOINT_ENV} environment variable"
            )
        return connect_remote(url, timeout=float(backend_cfg.get("timeout", 30.0)))
    raise HarnessError(f"unknown backend kind {kind!r}")


def derive_seed(base: int, method: str, instance_id: str) -> int:
    """Stable per-decode seed so records are independent of execution order."""
    digest = hashlib.blake2b(
        f"{base}:{method}:{instance_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def decode_instance(
    instance: DatasetInstance,
    method_name: str,
    cfg: DecodeConfig,
    template: TaskTemplate,
    backend: Backend,
    base_seed: int,
) -> GenerationRecord:
    """Render, segment, decode, and measure one (instance, method) pair."""
    text, span = render_prompt(template, instance.source, instance.history)
    seq = segment(text, span, backend)
    cfg = replace(cfg, seed=derive_seed(base_seed, method_name, instance.id))
    t0 = time.perf_counter()
    tokens, trace = decode(seq, cfg, backend)
    decode_seconds = time.perf_counter() - t0
    output_text = backend.detokenize(tokens) if tokens else ""
    snapshot = asdict(cfg)
    snapshot["task"] = instance.task
    snapshot["method"] = method_name
    return GenerationRecord(
        instance_id=instance.id,
        method=method_name,
        config=snapshot,
        output_text=output_text,
        output_tokens=tuple(tokens),
        diversity=metrics.diversity_of_text(output_text),
        decode_seconds=decode_seconds,
        truncated=trace.truncated,
    )


def run_experiment(
    config_path: str,
    dataset_path: str,
    out_path: str,
    methods: list[str] | None = None,
    seed: int | None = None,
    backend_kind: str | None = None,
    endpoint: str | None = None,
    spec_path: str | None = None,
    parallel: int = 1,
    external_path: str | None = None,
) -> dict:
    """Decode every (instance, method) pair and write the metrics report."""
    config, errors = validate_config(config_path)
    if errors:
        raise HarnessError("invalid config:\n  " + "\n  ".join(errors))
    try:
        instances = load_dataset(dataset_path)
    except (OSError, ValueError) as exc:
        raise HarnessError(f"cannot load dataset: {exc}") from exc
    for inst in instances:
        if inst.task != config["task"]:
            raise HarnessError(
                f"instance {inst.id} has task {inst.task!r} but the config is for {config['task']!r}"
            )
    selected = config["methods"]
    if methods:
        by_name = {m["name"]: m for m in selected}
        missing = [name for name in methods if name not in by_name]
        if missing:
            raise HarnessError(f"unknown method names {missing}; config has {sorted(by_name)}")
        selected = [by_name[name] for name in methods]
    template = resolve_template(config["template"])
    backend = build_backend(config["backend"], backend_kind, endpoint, spec_path)
    base_seed = seed if seed is not None else int(config["defaults"].get("seed", 0))
    records: list[GenerationRecord] = []
    failures: list[dict] = []
    for method in selected:
        jobs = [(inst, method["name"], method["config"]) for inst in instances]
        if parallel > 1:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                futures = [
                    pool.submit(
                        decode_instance, inst, name, cfg, template, backend, base_seed
                    )
                    for inst, name, cfg in jobs
                ]
                outcomes = []
                for (inst, name, _), fut in zip(jobs, futures):
                    try:
                        outcomes.append(fut.result())
                    except Exception as exc:
                        failures.append(
                            {"instance_id": inst.id, "method": name, "error": str(exc)}
                        )
                records.extend(outcomes)
        else:
            for inst, name, cfg in jobs:
                try:
                    records.append(
                        decode_instance(inst, name, cfg, template, backend, base_seed)
                    )
                except Exception as exc:
                    failures.append(
                        {"instance_id": inst.id, "method": name, "error": str(exc)}
                    )
    if external_path:
        merge_external_scores(records, external_path)
    if not records:
        raise HarnessError("every decode failed; no report to write")
    report = {
        "config": _config_snapshot(config),
        "per_instance": [rec.to_dict() for rec in records],
        "summary": metrics.aggregate(records),
        "failures": failures,
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return report


def _config_snapshot(config: dict) -> dict:
    return {
        "task": config["task"],
        "template": config["template"],
        "backend": config["backend"],
        "defaults": config["defaults"],
        "methods": [
            {"name": m["name"], **asdict(m["config"])} for m in config["methods"]
        ],
    }


def read_report(path: str) -> tuple[dict, list[GenerationRecord]]:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    records = [GenerationRecord.from_dict(doc) for doc in report["per_instance"]]
    return report, records


def merge_external_scores(records: list[GenerationRecord], sidecar_path: str) -> int:
    """Merge externally computed per-instance scores (JSONL of
    {"id", "method"?, "scores": {...}}) into matching records."""
    merged = 0
    with open(sidecar_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                instance_id = str(doc["id"])
                scores = {k: float(v) for k, v in doc["scores"].items()}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise HarnessError(f"{sidecar_path}:{lineno}: bad sidecar line: {exc}") from exc
            method = doc.get("method")
            for rec in records:
                if rec.instance_id == instance_id and (method is None or rec.method == method):
                    rec.external_scores.update(scores)
                    merged += 1
    return merged


def measure_latency(
    config_path: str,
    dataset_path: str,
    n: int,
    out_path: str | None = None,
    repetitions: int = 1,
    backend_kind: str | None = None,
    endpoint: str | None = None,
    spec_path: str | None = None,
    seed: int | None = None,
) -> dict:
    """Mean wall-clock decode seconds per instance, per method.

    Timing covers the decode loop only; one untimed warmup decode runs per
    method, and methods are benchmarked one after another, never interleaved.
    """
    if n < 1:
        raise HarnessError(f"benchmark sample size must be >= 1, got {n}")
    if repetitions < 1:
        raise HarnessError(f"repetitions must be >= 1, got {repetitions}")
    config, errors = validate_config(config_path)
    if errors:
        raise HarnessError("invalid config:\n  " + "\n  ".join(errors))
    instances = load_dataset(dataset_path)
    sample = [instances[i % len(instances)] for i in range(n)]
    template = resolve_template(config["template"])
    backend = build_backend(config["backend"], backend_kind, endpoint, spec_path)
    base_seed = seed if seed is not None else int(config["defaults"].get("seed", 0))
    per_method: dict[str, dict] = {}
    for method in config["methods"]:
        name, cfg = method["name"], method["config"]
        decode_instance(sample[0], name, cfg, template, backend, base_seed)  # warmup
        times = []
        for _ in range(repetitions):
            for inst in sample:
                rec = decode_instance(inst, name, cfg, template, backend, base_seed)
                times.append(rec.decode_seconds)
        per_method[name] = {
            "mean_seconds": sum(times) / len(times),
            "total_seconds": sum(times),
            "decodes": len(times),
        }
    ratios = {}
    names = list(per_method)
    for a in names:
        for b in names:
            if a != b:
                denom = per_method[b]["mean_seconds"]
                if denom > 0:
                    ratios[f"{a}_vs_{b}"] = per_method[a]["mean_seconds"] / denom
    result = {"n": n, "repetitions": repetitions, "per_method": per_method, "ratios": ratios}
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
    return result


def compute_metrics_file(
    in_path: str, out_path: str, external_path: str | None = None
) -> dict:
    """Recompute diversity for a JSONL of generations and aggregate.

    Accepts full GenerationRecord lines or minimal
    {"id"/"instance_id", "method", "text"/"output_text"} lines.
    """
    records = []
    with open(in_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                instance_id = str(doc.get("instance_id", doc.get("id")))
                method = str(doc.get("method", "unknown"))
                text = doc.get("output_text", doc.get("text", ""))
            except (json.JSONDecodeError, TypeError) as exc:
                raise HarnessError(f"{in_path}:{lineno}: bad generations line: {exc}") from exc
            records.append(
                GenerationRecord(
                    instance_id=instance_id,
                    method=method,
                    config=doc.get("config", {}),
                    output_text=text,
                    output_tokens=tuple(doc.get("output_tokens", ())),
                    diversity=metrics.diversity_of_text(text),
                    decode_seconds=float(doc.get("decode_seconds", 0.0)),
                    truncated=bool(doc.get("truncated", False)),
                    external_scores=dict(doc.get("external_scores", {})),
                )
            )
    if not records:
        raise HarnessError(f"{in_path}: no generations found")
    if external_path:
        merge_external_scores(records, external_path)
    report = {
        "per_instance": [rec.to_dict() for rec in records],
        "summary": metrics.aggregate(records),
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return report
