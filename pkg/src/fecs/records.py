"""Dataset instances and per-decode generation records, with their JSON forms.

Datasets are JSON-Lines: one instance per line with fields id, source, task,
and optionally history (speaker-tagged turns) and reference. Reports round-trip
through ``to_dict``/``from_dict`` without loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .metrics import DiversityReport

TASKS = ("summarization", "dialogue")


@dataclass(frozen=True)
class DatasetInstance:
    id: str
    source: str
    task: str
    history: tuple[str, ...] | None = None
    reference: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("instance id must be non-empty")
        if not self.source.strip():
            raise ValueError(f"instance {self.id}: source must be non-empty")
        if self.task not in TASKS:
            raise ValueError(f"instance {self.id}: unknown task {self.task!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetInstance":
        history = doc.get("history")
        return cls(
            id=str(doc["id"]),
            source=doc["source"],
            task=doc.get("task", "summarization"),
            history=tuple(history) if history else None,
            reference=doc.get("reference"),
        )

    def to_dict(self) -> dict:
        doc: dict = {"id": self.id, "source": self.source, "task": self.task}
        if self.history is not None:
            doc["history"] = list(self.history)
        if self.reference is not None:
            doc["reference"] = self.reference
        return doc


def load_dataset(path: str) -> list[DatasetInstance]:
    instances = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                inst = DatasetInstance.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dataset line: {exc}") from exc
            if inst.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            instances.append(inst)
    if not instances:
        raise ValueError(f"{path}: dataset is empty")
    return instances


@dataclass
class GenerationRecord:
    instance_id: str
    method: str
    config: dict
    output_text: str
    output_tokens: tuple[int, ...]
    diversity: DiversityReport
    decode_seconds: float
    truncated: bool = False
    external_scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.decode_seconds < 0:
            raise ValueError("decode_seconds must be >= 0")

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "method": self.method,
            "config": self.config,
            "output_text": self.output_text,
            "output_tokens": list(self.output_tokens),
            "diversity": self.diversity.to_dict(),
            "decode_seconds": self.decode_seconds,
            "truncated": self.truncated,
            "external_scores": self.external_scores,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GenerationRecord":
        return cls(
            instance_id=doc["instance_id"],
            method=doc["method"],
            config=doc["config"],
            output_text=doc["output_text"],
            output_tokens=tuple(doc["output_tokens"]),
            diversity=DiversityReport.from_dict(doc["diversity"]),
            decode_seconds=doc["decode_seconds"],
            truncated=doc.get("truncated", False),
            external_scores=dict(doc.get("external_scores", {})),
        )
