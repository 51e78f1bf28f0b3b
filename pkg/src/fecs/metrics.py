"""Repetition and diversity metrics over generated text, plus experiment
aggregation.

Rep-n is the percentage of repeated n-grams: (1 - unique/total) * 100, and
diversity is the product over n = 2..4 of (1 - Rep-n/100), reported x100.
N-gram statistics are computed over whitespace-split words of the trimmed
text, not model tokens; the functions also accept pre-tokenized input so
alternative tokenizations can be compared.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

REPORT_TOL = 1e-9


@dataclass(frozen=True)
class DiversityReport:
    rep2: float
    rep3: float
    rep4: float
    diversity: float
    reported_diversity: float

    def __post_init__(self) -> None:
        for rep in (self.rep2, self.rep3, self.rep4):
            if not 0.0 <= rep <= 100.0:
                raise ValueError(f"rep value {rep} outside [0, 100]")
        expected = math.prod(1.0 - rep / 100.0 for rep in (self.rep2, self.rep3, self.rep4))
        if abs(self.diversity - expected) > REPORT_TOL:
            raise ValueError(f"diversity {self.diversity} != product {expected}")
        if abs(self.reported_diversity - 100.0 * self.diversity) > REPORT_TOL * 100.0:
            raise ValueError("reported_diversity must be 100 * diversity")

    @classmethod
    def from_reps(cls, rep2: float, rep3: float, rep4: float) -> "DiversityReport":
        div = math.prod(1.0 - rep / 100.0 for rep in (rep2, rep3, rep4))
        return cls(rep2=rep2, rep3=rep3, rep4=rep4, diversity=div, reported_diversity=100.0 * div)

    def to_dict(self) -> dict:
        return {
            "rep2": self.rep2,
            "rep3": self.rep3,
            "rep4": self.rep4,
            "diversity": self.diversity,
            "reported_diversity": self.reported_diversity,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiversityReport":
        return cls(**doc)


def word_tokens(text: str) -> list[str]:
    """Whitespace word-splitting after trimming."""
    return text.strip().split()


def rep_n(tokens: Sequence[str], n: int) -> float:
    """Percentage of repeated n-grams; 0 when the text has no n-grams at all."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    total = len(tokens) - n + 1
    if total <= 0:
        return 0.0
    unique = len({tuple(tokens[i : i + n]) for i in range(total)})
    return (1.0 - unique / total) * 100.0


def diversity(tokens: Sequence[str]) -> DiversityReport:
    """Compose Rep-2..4 into the diversity product."""
    return DiversityReport.from_reps(
        rep_n(tokens, 2), rep_n(tokens, 3), rep_n(tokens, 4)
    )


def diversity_of_text(text: str) -> DiversityReport:
    return diversity(word_tokens(text))


def aggregate(records: Iterable) -> dict:
    """Per-method means over a sequence of GenerationRecords.

    Produces one row per method with mean Rep-n, reported diversity, decode
    seconds, counts, and means of any externally computed scores attached to
    the records. All records must come from the same task.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record sequence")
    tasks = {rec.config.get("task") for rec in records if rec.config.get("task")}
    if len(tasks) > 1:
        raise ValueError(f"cannot aggregate mixed tasks {sorted(tasks)} in one report")
    by_method: dict[str, list] = {}
    for rec in records:
        by_method.setdefault(rec.method, []).append(rec)
    summary: dict[str, dict] = {}
    for method, recs in by_method.items():
        n = len(recs)
        row = {
            "count": n,
            "rep2": sum(r.diversity.rep2 for r in recs) / n,
            "rep3": sum(r.diversity.rep3 for r in recs) / n,
            "rep4": sum(r.diversity.rep4 for r in recs) / n,
            "reported_diversity": sum(r.diversity.reported_diversity for r in recs) / n,
            "mean_decode_seconds": sum(r.decode_seconds for r in recs) / n,
            "truncated_count": sum(1 for r in recs if r.truncated),
        }
        external_keys = sorted({key for r in recs for key in r.external_scores})
        if external_keys:
            row["external"] = {
                key: sum(r.external_scores[key] for r in recs if key in r.external_scores)
                / sum(1 for r in recs if key in r.external_scores)
                for key in external_keys
            }
        summary[method] = row
    return summary


def write_summary_csv(summary: dict, path: str) -> None:
    """Optional flat CSV export of an aggregate summary."""
    columns = [
        "method",
        "count",
        "rep2",
        "rep3",
        "rep4",
        "reported_diversity",
        "mean_decode_seconds",
        "truncated_count",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for method, row in sorted(summary.items()):
            writer.writerow([method] + [row[col] for col in columns[1:]])
