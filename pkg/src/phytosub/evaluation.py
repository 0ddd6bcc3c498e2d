"""Cluster-aware Hit@1 scoring, multi-run aggregation and a frequency baseline."""

from __future__ import annotations

import enum
import json
import re
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import SubstitutionRecord
from .errors import EmptyInput, MalformedLine
from .normalize import IngredientClustering, cluster_ingredients, normalize_name, same_cluster


class PredictionFormat(str, enum.Enum):
    JSONL = "jsonl"
    TSV = "tsv"


_CLAUSE_END = re.compile(r"[,.]")


def clean_prediction(text: str) -> str:
    """Cut a free-text completion at its first comma/period, then normalize."""
    return normalize_name(_CLAUSE_END.split(text, 1)[0])


@dataclass(frozen=True)
class PredictionRecord:
    """One scored line. ``predicted is None`` marks an abstention."""

    original: str
    truth: str
    predicted: str | None
    raw_original: str = ""
    raw_truth: str = ""
    raw_predicted: str | None = None

    @classmethod
    def from_raw(cls, original: str, truth: str, predicted: str | None) -> "PredictionRecord":
        return cls(
            original=normalize_name(original),
            truth=normalize_name(truth),
            predicted=None if predicted is None else clean_prediction(predicted),
            raw_original=original,
            raw_truth=truth,
            raw_predicted=predicted,
        )

    def to_dict(self) -> dict:
        return {"original": self.raw_original or self.original, "truth": self.raw_truth or self.truth,
                "predicted": self.raw_predicted if self.raw_predicted is not None else self.predicted}


def _checked(rec: PredictionRecord, n: int) -> PredictionRecord:
    if not rec.original or not rec.truth or rec.predicted == "":
        raise MalformedLine(n, "field empty after normalization")
    return rec


def parse_predictions(path: str | Path, format: PredictionFormat | str | None = None) -> list[PredictionRecord]:
    """Read a prediction file (JSONL objects or 3-column TSV).

    The format defaults from the file suffix. A JSON ``null`` prediction is
    an abstention and always scores as a miss.
    """
    path = Path(path)
    fmt = PredictionFormat(format) if format else (
        PredictionFormat.TSV if path.suffix.lower() in (".tsv", ".txt") else PredictionFormat.JSONL)
    records = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if fmt is PredictionFormat.TSV:
                cols = line.split("\t")
                if len(cols) != 3:
                    raise MalformedLine(n, f"expected 3 tab-separated columns, got {len(cols)}")
                rec = PredictionRecord.from_raw(*cols)
            else:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedLine(n, str(exc)) from None
                if not isinstance(obj, dict) or not {"original", "truth", "predicted"} <= set(obj):
                    raise MalformedLine(n, "expected an object with original, truth, predicted")
                fields = [obj.get(k) for k in ("original", "truth", "predicted")]
                if not all(isinstance(v, str) for v in fields[:2]) or not (fields[2] is None or isinstance(fields[2], str)):
                    raise MalformedLine(n, "need string fields original, truth, predicted")
                rec = PredictionRecord.from_raw(*fields)
            records.append(_checked(rec, n))
    return records


def write_predictions(records: Iterable[PredictionRecord], path: str | Path, format: PredictionFormat | str = PredictionFormat.JSONL) -> None:
    fmt = PredictionFormat(format)
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            d = r.to_dict()
            if fmt is PredictionFormat.TSV:
                fh.write("\t".join([d["original"], d["truth"], d["predicted"] or ""]) + "\n")
            else:
                fh.write(json.dumps(d, ensure_ascii=False) + "\n")


def round_half_up(value: float, places: int = 2) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def aggregate_runs(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation; std is 0 for one run."""
    if not values:
        raise EmptyInput("need at least one run")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


@dataclass
class EvaluationReport:
    n_records: int
    n_hits: int
    per_run: list[float] = field(default_factory=list)
    run_sizes: list[tuple[int, int]] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    @property
    def hit_at_1(self) -> float:
        return 100.0 * self.n_hits / self.n_records

    @property
    def single_run(self) -> bool:
        return len(self.per_run) <= 1

    @property
    def mean(self) -> float:
        return aggregate_runs(self.per_run)[0]

    @property
    def std(self) -> float:
        return aggregate_runs(self.per_run)[1]

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_hits": self.n_hits,
            "hit_at_1": round_half_up(self.hit_at_1),
            "per_run": [round_half_up(v) for v in self.per_run],
            "runs": [{"label": lab, "n_records": n, "n_hits": h} for lab, (n, h) in zip(self.labels, self.run_sizes)],
            "mean": round_half_up(self.mean),
            "std": round_half_up(self.std),
            "single_run": self.single_run,
        }

    def format_table(self, dataset: str = "", model: str = "") -> str:
        """Plain-text per-run table followed by a ``mean ± std`` row."""
        lines = [f"{'Run':<24}{'Hits':>8}{'N':>8}{'Hit@1 (%)':>12}"]
        for lab, (n, h), v in zip(self.labels, self.run_sizes, self.per_run):
            lines.append(f"{lab:<24}{h:>8}{n:>8}{round_half_up(v):>12.2f}")
        lines.append("")
        lines.append("Recipe1MSubs Dataset\tFine Tuned Model\tHit@1 (%)")
        lines.append(f"{dataset}\t{model}\t{round_half_up(self.mean):.2f} ± {round_half_up(self.std):.2f}")
        return "\n".join(lines)


def is_hit(record: PredictionRecord, clustering: IngredientClustering) -> bool:
    if record.predicted is None:
        return False
    if record.predicted == record.truth:
        return True
    return same_cluster(record.predicted, record.truth, clustering)


def hit_at_1(records: Sequence[PredictionRecord], clustering: IngredientClustering | None = None, label: str = "run 1") -> EvaluationReport:
    if not records:
        raise EmptyInput("no prediction records")
    clustering = clustering or cluster_ingredients([])
    hits = sum(is_hit(r, clustering) for r in records)
    return EvaluationReport(len(records), hits, per_run=[100.0 * hits / len(records)],
                            run_sizes=[(len(records), hits)], labels=[label])


def evaluate_runs(runs: Sequence[Sequence[PredictionRecord]], clustering: IngredientClustering | None = None,
                  labels: Sequence[str] | None = None) -> EvaluationReport:
    """Score several prediction sets (e.g. five stochastic runs) and pool them."""
    if not runs:
        raise EmptyInput("no runs")
    labels = list(labels) if labels else [f"run {i}" for i in range(1, len(runs) + 1)]
    reports = [hit_at_1(r, clustering) for r in runs]
    return EvaluationReport(
        n_records=sum(r.n_records for r in reports),
        n_hits=sum(r.n_hits for r in reports),
        per_run=[r.hit_at_1 for r in reports],
        run_sizes=[(r.n_records, r.n_hits) for r in reports],
        labels=labels,
    )


# -- frequency baseline ---------------------------------------------------


@dataclass(frozen=True)
class FrequencyBaseline:
    """Predicts the most frequent training target for each source."""

    table: dict[str, tuple[str, int]]

    def predict(self, source: str) -> str | None:
        hit = self.table.get(normalize_name(source))
        return hit[0] if hit else None

    def to_json(self) -> str:
        return json.dumps({k: list(v) for k, v in sorted(self.table.items())}, ensure_ascii=False)


def train_frequency_baseline(records: Iterable[SubstitutionRecord]) -> FrequencyBaseline:
    counts: dict[str, Counter[str]] = defaultdict(Counter)
    for r in records:
        counts[normalize_name(r.source)][normalize_name(r.target)] += 1
    if not counts:
        raise EmptyInput("no training records")
    table = {}
    for src, c in counts.items():
        # highest count first, ties to the lexicographically smallest target
        target, support = min(c.items(), key=lambda kv: (-kv[1], kv[0]))
        table[src] = (target, support)
    return FrequencyBaseline(table)


def predict_baseline(model: FrequencyBaseline, source: str) -> str | None:
    """Modal target for ``source``, or ``None`` (abstain) if it was never seen."""
    return model.predict(source)


def baseline_predictions(model: FrequencyBaseline, records: Iterable[SubstitutionRecord]) -> list[PredictionRecord]:
    return [PredictionRecord.from_raw(r.source, r.target, model.predict(r.source)) for r in records]
