"""Validity filtration of substitution datasets.

Each record is shown to a chat model together with its recipe and labelled
Correct, Potential or Incorrect. Only Correct records are kept; Potential
records go to a separate bucket for later review.
"""

from __future__ import annotations

import enum
import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, Recipe, Split, SplitStats, SubstitutionRecord, compute_split_stats, write_dataset
from .errors import RecipeMismatch, UnresolvableRecipe, Unparseable
from .evaluation import aggregate_runs, round_half_up
from .gateway import ChatExchange, Gateway, GenerationParams, with_seed
from .prompts import VALIDITY_TEMPLATE, validity_messages

logger = logging.getLogger(__name__)

FILTER_PARAMS = GenerationParams(model_id="gpt-3.5-turbo-1106", temperature=0.5, max_output_tokens=10)


class ValidityLabel(str, enum.Enum):
    CORRECT = "Correct"
    POTENTIAL = "Potential"
    INCORRECT = "Incorrect"


_LABEL_RE = re.compile(r"\b(incorrect|correct|potential)", re.IGNORECASE)


def parse_validity_label(response: str) -> ValidityLabel:
    """Label whose word occurs first in ``response`` (case-insensitive)."""
    m = _LABEL_RE.search(response)
    if m is None:
        raise Unparseable(response)
    return ValidityLabel(m.group(1).capitalize())


def build_validity_prompt(record: SubstitutionRecord, recipe: Recipe) -> list[dict[str, str]]:
    if record.recipe_id != recipe.id:
        raise RecipeMismatch(record.id, record.recipe_id, recipe.id)
    return validity_messages(recipe, record.source, record.target)


@dataclass
class LabelEntry:
    label: ValidityLabel
    flagged: bool = False
    reason: str = ""


@dataclass
class FiltrationRun:
    run_index: int
    labels: dict[str, LabelEntry]
    records: list[SubstitutionRecord] = field(repr=False, default_factory=list)

    @property
    def kept(self) -> list[str]:
        return [r.id for r in self.records if self.labels[r.id].label is ValidityLabel.CORRECT]

    def bucket(self, label: ValidityLabel) -> list[SubstitutionRecord]:
        return [r for r in self.records if self.labels[r.id].label is label]

    @property
    def kept_records(self) -> list[SubstitutionRecord]:
        return self.bucket(ValidityLabel.CORRECT)

    @property
    def counts(self) -> SplitStats:
        return compute_split_stats(self.kept_records)

    def to_dict(self) -> dict:
        return {
            "run": self.run_index,
            "template": VALIDITY_TEMPLATE,
            "labels": [
                {"id": r.id, "label": self.labels[r.id].label.value, "flagged": self.labels[r.id].flagged}
                for r in self.records
            ],
            "kept": self.kept,
        }

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / f"filter_run_{self.run_index}.json",
            "kept": out / f"filter_run_{self.run_index}.kept.jsonl",
            "potential": out / f"filter_run_{self.run_index}.potential.jsonl",
        }
        paths["report"].write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        write_dataset(self.kept_records, paths["kept"])
        write_dataset(self.bucket(ValidityLabel.POTENTIAL), paths["potential"])
        return paths


def _resolve(records: Sequence[SubstitutionRecord], corpus: Corpus) -> list[Recipe]:
    recipes = []
    for r in records:
        recipe = corpus.get(r.recipe_id)
        if recipe is None:
            raise UnresolvableRecipe(r.recipe_id)
        recipes.append(recipe)
    return recipes


def _label_batch(gateway: Gateway, prompts: list, params: GenerationParams) -> list[tuple[ValidityLabel | None, str]]:
    out = []
    for ex in gateway.complete_batch([ChatExchange(i, p) for i, p in enumerate(prompts)], params):
        if not ex.ok:
            out.append((None, f"gateway:{ex.failure.kind}"))
            continue
        try:
            out.append((parse_validity_label(ex.response), ""))
        except Unparseable:
            out.append((None, "unparseable"))
    return out


def run_filtration(
    records: Sequence[SubstitutionRecord],
    corpus: Corpus,
    gateway: Gateway,
    params: GenerationParams = FILTER_PARAMS,
    runs: int = 5,
    *,
    base_seed: int = 0,
    out_dir: str | Path | None = None,
) -> list[FiltrationRun]:
    """Label every record ``runs`` times.

    Run ``k`` sends ``seed = base_seed + k`` with its requests. Unparseable
    answers are asked once more; anything still unlabelled (unparseable or a
    gateway failure after retries) becomes a flagged Incorrect.
    """
    recipes = _resolve(records, corpus)
    prompts = [build_validity_prompt(r, rec) for r, rec in zip(records, recipes)]
    results = []
    for k in range(1, runs + 1):
        run_params = with_seed(params, base_seed + k)
        labelled = _label_batch(gateway, prompts, run_params)
        retry = [i for i, (lab, why) in enumerate(labelled) if why == "unparseable"]
        if retry:
            again = _label_batch(gateway, [prompts[i] for i in retry], run_params)
            for i, res in zip(retry, again):
                labelled[i] = res
        labels = {}
        for rec, (lab, why) in zip(records, labelled):
            if lab is None:
                labels[rec.id] = LabelEntry(ValidityLabel.INCORRECT, flagged=True, reason=why)
            else:
                labels[rec.id] = LabelEntry(lab)
        run = FiltrationRun(k, labels, list(records))
        logger.info("filtration run %d: kept %d of %d", k, len(run.kept), len(records))
        if out_dir is not None:
            run.write(out_dir)
        results.append(run)
    return results


@dataclass
class RunSummary:
    counts: dict[str, list[int]]
    single_run: bool

    def stats(self) -> dict[str, tuple[float, float]]:
        return {k: aggregate_runs(v) for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return {
            "single_run": self.single_run,
            "per_run": self.counts,
            "mean": {k: round_half_up(m) for k, (m, _) in self.stats().items()},
            "std": {k: round_half_up(s) for k, (_, s) in self.stats().items()},
        }

    def format(self) -> str:
        parts = [f"{k}: {m:,.0f} ± {s:,.0f}" for k, (m, s) in self.stats().items()]
        return "; ".join(parts)


def summarize_counts(per_run: Iterable[SplitStats]) -> RunSummary:
    per_run = list(per_run)
    if not per_run:
        raise ValueError("need at least one run")
    counts = {
        "train": [s.train for s in per_run],
        "validation": [s.validation for s in per_run],
        "test": [s.test for s in per_run],
        "total": [s.total for s in per_run],
    }
    return RunSummary(counts, single_run=len(per_run) == 1)


def summarize_runs(runs: Sequence[FiltrationRun]) -> RunSummary:
    """Per-split mean and sample std of kept counts across runs."""
    return summarize_counts(r.counts for r in runs)


def select_run(runs: Sequence[FiltrationRun], run: int | None = None, seed: int | None = None) -> FiltrationRun:
    """Pick the run used downstream: an explicit 1-based index or a seeded uniform choice."""
    if run is not None:
        for r in runs:
            if r.run_index == run:
                return r
        raise IndexError(f"no run {run}")
    return random.Random(seed).choice(list(runs))


def load_run_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def kept_split(run: FiltrationRun, split: Split) -> list[SubstitutionRecord]:
    return [r for r in run.kept_records if r.split is split]
