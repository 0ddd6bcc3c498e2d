"""Fine-tuning data export and training manifests.

Nothing here trains a model. Two record shapes are written:

* prompt/completion JSONL for completion-style models (DaVinci-002, TinyLlama)
* chat JSONL (system/user/assistant) for GPT-3.5-Turbo-1106

plus one manifest per (model, dataset variant) with the training settings.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus, SubstitutionRecord, write_jsonl
from .errors import UnresolvableRecipe
from .prompts import SUBSTITUTE_SYSTEM, substitute_request

PROMPT_SEPARATOR = "\n\n###\n\n"
COMPLETION_STOP = " END"
MAX_SEQUENCE_LENGTH = 512


class ModelKind(str, enum.Enum):
    DAVINCI_002 = "DaVinci002"
    GPT35_TURBO_1106 = "Gpt35Turbo1106"
    TINYLLAMA_1_1B = "TinyLlama11B"

    @property
    def slug(self) -> str:
        return {"DaVinci002": "davinci", "Gpt35Turbo1106": "gpt35", "TinyLlama11B": "tinyllama"}[self.value]

    @classmethod
    def parse(cls, value: str) -> "ModelKind":
        for m in cls:
            if value in (m.value, m.slug) or value.lower() == m.slug:
                return m
        raise ValueError(f"unknown model {value!r}; choose from {[m.slug for m in cls]}")


class DatasetVariant(str, enum.Enum):
    UNFILTERED = "Unfiltered"
    FILTERED = "Filtered"

    @classmethod
    def parse(cls, value: str) -> "DatasetVariant":
        for v in cls:
            if value.lower() == v.value.lower():
                return v
        raise ValueError(f"unknown variant {value!r}")


TINYLLAMA_EXTRAS = {
    "learning_rate": 5e-4,
    "gradient_accumulation": 4,
    "optimizer": "paged_adamw_32bit",
    "scheduler": "cosine",
    "logging_interval": 25,
    "eval_interval": 50,
    "max_sequence_length": MAX_SEQUENCE_LENGTH,
    "packing": False,
}

# (epochs, steps, batch size); TinyLlama rows were tuned by hand
_TRAINING_TABLE = {
    (ModelKind.DAVINCI_002, DatasetVariant.UNFILTERED): (1, 1533, 32),
    (ModelKind.DAVINCI_002, DatasetVariant.FILTERED): (1, 1554, 20),
    (ModelKind.GPT35_TURBO_1106, DatasetVariant.UNFILTERED): (1, 1533, 32),
    (ModelKind.GPT35_TURBO_1106, DatasetVariant.FILTERED): (1, 1554, 20),
    (ModelKind.TINYLLAMA_1_1B, DatasetVariant.UNFILTERED): (1, 1532, 8),
    (ModelKind.TINYLLAMA_1_1B, DatasetVariant.FILTERED): (1, 970, 8),
}


@dataclass(frozen=True)
class TrainingManifest:
    model_kind: ModelKind
    dataset_variant: DatasetVariant
    epochs: int
    steps: int
    batch_size: int
    extras: dict | None = None
    manually_optimized: bool = False

    @property
    def filename(self) -> str:
        return f"{self.model_kind.slug}_{self.dataset_variant.value.lower()}.manifest.json"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model_kind"] = self.model_kind.value
        d["dataset_variant"] = self.dataset_variant.value
        return d


def emit_manifest(model_kind: ModelKind | str, dataset_variant: DatasetVariant | str, out_dir: str | Path | None = None) -> TrainingManifest:
    model_kind = model_kind if isinstance(model_kind, ModelKind) else ModelKind.parse(model_kind)
    dataset_variant = dataset_variant if isinstance(dataset_variant, DatasetVariant) else DatasetVariant.parse(dataset_variant)
    epochs, steps, batch = _TRAINING_TABLE[(model_kind, dataset_variant)]
    tiny = model_kind is ModelKind.TINYLLAMA_1_1B
    manifest = TrainingManifest(
        model_kind, dataset_variant, epochs, steps, batch,
        extras=dict(TINYLLAMA_EXTRAS) if tiny else None,
        manually_optimized=tiny,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / manifest.filename).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return manifest


def estimate_token_length(text: str) -> int:
    """Rough token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass
class ExportReport:
    path: str
    n_records: int = 0
    token_estimates: dict[str, int] = field(default_factory=dict)
    over_length: list[str] = field(default_factory=list)

    def note(self, record_id: str, text: str) -> None:
        est = estimate_token_length(text)
        self.token_estimates[record_id] = est
        if est > MAX_SEQUENCE_LENGTH:
            self.over_length.append(record_id)

    def to_dict(self) -> dict:
        return {"path": self.path, "n_records": self.n_records, "max_sequence_length": MAX_SEQUENCE_LENGTH,
                "over_length": self.over_length, "token_estimates": self.token_estimates}


def _recipes_for(records: Sequence[SubstitutionRecord], corpus: Corpus):
    for r in records:
        recipe = corpus.get(r.recipe_id)
        if recipe is None:
            raise UnresolvableRecipe(r.recipe_id)
        yield r, recipe


def prompt_completion_rows(records: Sequence[SubstitutionRecord], corpus: Corpus) -> list[dict]:
    return [
        {"prompt": substitute_request(recipe, r.source) + PROMPT_SEPARATOR,
         "completion": f" {r.target}{COMPLETION_STOP}"}
        for r, recipe in _recipes_for(records, corpus)
    ]


def chat_rows(records: Sequence[SubstitutionRecord], corpus: Corpus) -> list[dict]:
    return [
        {"messages": [
            {"role": "system", "content": SUBSTITUTE_SYSTEM},
            {"role": "user", "content": substitute_request(recipe, r.source)},
            {"role": "assistant", "content": r.target},
        ]}
        for r, recipe in _recipes_for(records, corpus)
    ]


def _export(rows: list[dict], records: Sequence[SubstitutionRecord], path: str | Path, text_of) -> ExportReport:
    report = ExportReport(str(path), n_records=len(rows))
    for r, row in zip(records, rows):
        report.note(r.id, text_of(row))
    write_jsonl(rows, path)
    return report


def export_prompt_completion(records: Sequence[SubstitutionRecord], corpus: Corpus, path: str | Path) -> ExportReport:
    """Write ``{"prompt", "completion"}`` lines; over-length rows are kept and reported."""
    rows = prompt_completion_rows(records, corpus)
    return _export(rows, records, path, lambda row: row["prompt"] + row["completion"])


def export_chat(records: Sequence[SubstitutionRecord], corpus: Corpus, path: str | Path) -> ExportReport:
    rows = chat_rows(records, corpus)
    return _export(rows, records, path, lambda row: "".join(m["content"] for m in row["messages"]))


def read_jsonl(path: str | Path) -> list[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def parse_completion(completion: str) -> str:
    """Inverse of the completion encoding: ``" butter END"`` -> ``"butter"``."""
    text = completion
    if text.endswith(COMPLETION_STOP):
        text = text[: -len(COMPLETION_STOP)]
    return text.strip()


def all_manifests(out_dir: str | Path | None = None) -> Iterable[TrainingManifest]:
    for model, variant in _TRAINING_TABLE:
        yield emit_manifest(model, variant, out_dir)
