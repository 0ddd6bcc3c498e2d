import json

import pytest

from phytosub.corpus import Split, SubstitutionRecord
from phytosub.errors import UnresolvableRecipe
from phytosub.finetune import (
    COMPLETION_STOP,
    MAX_SEQUENCE_LENGTH,
    PROMPT_SEPARATOR,
    DatasetVariant,
    ModelKind,
    all_manifests,
    emit_manifest,
    estimate_token_length,
    export_chat,
    export_prompt_completion,
    parse_completion,
    read_jsonl,
)
from phytosub.prompts import SUBSTITUTE_SYSTEM

TABLE = {
    ("DaVinci002", "Unfiltered"): (1, 1533, 32),
    ("DaVinci002", "Filtered"): (1, 1554, 20),
    ("Gpt35Turbo1106", "Unfiltered"): (1, 1533, 32),
    ("Gpt35Turbo1106", "Filtered"): (1, 1554, 20),
    ("TinyLlama11B", "Unfiltered"): (1, 1532, 8),
    ("TinyLlama11B", "Filtered"): (1, 970, 8),
}


@pytest.mark.parametrize("key, expected", sorted(TABLE.items()))
def test_manifest_rows(key, expected):
    m = emit_manifest(*key)
    assert (m.epochs, m.steps, m.batch_size) == expected
    tiny = key[0] == "TinyLlama11B"
    assert m.manually_optimized is tiny
    assert (m.extras is not None) is tiny


def test_tinyllama_extras():
    m = emit_manifest(ModelKind.TINYLLAMA_1_1B, DatasetVariant.FILTERED)
    assert m.extras == {
        "learning_rate": 5e-4, "gradient_accumulation": 4, "optimizer": "paged_adamw_32bit",
        "scheduler": "cosine", "logging_interval": 25, "eval_interval": 50,
        "max_sequence_length": 512, "packing": False,
    }


def test_manifest_files(tmp_path):
    written = list(all_manifests(tmp_path))
    assert len(written) == 6
    data = json.loads((tmp_path / "gpt35_filtered.manifest.json").read_text())
    assert (data["epochs"], data["steps"], data["batch_size"]) == (1, 1554, 20)
    assert data["model_kind"] == "Gpt35Turbo1106"


def test_model_parse():
    assert ModelKind.parse("gpt35") is ModelKind.GPT35_TURBO_1106
    assert ModelKind.parse("TinyLlama11B") is ModelKind.TINYLLAMA_1_1B
    with pytest.raises(ValueError):
        ModelKind.parse("llama70b")
    with pytest.raises(ValueError):
        DatasetVariant.parse("half")


@pytest.mark.parametrize("n, tokens", [(0, 0), (1, 1), (4, 1), (5, 2), (2048, 512), (2049, 513)])
def test_token_estimate(n, tokens):
    assert estimate_token_length("x" * n) == tokens


def test_prompt_completion_round_trip(tmp_path, subs, corpus):
    path = tmp_path / "pc.jsonl"
    report = export_prompt_completion(subs, corpus, path)
    rows = read_jsonl(path)
    assert report.n_records == len(rows) == len(subs)
    for rec, row in zip(subs, rows):
        assert set(row) == {"prompt", "completion"}
        assert row["prompt"].endswith(PROMPT_SEPARATOR)
        assert row["completion"].startswith(" ") and row["completion"].endswith(COMPLETION_STOP)
        assert parse_completion(row["completion"]) == rec.target
        assert f'"{rec.source}"' in row["prompt"]
        assert corpus.get(rec.recipe_id).title in row["prompt"]


def test_chat_export(tmp_path, subs, corpus):
    path = tmp_path / "chat.jsonl"
    export_chat(subs, corpus, path)
    rows = read_jsonl(path)
    assert [m["role"] for m in rows[0]["messages"]] == ["system", "user", "assistant"]
    assert rows[0]["messages"][0]["content"] == SUBSTITUTE_SYSTEM
    butter = next(i for i, r in enumerate(subs) if r.source == "butter")
    assert rows[butter]["messages"][2]["content"] == "margarine"


def test_empty_export(tmp_path, corpus):
    report = export_chat([], corpus, tmp_path / "e.jsonl")
    assert report.n_records == 0
    assert (tmp_path / "e.jsonl").read_text() == ""


def test_unresolvable(tmp_path, corpus):
    rec = SubstitutionRecord("z", "missing", "a", "b", Split.TRAIN)
    with pytest.raises(UnresolvableRecipe):
        export_prompt_completion([rec], corpus, tmp_path / "x.jsonl")


def test_over_length_is_kept_and_flagged(tmp_path, corpus, subs):
    from dataclasses import replace

    long = replace(subs[0], id="long", source="salt " * 600)
    path = tmp_path / "pc.jsonl"
    report = export_prompt_completion([subs[0], long], corpus, path)
    assert report.over_length == ["long"]
    assert report.token_estimates["long"] > MAX_SEQUENCE_LENGTH
    assert len(read_jsonl(path)) == 2
