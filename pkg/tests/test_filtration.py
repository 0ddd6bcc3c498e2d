import json

import pytest

from phytosub import data_path
from phytosub.corpus import Split, SplitStats, SubstitutionRecord
from phytosub.errors import RecipeMismatch, UnresolvableRecipe, Unparseable
from phytosub.filtration import (
    FILTER_PARAMS,
    ValidityLabel,
    build_validity_prompt,
    kept_split,
    load_run_report,
    parse_validity_label,
    run_filtration,
    select_run,
    summarize_counts,
    summarize_runs,
)
from phytosub.gateway import MockBackend, prompt_hash


@pytest.mark.parametrize(
    "text, label",
    [
        ("Correct", ValidityLabel.CORRECT),
        ("correct.", ValidityLabel.CORRECT),
        ("potential: depends on the dressing", ValidityLabel.POTENTIAL),
        ("Incorrect", ValidityLabel.INCORRECT),
        ("INCORRECT, sorry", ValidityLabel.INCORRECT),
        ("Answer: Potential", ValidityLabel.POTENTIAL),
    ],
)
def test_parse_label(text, label):
    assert parse_validity_label(text) is label


@pytest.mark.parametrize("text", ["maybe", "", "uncorrected"])
def test_parse_label_unparseable(text):
    with pytest.raises(Unparseable):
        parse_validity_label(text)


def test_filter_params():
    assert (FILTER_PARAMS.model_id, FILTER_PARAMS.temperature, FILTER_PARAMS.max_output_tokens) == ("gpt-3.5-turbo-1106", 0.5, 10)


def test_prompt_contents_and_stability(subs, corpus):
    rec = subs[0]
    a = build_validity_prompt(rec, corpus.get(rec.recipe_id))
    b = build_validity_prompt(rec, corpus.get(rec.recipe_id))
    assert json.dumps(a) == json.dumps(b)
    text = a[-1]["content"]
    recipe = corpus.get(rec.recipe_id)
    assert recipe.title in text
    assert f'"{rec.source}"' in text and f'"{rec.target}"' in text
    assert all(i.raw_line in text for i in recipe.ingredients)
    assert "Correct, Potential, or Incorrect" in text


def test_prompt_recipe_mismatch(subs, corpus):
    rec = subs[0]
    other = next(r for r in corpus.recipes.values() if r.id != rec.recipe_id)
    with pytest.raises(RecipeMismatch):
        build_validity_prompt(rec, other)


def test_unresolvable_recipe(corpus, make_gateway):
    rec = SubstitutionRecord("x1", "nope", "a", "b", Split.TRAIN)
    with pytest.raises(UnresolvableRecipe):
        run_filtration([rec], corpus, make_gateway(MockBackend({"default": "Correct"})), runs=1)


def test_all_correct_keeps_everything(subs, corpus, make_gateway):
    runs = run_filtration(subs, corpus, make_gateway(MockBackend({"default": "Correct"})), runs=5)
    assert [r.run_index for r in runs] == [1, 2, 3, 4, 5]
    assert all(len(r.kept) == len(subs) for r in runs)
    summary = summarize_runs(runs)
    assert summary.stats()["total"] == (len(subs), 0.0)


def test_exemplar_buckets(exemplars, corpus, make_gateway):
    gw = make_gateway(MockBackend.from_file(data_path("exemplar_mock.json")))
    (run,) = run_filtration(exemplars, corpus, gw, runs=1)
    assert run.kept == ["e01", "e02", "e03", "e04", "e05"]
    assert [r.id for r in run.bucket(ValidityLabel.POTENTIAL)] == ["e06", "e07", "e08", "e09", "e10"]
    assert [r.id for r in run.bucket(ValidityLabel.INCORRECT)] == ["e11", "e12", "e13", "e14", "e15"]
    assert not any(e.flagged for e in run.labels.values())


def test_seeds_are_sent_per_run(subs, corpus, make_gateway):
    backend = MockBackend({"default": {"seeds": {"12": "Incorrect"}, "default": "Correct"}})
    runs = run_filtration(subs, corpus, make_gateway(backend), runs=3, base_seed=10)
    assert [len(r.kept) for r in runs] == [len(subs), 0, len(subs)]


def test_unparseable_is_requeried_then_flagged(subs, corpus, make_gateway):
    recipe = corpus.get(subs[0].recipe_id)
    bad = prompt_hash(build_validity_prompt(subs[0], recipe))
    backend = MockBackend({"default": "Correct", bad: "no idea"})
    (run,) = run_filtration(subs, corpus, make_gateway(backend), runs=1)
    entry = run.labels[subs[0].id]
    assert entry.label is ValidityLabel.INCORRECT and entry.flagged
    assert entry.reason == "unparseable"
    assert backend.calls[bad] == 2
    assert len(run.kept) == len(subs) - 1


def test_gateway_failure_is_flagged(subs, corpus, make_gateway):
    recipe = corpus.get(subs[1].recipe_id)
    bad = prompt_hash(build_validity_prompt(subs[1], recipe))
    backend = MockBackend({"default": "Correct", bad: {"error": "Timeout"}})
    (run,) = run_filtration(subs, corpus, make_gateway(backend, max_retries=1), runs=1)
    assert run.labels[subs[1].id].flagged
    assert run.labels[subs[1].id].reason == "gateway:Timeout"


def test_run_report_schema(tmp_path, exemplars, corpus, make_gateway):
    gw = make_gateway(MockBackend.from_file(data_path("exemplar_mock.json")))
    run_filtration(exemplars, corpus, gw, runs=2, out_dir=tmp_path)
    report = load_run_report(tmp_path / "filter_run_2.json")
    assert set(report) == {"run", "template", "labels", "kept"}
    assert report["run"] == 2
    assert {tuple(sorted(x)) for x in report["labels"]} == {("flagged", "id", "label")}
    kept_lines = (tmp_path / "filter_run_2.kept.jsonl").read_text().splitlines()
    assert [json.loads(x)["id"] for x in kept_lines] == report["kept"]
    assert len((tmp_path / "filter_run_2.potential.jsonl").read_text().splitlines()) == 5


def test_summary_statistics():
    per_run = [SplitStats(t, v, s) for t, v, s in [(31900, 7100, 7090), (31800, 7080, 7060), (31750, 7120, 7100), (31770, 7060, 7080), (31873, 7111, 7096)]]
    summary = summarize_counts(per_run)
    stats = summary.stats()
    assert stats["train"][0] == pytest.approx(31818.6)
    assert stats["total"][0] == pytest.approx(sum(s.total for s in per_run) / 5)
    assert not summary.single_run
    assert "±" in summary.format()


def test_single_run_summary():
    summary = summarize_counts([SplitStats(100, 10, 10)])
    assert summary.single_run
    assert summary.stats()["train"] == (100.0, 0.0)
    with pytest.raises(ValueError):
        summarize_counts([])


def test_select_run(subs, corpus, make_gateway):
    runs = run_filtration(subs, corpus, make_gateway(MockBackend({"default": "Correct"})), runs=5)
    assert select_run(runs, run=3).run_index == 3
    assert select_run(runs, seed=7).run_index == select_run(runs, seed=7).run_index
    with pytest.raises(IndexError):
        select_run(runs, run=9)
    assert {r.split for r in kept_split(runs[0], Split.TRAIN)} == {Split.TRAIN}
