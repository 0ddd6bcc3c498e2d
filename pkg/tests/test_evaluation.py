import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phytosub import data_path
from phytosub.corpus import Split, SubstitutionRecord
from phytosub.errors import EmptyInput, MalformedLine
from phytosub.evaluation import (
    PredictionRecord,
    aggregate_runs,
    baseline_predictions,
    clean_prediction,
    evaluate_runs,
    hit_at_1,
    parse_predictions,
    predict_baseline,
    round_half_up,
    train_frequency_baseline,
    write_predictions,
)
from phytosub.normalize import cluster_ingredients


def _rec(src, tgt, split="train", i=[0]):
    i[0] += 1
    return SubstitutionRecord(f"t{i[0]}", "r001", src, tgt, Split(split))


@pytest.mark.parametrize(
    "raw, clean",
    [
        ("Shallots, finely chopped", "shallots"),
        ("grape juice. It adds sweetness", "grape juice"),
        ("Half & Half", "half and half"),
        ("2 egg substitutes", "egg substitutes"),
        ("Almond-Flour.", "almond flour"),
    ],
)
def test_clean_prediction(raw, clean):
    assert clean_prediction(raw) == clean


def test_jsonl_and_tsv_agree():
    a = parse_predictions(data_path("predictions_20.jsonl"))
    b = parse_predictions(data_path("predictions_20.tsv"))
    assert len(a) == len(b) == 20
    assert [(r.original, r.truth, r.predicted) for r in a] == [(r.original, r.truth, r.predicted) for r in b]


@pytest.mark.parametrize(
    "content, fmt",
    [
        ("butter\tmargarine\n", "tsv"),
        ("a\tb\tc\td\n", "tsv"),
        ("{not json}\n", "jsonl"),
        ('["a", "b", "c"]\n', "jsonl"),
        ('{"original": "a", "truth": "b"}\n', "jsonl"),
        ('{"original": "123", "truth": "b", "predicted": "c"}\n', "jsonl"),
    ],
)
def test_malformed_lines(tmp_path, content, fmt):
    path = tmp_path / f"p.{fmt}"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(MalformedLine):
        parse_predictions(path)


def test_malformed_reports_line_number(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("a\tb\tc\nbad line\n", encoding="utf-8")
    with pytest.raises(MalformedLine) as info:
        parse_predictions(path)
    assert info.value.line_number == 2


def test_abstain_round_trip(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text('{"original": "a", "truth": "b", "predicted": null}\n', encoding="utf-8")
    (rec,) = parse_predictions(path)
    assert rec.predicted is None
    assert hit_at_1([rec]).n_hits == 0
    write_predictions([rec], tmp_path / "q.jsonl")
    assert parse_predictions(tmp_path / "q.jsonl")[0].predicted is None


def test_exact_hit():
    assert hit_at_1([PredictionRecord.from_raw("butter", "margarine", "margarine")]).hit_at_1 == 100.0


def test_plural_hit():
    assert hit_at_1([PredictionRecord.from_raw("lemon", "orange", "Oranges")]).hit_at_1 == 100.0


def test_twenty_records(curated_clustering):
    recs = parse_predictions(data_path("predictions_20.jsonl"))
    assert hit_at_1(recs, curated_clustering).hit_at_1 == 60.0
    assert hit_at_1(recs).hit_at_1 == 45.0
    no_grain = cluster_ingredients([], {"vinegar": ["white vinegar", "apple cider vinegar", "rice vinegar"]})
    assert hit_at_1(recs, no_grain).hit_at_1 == 50.0


def test_coarse_is_more_lenient(curated_clustering):
    recs = parse_predictions(data_path("predictions_20.jsonl"))
    coarse = cluster_ingredients([], data_path("curated_clusters.csv"), coarse=True)
    assert hit_at_1(recs, coarse).n_hits >= hit_at_1(recs, curated_clustering).n_hits


def test_empty_predictions():
    with pytest.raises(EmptyInput):
        hit_at_1([])
    with pytest.raises(EmptyInput):
        aggregate_runs([])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=100, allow_nan=False), min_size=2, max_size=10))
def test_aggregate_matches_numpy(values):
    mean, std = aggregate_runs(values)
    assert mean == pytest.approx(float(np.mean(values)), abs=1e-9)
    assert std == pytest.approx(float(np.std(values, ddof=1)), abs=1e-9)


def test_single_run_std_zero():
    assert aggregate_runs([42.0]) == (42.0, 0.0)


@pytest.mark.parametrize("value, rounded", [(0.125, 0.13), (0.135, 0.14), (54.455, 54.46), (2.675, 2.68), (1.004, 1.0)])
def test_round_half_up(value, rounded):
    assert round_half_up(value) == rounded


def test_permutation_invariance(curated_clustering):
    recs = parse_predictions(data_path("predictions_20.jsonl"))
    base = hit_at_1(recs, curated_clustering).hit_at_1
    rng = random.Random(3)
    for _ in range(10):
        shuffled = recs[:]
        rng.shuffle(shuffled)
        assert hit_at_1(shuffled, curated_clustering).hit_at_1 == base


def test_clustering_monotonicity():
    recs = parse_predictions(data_path("predictions_20.jsonl"))
    fine = hit_at_1(recs, cluster_ingredients([])).n_hits
    mid = hit_at_1(recs, cluster_ingredients([], {"g": ["barley", "basmati rice"]})).n_hits
    full = hit_at_1(recs, cluster_ingredients([], data_path("curated_clusters.csv"))).n_hits
    assert fine <= mid <= full


def test_evaluate_runs_table(curated_clustering):
    recs = parse_predictions(data_path("predictions_20.jsonl"))
    report = evaluate_runs([recs, recs[:10]], curated_clustering, labels=["a", "b"])
    assert report.per_run[0] == 60.0
    assert len(report.per_run) == 2
    table = report.format_table("Filtered", "GPT-3.5")
    assert "±" in table
    assert table.splitlines()[-1].startswith("Filtered\tGPT-3.5\t")
    d = report.to_dict()
    assert d["single_run"] is False and d["runs"][1]["label"] == "b"


def test_single_run_report(curated_clustering):
    report = evaluate_runs([parse_predictions(data_path("predictions_20.jsonl"))], curated_clustering)
    assert report.single_run
    assert report.to_dict()["std"] == 0.0


# -- frequency baseline ---------------------------------------------------


def test_baseline_mode():
    model = train_frequency_baseline([_rec("butter", "margarine"), _rec("butter", "margarine"), _rec("butter", "oil")])
    assert predict_baseline(model, "Butter") == "margarine"
    assert model.table["butter"] == ("margarine", 2)


def test_baseline_tie_breaks_lexicographically():
    model = train_frequency_baseline([_rec("butter", "oil"), _rec("butter", "margarine")])
    assert predict_baseline(model, "butter") == "margarine"


def test_baseline_abstains_on_unseen():
    model = train_frequency_baseline([_rec("butter", "margarine")])
    assert predict_baseline(model, "saffron") is None
    preds = baseline_predictions(model, [_rec("saffron", "turmeric", "test")])
    assert preds[0].predicted is None
    assert hit_at_1(preds).n_hits == 0


def test_baseline_empty():
    with pytest.raises(EmptyInput):
        train_frequency_baseline([])


def test_baseline_is_deterministic():
    recs = [_rec("a", t) for t in ["x", "y", "y", "z", "x"]]
    assert train_frequency_baseline(recs).to_json() == train_frequency_baseline(list(reversed(recs))).to_json()
