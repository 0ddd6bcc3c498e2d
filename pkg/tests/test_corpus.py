import json

import pytest

from phytosub.corpus import (
    Recipe,
    Split,
    SplitStats,
    compute_split_stats,
    ingredient_name,
    load_recipes,
    load_substitutions,
    split_records,
    write_dataset,
    write_recipes,
)
from phytosub.errors import DuplicateId, IoFailure, MalformedRecord, UnknownSplit


def _write_lines(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def test_fixture_recipes(recipes):
    assert [r.id for r in recipes] == [f"r{i:03d}" for i in range(1, 11)]
    assert all(r.ingredients for r in recipes)


def test_empty_recipe_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert load_recipes(p) == []


def test_recipe_without_ingredients_is_malformed(tmp_path):
    p = _write_lines(tmp_path / "r.jsonl", [
        {"id": "a", "title": "ok", "ingredients": ["1 egg"], "instructions": []},
        {"id": "b", "title": "bad", "ingredients": [], "instructions": []},
    ])
    with pytest.raises(MalformedRecord) as err:
        load_recipes(p)
    assert err.value.line_number == 2


def test_duplicate_recipe_id(tmp_path):
    row = {"id": "a", "title": "t", "ingredients": ["salt"]}
    with pytest.raises(DuplicateId):
        load_recipes(_write_lines(tmp_path / "r.jsonl", [row, row]))


def test_legacy_recipe1m_layout(tmp_path):
    p = tmp_path / "layer1.json"
    p.write_text(json.dumps([{
        "id": "000018c8a5", "title": "Worlds Best Mac and Cheese",
        "ingredients": [{"text": "6 ounces penne"}, {"text": "2 cups Beechers Flagship Cheese Sauce (recipe follows)"}],
        "instructions": [{"text": "Preheat the oven to 350 F."}],
        "partition": "train", "url": "http://example.invalid",
    }]))
    (recipe,) = load_recipes(p, "recipe1m")
    assert recipe.ingredient_names() == ["penne", "beechers flagship cheese sauce"]
    assert recipe.instructions == ("Preheat the oven to 350 F.",)


@pytest.mark.parametrize("raw, name", [
    ("2 tablespoons sesame oil, divided", "sesame oil"),
    ("1/2 cup dried cranberries", "dried cranberries"),
    ("3 cloves garlic", "garlic"),
    ("1 (14 oz) can diced tomatoes", "diced tomatoes"),
    ("½ tsp Salt", "salt"),
    ("2 large eggs", "eggs"),
    ("salt and pepper to taste", "salt and pepper to taste"),
])
def test_ingredient_name(raw, name):
    assert ingredient_name(raw) == name


def test_raw_line_kept(recipes):
    first = recipes[0].ingredients[1]
    assert first.raw_line == "2 cups mung bean sprouts"
    assert first.name == "mung bean sprouts"


def test_fixture_substitutions(subs):
    assert len(subs) == 6
    assert compute_split_stats(subs) == SplitStats(4, 1, 1)


def test_missing_target_is_malformed(tmp_path):
    p = _write_lines(tmp_path / "s.jsonl", [{"recipe_id": "r1", "source": "a", "split": "train"}])
    with pytest.raises(MalformedRecord):
        load_substitutions(p)


def test_unknown_split(tmp_path):
    p = _write_lines(tmp_path / "s.jsonl", [{"recipe_id": "r1", "source": "a", "target": "b", "split": "dev2"}])
    with pytest.raises(UnknownSplit):
        load_substitutions(p)


def test_source_equal_target_rejected(tmp_path):
    p = _write_lines(tmp_path / "s.jsonl", [{"recipe_id": "r1", "source": "Carrot", "target": "carrot ", "split": "train"}])
    with pytest.raises(MalformedRecord):
        load_substitutions(p)


def test_ids_assigned_when_absent(tmp_path):
    p = _write_lines(tmp_path / "s.jsonl", [{"recipe_id": "r1", "source": "a", "target": "b", "split": "val"}])
    (rec,) = load_substitutions(p)
    assert rec.id == "s000001"
    assert rec.split is Split.VALIDATION


def test_split_stats_empty():
    s = compute_split_stats([])
    assert (s.train, s.validation, s.test, s.total) == (0, 0, 0, 0)


def test_dataset_round_trip(tmp_path, subs):
    out = tmp_path / "out.jsonl"
    write_dataset(subs, out)
    assert load_substitutions(out) == subs


def test_empty_dataset_round_trip(tmp_path):
    out = tmp_path / "empty.jsonl"
    write_dataset([], out)
    assert out.exists()
    assert load_substitutions(out) == []


def test_unwritable_path(tmp_path, subs):
    with pytest.raises(IoFailure):
        write_dataset(subs, tmp_path / "missing-dir" / "x.jsonl")


def test_recipe_round_trip(tmp_path, recipes):
    out = tmp_path / "recipes.jsonl"
    write_recipes(recipes, out)
    assert load_recipes(out) == recipes


def test_split_partition(subs):
    parts = [split_records(subs, s) for s in Split]
    ids = [r.id for part in parts for r in part]
    assert sorted(ids) == sorted(r.id for r in subs)
    assert len(set(ids)) == len(ids)
    assert compute_split_stats(subs).total == len(subs)


def test_recipe_is_hashable_value(recipes):
    assert isinstance(recipes[0], Recipe)
    assert len(set(recipes)) == 10
