"""Recipe corpora and substitution datasets.

Native format is JSONL. Recipes::

    {"id": "r001", "title": "...", "ingredients": ["2 cups kale", ...], "instructions": ["..."]}

Ingredient entries may also be objects ``{"raw_line": ..., "name": ...}``;
when ``name`` is missing it is derived from the raw line. Substitutions::

    {"id": "s000001", "recipe_id": "r001", "source": "kale", "target": "spinach", "split": "train"}
"""

from __future__ import annotations

import enum
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DuplicateId, IoFailure, MalformedRecord, UnknownSplit
from .normalize import normalize_name


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"

    @classmethod
    def parse(cls, value: object) -> "Split":
        aliases = {"train": cls.TRAIN, "training": cls.TRAIN, "val": cls.VALIDATION,
                   "valid": cls.VALIDATION, "validation": cls.VALIDATION, "test": cls.TEST,
                   "testing": cls.TEST}
        if isinstance(value, str) and value.strip().lower() in aliases:
            return aliases[value.strip().lower()]
        raise UnknownSplit(value)


class RecipeFormat(str, enum.Enum):
    JSONL = "jsonl"
    LEGACY_RECIPE1M = "recipe1m"


@dataclass(frozen=True)
class Ingredient:
    raw_line: str
    name: str


@dataclass(frozen=True)
class Recipe:
    id: str
    title: str
    ingredients: tuple[Ingredient, ...]
    instructions: tuple[str, ...] = ()

    def ingredient_names(self) -> list[str]:
        return [i.name for i in self.ingredients]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "ingredients": [{"raw_line": i.raw_line, "name": i.name} for i in self.ingredients],
            "instructions": list(self.instructions),
        }


@dataclass(frozen=True)
class SubstitutionRecord:
    id: str
    recipe_id: str
    source: str
    target: str
    split: Split

    def to_dict(self) -> dict:
        return {"id": self.id, "recipe_id": self.recipe_id, "source": self.source,
                "target": self.target, "split": self.split.value}


@dataclass(frozen=True)
class SplitStats:
    train: int = 0
    validation: int = 0
    test: int = 0

    @property
    def total(self) -> int:
        return self.train + self.validation + self.test

    def to_dict(self) -> dict:
        return {"train": self.train, "validation": self.validation, "test": self.test, "total": self.total}


@dataclass
class Corpus:
    """Recipes indexed by id, in file order."""

    recipes: dict[str, Recipe] = field(default_factory=dict)

    @classmethod
    def from_recipes(cls, recipes: Iterable[Recipe]) -> "Corpus":
        out: dict[str, Recipe] = {}
        for r in recipes:
            if r.id in out:
                raise DuplicateId(r.id)
            out[r.id] = r
        return cls(out)

    def __len__(self) -> int:
        return len(self.recipes)

    def __iter__(self) -> Iterator[Recipe]:
        return iter(self.recipes.values())

    def __contains__(self, recipe_id: str) -> bool:
        return recipe_id in self.recipes

    def get(self, recipe_id: str) -> Recipe | None:
        return self.recipes.get(recipe_id)


_UNITS = {
    "cup", "cups", "c", "tablespoon", "tablespoons", "tbsp", "tbs", "tsp", "teaspoon", "teaspoons",
    "oz", "ounce", "ounces", "lb", "lbs", "pound", "pounds", "g", "gram", "grams", "kg", "ml",
    "l", "liter", "liters", "litre", "litres", "pinch", "pinches", "dash", "dashes", "clove",
    "cloves", "can", "cans", "package", "packages", "pkg", "bunch", "bunches", "slice", "slices",
    "stick", "sticks", "head", "heads", "sprig", "sprigs", "quart", "quarts", "pint", "pints",
    "jar", "jars", "bottle", "bottles", "handful", "piece", "pieces", "large", "medium", "small",
}
_QUANTITY = re.compile(r"^[\d\s½⅓⅔¼¾⅕⅖⅗⅘⅙⅚⅛⅜⅝⅞/.\-–]+")
_PARENS = re.compile(r"\([^)]*\)")


def ingredient_name(raw_line: str) -> str:
    """Derive a comparison name from a quantified ingredient line.

    Strips the leading quantity, a following unit word, parentheticals and any
    trailing preparation note after a comma.

    >>> ingredient_name("2 tablespoons sesame oil, divided")
    'sesame oil'
    """
    text = _PARENS.sub(" ", raw_line)
    text = _QUANTITY.sub("", text.strip())
    text = text.split(",", 1)[0]
    words = text.split()
    while words and words[0].lower().rstrip(".") in _UNITS and len(words) > 1:
        words.pop(0)
    if words and words[0].lower() == "of" and len(words) > 1:
        words.pop(0)
    name = normalize_name(" ".join(words))
    return name or normalize_name(raw_line)


def _parse_ingredient(entry: object, line_number: int) -> Ingredient:
    if isinstance(entry, str):
        raw, name = entry, None
    elif isinstance(entry, dict):
        raw = entry.get("raw_line", entry.get("text"))
        name = entry.get("name")
        if not isinstance(raw, str):
            raise MalformedRecord(line_number, "ingredient object needs a raw_line string")
        if name is not None and not isinstance(name, str):
            raise MalformedRecord(line_number, "ingredient name must be a string")
    else:
        raise MalformedRecord(line_number, f"bad ingredient entry {entry!r}")
    name = normalize_name(name) if name else ingredient_name(raw)
    if not name:
        raise MalformedRecord(line_number, f"ingredient line {raw!r} has no name")
    return Ingredient(raw_line=raw, name=name)


def _recipe_from_obj(obj: object, line_number: int) -> Recipe:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "expected a JSON object")
    rid, title = obj.get("id"), obj.get("title")
    ingredients, instructions = obj.get("ingredients"), obj.get("instructions", [])
    if not isinstance(rid, str) or not rid:
        raise MalformedRecord(line_number, "missing id")
    if not isinstance(title, str):
        raise MalformedRecord(line_number, "missing title")
    if not isinstance(ingredients, list) or not ingredients:
        raise MalformedRecord(line_number, "ingredients must be a non-empty list")
    if not isinstance(instructions, list) or not all(isinstance(s, str) for s in instructions):
        raise MalformedRecord(line_number, "instructions must be a list of strings")
    return Recipe(
        id=rid,
        title=title,
        ingredients=tuple(_parse_ingredient(e, line_number) for e in ingredients),
        instructions=tuple(instructions),
    )


def _legacy_to_obj(entry: dict) -> dict:
    # Recipe1M layer1.json nests every text field as {"text": ...}.
    def texts(items):
        return [i["text"] if isinstance(i, dict) else i for i in items or []]

    return {
        "id": entry.get("id"),
        "title": entry.get("title"),
        "ingredients": texts(entry.get("ingredients")),
        "instructions": texts(entry.get("instructions")),
    }


def _iter_jsonl(path: Path) -> Iterator[tuple[int, object]]:
    with path.open("r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield n, json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(n, str(exc)) from None


def load_recipes(path: str | Path, format: RecipeFormat | str = RecipeFormat.JSONL) -> list[Recipe]:
    """Parse a recipe file, preserving order and rejecting duplicate ids."""
    path = Path(path)
    fmt = RecipeFormat(format)
    if fmt is RecipeFormat.JSONL:
        rows: Iterable[tuple[int, object]] = _iter_jsonl(path)
    else:
        text = path.read_text(encoding="utf-8")
        if text.lstrip().startswith("["):
            data = json.loads(text)
            # whole-array layout: "line number" is the 1-based array index
            rows = ((i, _legacy_to_obj(e)) for i, e in enumerate(data, start=1))
        else:
            rows = ((n, _legacy_to_obj(e) if isinstance(e, dict) else e) for n, e in _iter_jsonl(path))
    recipes: list[Recipe] = []
    seen: set[str] = set()
    for n, obj in rows:
        recipe = _recipe_from_obj(obj, n)
        if recipe.id in seen:
            raise DuplicateId(recipe.id)
        seen.add(recipe.id)
        recipes.append(recipe)
    return recipes


def load_corpus(path: str | Path, format: RecipeFormat | str = RecipeFormat.JSONL) -> Corpus:
    return Corpus.from_recipes(load_recipes(path, format))


def load_substitutions(path: str | Path) -> list[SubstitutionRecord]:
    records: list[SubstitutionRecord] = []
    seen: set[str] = set()
    for n, obj in _iter_jsonl(Path(path)):
        if not isinstance(obj, dict):
            raise MalformedRecord(n, "expected a JSON object")
        for key in ("recipe_id", "source", "target", "split"):
            if not isinstance(obj.get(key), str) or not obj[key].strip():
                raise MalformedRecord(n, f"missing {key}")
        rid = obj.get("id")
        if rid is None:
            rid = f"s{n:06d}"
        elif not isinstance(rid, str) or not rid:
            raise MalformedRecord(n, "id must be a non-empty string")
        if rid in seen:
            raise DuplicateId(rid)
        seen.add(rid)
        rec = SubstitutionRecord(
            id=rid,
            recipe_id=obj["recipe_id"],
            source=obj["source"],
            target=obj["target"],
            split=Split.parse(obj["split"]),
        )
        if normalize_name(rec.source) == normalize_name(rec.target):
            raise MalformedRecord(n, "source and target are identical after normalization")
        records.append(rec)
    return records


def check_references(records: Iterable[SubstitutionRecord], corpus: Corpus) -> list[str]:
    """Ids of records whose recipe is missing from ``corpus``."""
    return [r.id for r in records if r.recipe_id not in corpus]


def compute_split_stats(records: Iterable[SubstitutionRecord]) -> SplitStats:
    counts = Counter(r.split for r in records)
    return SplitStats(counts[Split.TRAIN], counts[Split.VALIDATION], counts[Split.TEST])


def split_records(records: Iterable[SubstitutionRecord], split: Split | str) -> list[SubstitutionRecord]:
    split = split if isinstance(split, Split) else Split.parse(split)
    return [r for r in records if r.split is split]


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoFailure(path, exc) from exc


def write_dataset(records: Iterable[SubstitutionRecord], path: str | Path) -> None:
    write_jsonl((r.to_dict() for r in records), path)


def write_recipes(recipes: Iterable[Recipe], path: str | Path) -> None:
    write_jsonl((r.to_dict() for r in recipes), path)
