"""FooDB food-category assignment for ingredient lists."""

from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CsvSchemaError, EmptyName
from .gateway import ChatExchange, Gateway, GenerationParams
from .normalize import normalize_name
from .prompts import CATEGORY_TEMPLATE, category_messages

logger = logging.getLogger(__name__)


class FoodCategory(str, enum.Enum):
    HERBS_AND_SPICES = "Herbs and Spices"
    FATS_AND_OILS = "Fats and Oils"
    UNCLASSIFIED = "Unclassified"
    BABY_FOODS = "Baby Foods"
    SNACK_FOODS = "Snack Foods"
    DISHES = "Dishes"
    BAKING_GOODS = "Baking Goods"
    CONFECTIONERIES = "Confectioneries"
    EGGS = "Eggs"
    MILK_AND_MILK_PRODUCTS = "Milk and Milk Products"
    ANIMAL_FOODS = "Animal Foods"
    AQUATIC_FOODS = "Aquatic Foods"
    BEVERAGES = "Beverages"
    COCOA_AND_COCOA_PRODUCTS = "Cocoa and Cocoa Products"
    SOY = "Soy"
    COFFEE_AND_COFFEE_PRODUCTS = "Coffee and Coffee Products"
    GOURDS = "Gourds"
    TEAS = "Teas"
    PULSES = "Pulses"
    CEREALS_AND_CEREAL_PRODUCTS = "Cereals and Cereal Products"
    NUTS = "Nuts"
    FRUITS = "Fruits"
    VEGETABLES = "Vegetables"


CATEGORY_NAMES = [c.value for c in FoodCategory]
_BY_FOLDED = {c.value.casefold(): c for c in FoodCategory}

# Temperature is pinned; only the model and token budget are configurable.
CATEGORY_PARAMS = GenerationParams(model_id="gpt-4-0613", temperature=0.0, max_output_tokens=10)


def build_category_prompt(name: str) -> list[dict[str, str]]:
    if not name or not name.strip():
        raise EmptyName("ingredient name is empty")
    return category_messages(name, CATEGORY_NAMES)


def parse_category(response: str) -> tuple[FoodCategory, bool]:
    """Map a model answer onto a category; the flag is True when repair failed.

    Tries an exact match after trimming, case-folding and stripping terminal
    punctuation, then a unique substring match in either direction.
    """
    text = response.strip().strip("\"'`*").strip().rstrip(".!?;:,").strip().casefold()
    if text in _BY_FOLDED:
        return _BY_FOLDED[text], False
    inside = [c for f, c in _BY_FOLDED.items() if f in text]
    if len(inside) == 1:
        return inside[0], False
    if len(inside) > 1:
        # prefer a name that is not contained in another match ("nuts" vs "coconuts")
        longest = max(inside, key=lambda c: len(c.value))
        if all(o is longest or o.value.casefold() in longest.value.casefold() for o in inside):
            return longest, False
    if len(text) >= 3:
        around = [c for f, c in _BY_FOLDED.items() if text in f]
        if len(around) == 1:
            return around[0], False
    return FoodCategory.UNCLASSIFIED, True


@dataclass
class CategorizeResult:
    rows: int = 0
    queried: int = 0
    cache_hits: int = 0
    flagged: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"template": CATEGORY_TEMPLATE, "rows": self.rows, "queried": self.queried,
                "cache_hits": self.cache_hits, "flagged": self.flagged}


def load_cache(path: str | Path | None) -> dict[str, str]:
    if path is None or not Path(path).exists():
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k: v for k, v in data.items() if v in CATEGORY_NAMES}


def save_cache(cache: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(json.dumps(dict(sorted(cache.items())), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _pick_column(fieldnames: list[str], column: str | None) -> str:
    if column:
        if column not in fieldnames:
            raise CsvSchemaError(f"column {column!r} not in {fieldnames}")
        return column
    for candidate in ("ingredient", "name", "ingredient_name"):
        if candidate in fieldnames:
            return candidate
    raise CsvSchemaError(f"no ingredient-name column in {fieldnames}; pass column=")


def categorize_all(
    input_csv: str | Path,
    output_csv: str | Path,
    gateway: Gateway,
    *,
    column: str | None = None,
    cache_path: str | Path | None = None,
    model_id: str | None = None,
    max_output_tokens: int | None = None,
) -> CategorizeResult:
    """Append a ``category`` column to ``input_csv``, one query per distinct name."""
    params = GenerationParams(
        model_id=model_id or CATEGORY_PARAMS.model_id,
        temperature=0.0,
        max_output_tokens=max_output_tokens or CATEGORY_PARAMS.max_output_tokens,
    )
    with Path(input_csv).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fieldnames = list(reader.fieldnames or [])
        rows = list(reader)
    if "category" in fieldnames:
        raise CsvSchemaError("input already has a category column")
    col = _pick_column(fieldnames, column) if fieldnames else None

    cache = load_cache(cache_path)
    result = CategorizeResult(rows=len(rows))
    keys = []
    for n, row in enumerate(rows, start=2):
        if None in row:
            raise CsvSchemaError(f"row {n} has more fields than the header")
        keys.append(normalize_name(row[col] or ""))
    pending = sorted({k for k in keys if k and k not in cache})
    result.cache_hits = sum(1 for k in set(keys) if k in cache)

    categories: dict[str, str] = dict(cache)
    if pending:
        done = gateway.complete_batch([ChatExchange(i, build_category_prompt(k)) for i, k in enumerate(pending)], params)
        result.queried = len(pending)
        for key, ex in zip(pending, done):
            if ex.ok:
                cat, flagged = parse_category(ex.response)
            else:
                cat, flagged = FoodCategory.UNCLASSIFIED, True
            if flagged:
                result.flagged.append(key)
            else:
                cache[key] = cat.value
            categories[key] = cat.value

    with Path(output_csv).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames + ["category"], quoting=csv.QUOTE_ALL, lineterminator="\n")
        writer.writeheader()
        for row, key in zip(rows, keys):
            row["category"] = categories.get(key, FoodCategory.UNCLASSIFIED.value)
            if not key and "" not in result.flagged:
                result.flagged.append("")
            writer.writerow(row)
    if cache_path is not None:
        save_cache(cache, cache_path)
    logger.info("categorized %d rows (%d queries, %d cached)", result.rows, result.queried, result.cache_hits)
    return result
