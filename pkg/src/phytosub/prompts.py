"""Versioned prompt templates.

Template text is part of the data contract: mock scripts and response caches
are keyed by the exact bytes, so any wording change needs a new version tag.
"""

from __future__ import annotations

from .corpus import Recipe

VALIDITY_TEMPLATE = "V1"
CATEGORY_TEMPLATE = "C1"

VALIDITY_SYSTEM = "You are a culinary expert evaluating ingredient substitutions."
SUBSTITUTE_SYSTEM = "You are a culinary expert suggesting ingredient substitutions."
CATEGORY_SYSTEM = "You are a food scientist classifying ingredients into FooDB food categories."


def render_recipe(recipe: Recipe) -> str:
    lines = [f"Recipe: {recipe.title}", "Ingredients:"]
    lines += [f"- {i.raw_line}" for i in recipe.ingredients]
    lines.append("Instructions:")
    lines += [f"{n}. {step}" for n, step in enumerate(recipe.instructions, start=1)]
    return "\n".join(lines)


def validity_messages(recipe: Recipe, source: str, target: str) -> list[dict[str, str]]:
    question = (
        f'In this recipe, can "{source}" be substituted with "{target}"? '
        "Answer with exactly one word: Correct, Potential, or Incorrect."
    )
    return [
        {"role": "system", "content": VALIDITY_SYSTEM},
        {"role": "user", "content": f"{render_recipe(recipe)}\n\n{question}"},
    ]


def substitute_request(recipe: Recipe, source: str) -> str:
    return f'{render_recipe(recipe)}\n\nSuggest exactly one substitute for "{source}".'


def substitute_messages(recipe: Recipe, source: str) -> list[dict[str, str]]:
    return [
        {"role": "system", "content": SUBSTITUTE_SYSTEM},
        {"role": "user", "content": substitute_request(recipe, source)},
    ]


def category_messages(name: str, categories: list[str]) -> list[dict[str, str]]:
    listing = "\n".join(f"{n}. {c}" for n, c in enumerate(categories, start=1))
    user = (
        f'Classify the ingredient "{name}" into exactly one of the following '
        f"{len(categories)} food categories:\n{listing}\n"
        "Respond with the category name only."
    )
    return [
        {"role": "system", "content": CATEGORY_SYSTEM},
        {"role": "user", "content": user},
    ]
