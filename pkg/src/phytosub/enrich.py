"""Phytochemical enrichment of recipes.

Each ingredient carries a non-negative score per disease network (by default
the number of disease-targeting phytochemicals it contains). A recipe's
profile is the sum of its ingredients' scores over the targeted networks, and
a proposed substitute is accepted only if it strictly raises that sum.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .corpus import Ingredient, Recipe, write_jsonl
from .errors import NegativeScore, UnknownNetwork
from .evaluation import FrequencyBaseline, clean_prediction
from .gateway import ChatExchange, Gateway, GenerationParams
from .normalize import DEFAULT_RULES, fold_plural, normalize_name
from .prompts import substitute_messages

logger = logging.getLogger(__name__)


class Network(str, enum.Enum):
    CANCER = "Cancer"
    ALZHEIMERS = "Alzheimers"
    COVID19 = "Covid19"

    @classmethod
    def parse(cls, value: str) -> "Network":
        key = re.sub(r"[^a-z0-9]", "", value.lower())
        aliases = {"cancer": cls.CANCER, "alzheimers": cls.ALZHEIMERS, "alzheimer": cls.ALZHEIMERS,
                   "ad": cls.ALZHEIMERS, "covid19": cls.COVID19, "covid": cls.COVID19}
        if key not in aliases:
            raise UnknownNetwork(value)
        return aliases[key]


ALL_NETWORKS = frozenset(Network)


def parse_networks(value: str | Iterable[str] | None) -> frozenset[Network]:
    if value is None:
        return ALL_NETWORKS
    items = value.split(",") if isinstance(value, str) else value
    nets = frozenset(Network.parse(s) for s in items if s.strip())
    return nets or ALL_NETWORKS


def _key(name: str) -> str:
    return fold_plural(normalize_name(name), DEFAULT_RULES)


@dataclass(frozen=True)
class PhytoEntry:
    ingredient: str
    network: Network
    score: float


@dataclass
class PhytoTable:
    """Scores keyed by plural-folded ingredient name, then network."""

    entries: dict[str, dict[Network, float]] = field(default_factory=dict)
    names: dict[str, str] = field(default_factory=dict)

    def add(self, ingredient: str, network: Network, score: float) -> None:
        if score < 0:
            raise NegativeScore(ingredient, score)
        name = normalize_name(ingredient)
        key = _key(name)
        self.names.setdefault(key, name)
        per = self.entries.setdefault(key, {})
        # duplicate (ingredient, network) rows collapse to the larger score
        per[network] = max(score, per.get(network, 0.0))

    def score(self, ingredient: str, networks: Iterable[Network] = ALL_NETWORKS) -> float:
        per = self.entries.get(_key(ingredient), {})
        return sum(per.get(n, 0.0) for n in networks)

    def networks_of(self, ingredient: str) -> frozenset[Network]:
        return frozenset(n for n, s in self.entries.get(_key(ingredient), {}).items() if s > 0)

    def rows(self) -> list[PhytoEntry]:
        return [PhytoEntry(self.names[k], n, s) for k in sorted(self.entries) for n, s in sorted(self.entries[k].items())]

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())


def load_phyto_table(path: str | Path) -> PhytoTable:
    table = PhytoTable()
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return table
        missing = {"ingredient", "network", "score"} - set(reader.fieldnames)
        if missing:
            raise ValueError(f"phyto table missing columns {sorted(missing)}")
        for row in reader:
            table.add(row["ingredient"], Network.parse(row["network"]), float(row["score"]))
    return table


def recipe_phyto_score(recipe: Recipe, table: PhytoTable, networks: Iterable[Network] = ALL_NETWORKS) -> float:
    networks = frozenset(networks)
    return sum(table.score(i.name, networks) for i in recipe.ingredients)


# -- substitution backends ------------------------------------------------


class Substituter(Protocol):
    def propose(self, recipe: Recipe, names: Sequence[str]) -> list[str | Exception]: ...


class ScriptedSubstituter:
    """Fixed ``ingredient -> candidate`` lookup (plural-insensitive)."""

    def __init__(self, mapping: Mapping[str, str]):
        self.mapping = {_key(k): v for k, v in mapping.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedSubstituter":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def propose(self, recipe: Recipe, names: Sequence[str]) -> list[str | Exception]:
        return [self.mapping.get(_key(n)) or LookupError(f"no candidate for {n!r}") for n in names]


class BaselineSubstituter:
    def __init__(self, model: FrequencyBaseline):
        self.model = model

    def propose(self, recipe: Recipe, names: Sequence[str]) -> list[str | Exception]:
        out: list[str | Exception] = []
        for n in names:
            pred = self.model.predict(n)
            out.append(pred if pred is not None else LookupError(f"baseline abstains on {n!r}"))
        return out


class GatewaySubstituter:
    """Asks a chat model for one substitute per ingredient, one batch per recipe."""

    def __init__(self, gateway: Gateway, params: GenerationParams):
        self.gateway = gateway
        self.params = params

    def propose(self, recipe: Recipe, names: Sequence[str]) -> list[str | Exception]:
        done = self.gateway.complete_batch(
            [ChatExchange(i, substitute_messages(recipe, n)) for i, n in enumerate(names)], self.params)
        out: list[str | Exception] = []
        for ex in done:
            if not ex.ok:
                out.append(RuntimeError(ex.failure.kind))
                continue
            cand = clean_prediction(ex.response.removesuffix("END").strip())
            out.append(cand or ValueError("empty suggestion"))
        return out


# -- enrichment -----------------------------------------------------------


@dataclass(frozen=True)
class AcceptedPair:
    recipe_id: str
    original: str
    substitute: str
    networks: tuple[str, ...]
    score_delta: float

    def to_dict(self) -> dict:
        return {"recipe_id": self.recipe_id, "original": self.original, "substitute": self.substitute,
                "networks": list(self.networks), "score_delta": self.score_delta}


@dataclass(frozen=True)
class Rejection:
    recipe_id: str
    original: str
    candidate: str | None
    reason: str

    def to_dict(self) -> dict:
        return {"recipe_id": self.recipe_id, "original": self.original, "candidate": self.candidate, "reason": self.reason}


def propose_substitutions(
    recipe: Recipe,
    backend: Substituter,
    table: PhytoTable,
    networks: Iterable[Network] = ALL_NETWORKS,
) -> tuple[list[AcceptedPair], list[Rejection]]:
    """One candidate per ingredient; keep those that raise the targeted score."""
    networks = frozenset(networks)
    names = recipe.ingredient_names()
    try:
        proposals = backend.propose(recipe, names)
    except Exception as exc:  # a backend blowing up must not abort the corpus
        proposals = [exc] * len(names)
    accepted, rejected = [], []
    for name, cand in zip(names, proposals):
        if isinstance(cand, Exception):
            rejected.append(Rejection(recipe.id, name, None, f"BackendFailure: {cand}"))
            continue
        cand = normalize_name(cand)
        before, after = table.score(name, networks), table.score(cand, networks)
        if not cand or after <= before:
            rejected.append(Rejection(recipe.id, name, cand or None, "NoGain"))
            continue
        hit = sorted(n.value for n in table.networks_of(cand) & networks)
        accepted.append(AcceptedPair(recipe.id, name, cand, tuple(hit), after - before))
    return accepted, rejected


def _title_tokens(title: str) -> set[str]:
    return set(fold_plural(normalize_name(title)).split())


def filter_salads(recipes: Iterable[Recipe]) -> list[Recipe]:
    """Recipes whose normalized title has the token "salad" (or "salads")."""
    return [r for r in recipes if "salad" in _title_tokens(r.title)]


def rank_recipes(recipes: Iterable[Recipe], table: PhytoTable, networks: Iterable[Network] = ALL_NETWORKS) -> list[tuple[Recipe, float]]:
    """Highest cumulative score first; ties by recipe id."""
    networks = frozenset(networks)
    scored = [(r, recipe_phyto_score(r, table, networks)) for r in recipes]
    return sorted(scored, key=lambda rs: (-rs[1], rs[0].id))


def _rewrite(recipe: Recipe, pairs: Sequence[AcceptedPair]) -> Recipe:
    swap = {p.original: p.substitute for p in pairs}
    new = []
    for ing in recipe.ingredients:
        sub = swap.get(ing.name)
        if sub is None:
            new.append(ing)
            continue
        raw, n = re.subn(re.escape(ing.name), sub, ing.raw_line, count=1, flags=re.IGNORECASE)
        new.append(Ingredient(raw_line=raw if n else sub, name=sub))
    return replace(recipe, ingredients=tuple(new))


@dataclass
class EnrichmentReport:
    accepted_pairs: list[AcceptedPair] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    networks: tuple[str, ...] = ()

    @property
    def n_pairs(self) -> int:
        return len(self.accepted_pairs)

    @property
    def n_unique_recipes(self) -> int:
        return len({p.recipe_id for p in self.accepted_pairs})

    def to_dict(self) -> dict:
        return {
            "networks": list(self.networks),
            "n_pairs": self.n_pairs,
            "n_unique_recipes": self.n_unique_recipes,
            "accepted_pairs": [p.to_dict() for p in self.accepted_pairs],
            "rejected": [r.to_dict() for r in self.rejected],
            "failures": self.failures,
        }


@dataclass
class EnrichedRecipe:
    recipe: Recipe
    pairs: list[AcceptedPair]
    score_before: float
    score_after: float

    def to_dict(self) -> dict:
        d = self.recipe.to_dict()
        d["substitutions"] = [
            {"original": p.original, "substitute": p.substitute, "networks": list(p.networks), "delta": p.score_delta}
            for p in self.pairs
        ]
        d["score_before"] = self.score_before
        d["score_after"] = self.score_after
        return d


def enrich_corpus(
    recipes: Iterable[Recipe],
    backend: Substituter,
    table: PhytoTable,
    networks: Iterable[Network] = ALL_NETWORKS,
    *,
    salad_only: bool = False,
    out_path: str | Path | None = None,
) -> tuple[EnrichmentReport, list[EnrichedRecipe]]:
    """Substitute across a corpus and record provenance for every change."""
    networks = frozenset(networks)
    recipes = sorted(filter_salads(recipes) if salad_only else recipes, key=lambda r: r.id)
    report = EnrichmentReport(networks=tuple(sorted(n.value for n in networks)))
    enriched = []
    for recipe in recipes:
        accepted, rejected = propose_substitutions(recipe, backend, table, networks)
        report.accepted_pairs.extend(accepted)
        report.rejected.extend(rejected)
        report.failures.extend({"recipe_id": r.recipe_id, "original": r.original, "reason": r.reason}
                               for r in rejected if r.reason.startswith("BackendFailure"))
        new = _rewrite(recipe, accepted) if accepted else recipe
        enriched.append(EnrichedRecipe(new, accepted, recipe_phyto_score(recipe, table, networks),
                                       recipe_phyto_score(new, table, networks)))
    if out_path is not None:
        write_jsonl((e.to_dict() for e in enriched), out_path)
    logger.info("enrichment: %d pairs over %d recipes", report.n_pairs, report.n_unique_recipes)
    return report, enriched
