"""Ingredient name canonicalization and clustering.

Names pass through a fixed rule table before any comparison:

    R1  lowercase
    R2  delete decimal digits and fraction glyphs
    R3  fold diacritics to ASCII
    R4  "&" -> "and"
    R5  delete .,;:!?()[]{}"' and turn hyphen/slash into a space
    R6  collapse whitespace and trim

Clustering merges names whose plural-folded forms coincide, plus any names
listed together in a curated group file (CSV ``group_id,member``).
"""

from __future__ import annotations

import csv
import functools
import io
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, CuratedConflict

DEFAULT_EXCEPTIONS = ("couscous", "hummus", "asparagus", "molasses", "swiss")

_DELETE_PUNCT = set('.,;:!?()[]{}"\'')
# U+2044 FRACTION SLASH and U+2215 DIVISION SLASH show up once fraction glyphs are decomposed.
_SPACE_PUNCT = set("-/⁄∕")


@dataclass(frozen=True)
class Rule:
    rule_id: str
    description: str


@dataclass(frozen=True)
class RuleTable:
    rules: tuple[Rule, ...] = (
        Rule("R1", "lowercase"),
        Rule("R2", "delete decimal digits and fraction glyphs"),
        Rule("R3", "fold diacritics to ASCII"),
        Rule("R4", "rewrite '&' as 'and'"),
        Rule("R5", "delete .,;:!?()[]{}\"' and rewrite hyphen/slash as space"),
        Rule("R6", "collapse whitespace and trim"),
    )
    exceptions: frozenset[str] = frozenset(DEFAULT_EXCEPTIONS)

    def __post_init__(self):
        bad = [w for w in self.exceptions if w != w.lower()]
        if bad:
            raise ConfigError(f"exception words must be lowercase: {sorted(bad)}")
        ids = [r.rule_id for r in self.rules]
        if ids != ["R1", "R2", "R3", "R4", "R5", "R6"]:
            raise ConfigError(f"rule table must list R1..R6 in order, got {ids}")

    @classmethod
    def from_config(cls, path: str | Path) -> "RuleTable":
        """Load an override file: ``{"exceptions": [...], "rules": [{rule_id, description}]}``."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - {"exceptions", "rules"}
        if unknown:
            raise ConfigError(f"unknown rule table keys: {sorted(unknown)}")
        kwargs = {}
        if "exceptions" in data:
            kwargs["exceptions"] = frozenset(data["exceptions"])
        if "rules" in data:
            kwargs["rules"] = tuple(Rule(r["rule_id"], r.get("description", "")) for r in data["rules"])
        return cls(**kwargs)


DEFAULT_RULES = RuleTable()


def _fold_chars(text: str) -> str:
    # NFKD + lowercasing can each expose characters the other would change
    # (e.g. U+210C decomposes to an uppercase H), so iterate to a fixed point.
    for _ in range(4):
        decomposed = unicodedata.normalize("NFKD", text)
        stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
        lowered = stripped.lower()
        if lowered == text:
            break
        text = lowered
    return text


def normalize_name(raw: str, rules: RuleTable = DEFAULT_RULES) -> str:
    """Canonical form of an ingredient string.

    >>> normalize_name("2 Fresh Basil Leaves")
    'fresh basil leaves'
    >>> normalize_name("Jalapeño (seeded), 1/2")
    'jalapeno seeded'
    """
    text = _fold_chars(raw)  # R1 + R3
    text = "".join(c for c in text if not unicodedata.category(c).startswith("N"))  # R2
    text = text.replace("&", " and ")  # R4
    out = []
    for c in text:  # R5
        if c in _DELETE_PUNCT:
            continue
        out.append(" " if c in _SPACE_PUNCT else c)
    return " ".join("".join(out).split())  # R6


def _strip_trailing_s(token: str) -> str:
    stem = token.rstrip("s")
    return stem if stem else "s"


def _fold_token(token: str, exception_stems: Mapping[str, str]) -> str:
    # Everything is keyed on the token with trailing "s" removed, so a word
    # and the same word plus "s" always fold together.
    stem = _strip_trailing_s(token)
    if stem in exception_stems:
        return exception_stems[stem]
    if stem.endswith("ie"):
        return stem[:-2] + "y"
    if stem.endswith("oe"):
        return stem[:-1]
    if stem.endswith("e") and stem[:-1].endswith(("s", "x", "z", "ch", "sh")):
        return _strip_trailing_s(stem[:-1])
    return stem


@functools.lru_cache(maxsize=8)
def _exception_stems(exceptions: frozenset[str]) -> dict[str, str]:
    return {_strip_trailing_s(w): w for w in exceptions}


def fold_plural(name: str, rules: RuleTable = DEFAULT_RULES) -> str:
    """Comparison key that merges singular and plural spellings.

    The key is not meant for display: ``fold_plural("berries") == "berry"``
    but ``fold_plural("grass") == "gra"``.
    """
    exception_stems = _exception_stems(rules.exceptions)
    return " ".join(_fold_token(t, exception_stems) for t in name.split())


def _head_key(key: str) -> str:
    parts = key.split()
    return parts[-1] if parts else key


@dataclass(frozen=True)
class IngredientClustering:
    """Equivalence classes over normalized names.

    ``assignments`` maps every known name to its cluster id, which is the
    lexicographically smallest member of the cluster.
    """

    assignments: dict[str, str]
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    coarse: bool = False
    rules: RuleTable = DEFAULT_RULES
    _by_key: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def cluster_id(self, name: str) -> str:
        name = normalize_name(name, self.rules)
        if name in self.assignments:
            return self.assignments[name]
        key = fold_plural(name, self.rules)
        if key in self._by_key:
            return self._by_key[key]
        if self.coarse:
            head = "head:" + _head_key(key)
            if head in self._by_key:
                return self._by_key[head]
            return head
        return "key:" + key

    def members(self, cluster_id: str) -> list[str]:
        return sorted(n for n, c in self.assignments.items() if c == cluster_id)

    def to_json(self) -> str:
        return json.dumps(
            {
                "coarse": self.coarse,
                "assignments": dict(sorted(self.assignments.items())),
                "groups": {g: list(m) for g, m in sorted(self.groups.items())},
            },
            sort_keys=True,
            ensure_ascii=False,
        )


def read_curated_groups(source: str | Path | Iterable[str] | None, rules: RuleTable = DEFAULT_RULES) -> dict[str, tuple[str, ...]]:
    """Parse a ``group_id,member`` CSV into normalized groups.

    Raises ``CuratedConflict`` when one (plural-folded) name sits in two groups.
    """
    if source is None:
        return {}
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
        lines: Iterable[str] = io.StringIO(text)
    else:
        lines = source
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        return {}
    if not {"group_id", "member"} <= set(reader.fieldnames):
        raise ConfigError(f"curated group file needs columns group_id,member; got {reader.fieldnames}")
    groups: dict[str, list[str]] = {}
    owner: dict[str, str] = {}
    for row in reader:
        gid = (row["group_id"] or "").strip()
        member = normalize_name(row["member"] or "", rules)
        if not gid or not member:
            continue
        key = fold_plural(member, rules)
        if key in owner and owner[key] != gid:
            raise CuratedConflict(member, (owner[key], gid))
        owner[key] = gid
        bucket = groups.setdefault(gid, [])
        if member not in bucket:
            bucket.append(member)
    return {g: tuple(sorted(m)) for g, m in groups.items()}


def cluster_ingredients(
    names: Iterable[str],
    curated: str | Path | Mapping[str, Iterable[str]] | None = None,
    *,
    coarse: bool = False,
    rules: RuleTable = DEFAULT_RULES,
) -> IngredientClustering:
    """Group normalized names into clusters.

    Plural variants and curated group members share a cluster; everything
    else is a singleton. ``coarse=True`` additionally merges names with the
    same head noun (last token), which makes Hit@1 far more lenient.
    """
    if curated is None or isinstance(curated, (str, Path)):
        groups = read_curated_groups(curated, rules)
    else:
        rows = ["group_id,member"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for gid, members in curated.items():
            for m in members:
                writer.writerow([gid, m])
        rows.extend(buf.getvalue().splitlines())
        groups = read_curated_groups(rows, rules)

    all_names = {normalize_name(n, rules) for n in names}
    for members in groups.values():
        all_names.update(members)
    all_names.discard("")

    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            lo, hi = sorted((ra, rb))
            parent[hi] = lo

    # Nodes are names plus synthetic fold-key nodes, so that plural variants
    # meet at their shared key.
    for n in all_names:
        parent.setdefault(n, n)
        key = "\0key:" + fold_plural(n, rules)
        parent.setdefault(key, key)
        union(n, key)
        if coarse:
            head = "\0head:" + _head_key(fold_plural(n, rules))
            parent.setdefault(head, head)
            union(n, head)
    for members in groups.values():
        for m in members[1:]:
            union(members[0], m)

    roots: dict[str, list[str]] = {}
    for n in all_names:
        roots.setdefault(find(n), []).append(n)
    assignments: dict[str, str] = {}
    for members in roots.values():
        cid = min(members)
        for m in members:
            assignments[m] = cid

    by_key: dict[str, str] = {}
    for n, cid in assignments.items():
        key = fold_plural(n, rules)
        by_key[key] = cid
        if coarse:
            by_key["head:" + _head_key(key)] = cid
    return IngredientClustering(
        assignments=dict(sorted(assignments.items())),
        groups=dict(sorted(groups.items())),
        coarse=coarse,
        rules=rules,
        _by_key=by_key,
    )


def same_cluster(a: str, b: str, clustering: IngredientClustering) -> bool:
    return clustering.cluster_id(a) == clustering.cluster_id(b)
