"""
Phytochemical enrichment of salads
==================================

"""

from phytosub import data_path
from phytosub.corpus import load_recipes
from phytosub.enrich import Network, ScriptedSubstituter, enrich_corpus, load_phyto_table, rank_recipes

recipes = load_recipes(data_path("recipes.jsonl"))
table = load_phyto_table(data_path("phyto_table.csv"))
backend = ScriptedSubstituter.from_file(data_path("enrich_substitutions.json"))

report, enriched = enrich_corpus(recipes, backend, table, salad_only=True)
print(report.n_pairs, "substitutions over", report.n_unique_recipes, "salads")
for p in report.accepted_pairs:
    print(f"  {p.recipe_id}: {p.original} -> {p.substitute} (+{p.score_delta:g}, {', '.join(p.networks)})")

# only the Covid19 network
covid, _ = enrich_corpus(recipes, backend, table, {Network.COVID19}, salad_only=True)
print(covid.n_pairs, "Covid19 substitutions")

for recipe, score in rank_recipes([e.recipe for e in enriched], table):
    print(f"{score:5.1f}  {recipe.title}")
