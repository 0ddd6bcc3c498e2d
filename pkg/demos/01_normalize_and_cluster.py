"""
Normalizing and clustering ingredient names
===========================================

"""

from phytosub import data_path
from phytosub.normalize import cluster_ingredients, fold_plural, normalize_name

# raw recipe strings carry quantities, accents and punctuation
for raw in ["2 Fresh Basil Leaves", "Jalapeño (seeded), 1/2", "Half & Half", "Almond-Flour."]:
    print(f"{raw!r:32} -> {normalize_name(raw)!r}")

# plural folding gives a comparison key, not a display form
print(fold_plural("berries"), fold_plural("tomatoes"), fold_plural("couscous"))

# curated groups merge names that are interchangeable for scoring
clusters = cluster_ingredients(["pecans", "pecan", "brown rice", "barley"], data_path("curated_clusters.csv"))
print(clusters.cluster_id("Pecans"), clusters.cluster_id("barley"), clusters.cluster_id("brown rice"))
print(clusters.members("barley"))
